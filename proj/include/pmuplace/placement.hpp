#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pmuplace/infotheory.hpp"

namespace pmu {

enum class Solver { Greedy, LazyGreedy, Exhaustive };
const char* to_string(Solver s);

struct PlacementResult {
  std::vector<int> order;        // candidate ids
  std::vector<double> values;    // F after each step, nats
  std::vector<double> marginals; // per-step gain, nats
  int budget = 0;
  Solver solver = Solver::Greedy;
  std::size_t evaluations = 0;   // objective / gain evaluations

  double value() const { return values.empty() ? 0.0 : values.back(); }
};

struct ExhaustiveOptions {
  double max_combinations = 2e6;
  std::size_t progress_every = 100000;
  /// Called with (evaluated, total) every `progress_every` exact evaluations.
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Adds the candidate with the largest gain each step, ties to the lowest id.
PlacementResult greedy_place(const Objective& obj, int k);

/// Same output as greedy_place; gains from earlier steps serve as upper
/// bounds so candidates that cannot win are not re-evaluated.
PlacementResult lazy_greedy_place(const Objective& obj, int k);

/// Best k-subset. The no-failure value bounds the failure-averaged value,
/// so only subsets whose bound reaches the incumbent are evaluated exactly.
/// Ties go to the lexicographically smallest id set; order is ascending.
PlacementResult exhaustive_place(const Objective& obj, int k, const ExhaustiveOptions& opts = {});

PlacementResult greedy_place(const SusceptanceModel& model, const ObjectiveSpec& spec,
                             std::vector<PmuCandidate> cands, int k);
PlacementResult lazy_greedy_place(const SusceptanceModel& model, const ObjectiveSpec& spec,
                                  std::vector<PmuCandidate> cands, int k);
PlacementResult exhaustive_place(const SusceptanceModel& model, const ObjectiveSpec& spec,
                                 std::vector<PmuCandidate> cands, int k,
                                 const ExhaustiveOptions& opts = {});

struct ApproximationEntry {
  int k = 0;
  double greedy = 0.0;
  double optimal = 0.0;
  double ratio = 1.0;
  bool below_bound = false;  // ratio < 1 - 1/e
};

struct ApproximationReport {
  std::vector<ApproximationEntry> entries;
  double min_ratio = 1.0;
  bool ok() const;
};

inline constexpr double kGreedyBound = 0.63212055882855767;  // 1 - 1/e

/// `optimal[i]` is the exhaustive result for budget optimal[i].budget; the
/// greedy value at that budget is greedy.values[budget-1].
ApproximationReport approximation_report(const PlacementResult& greedy,
                                         std::span<const PlacementResult> optimal);

double binomial(int n, int k);

}  // namespace pmu
