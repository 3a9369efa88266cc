#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmuplace/infotheory.hpp"
#include "pmuplace/placement.hpp"

namespace pmu {

/// Max-k-cover instance recast as placement: states are iid N(0, gamma);
/// candidate m observes the elements of subsets[m] directly with noise kappa.
struct CoverInstance {
  int universe_size = 0;
  std::vector<std::vector<int>> subsets;  // elements in 1..universe_size
  double gamma = 1.0;
  double kappa = 1.0;
  /// Duplicating form: an element covered twice gets two rows (negative
  /// control). Default: one row per covered element.
  bool duplicating = false;

  double unit_information() const;  // 1/2 ln(1 + gamma/kappa)
  int coverage(const std::vector<int>& selection) const;
};

struct CoverProblem {
  CoverInstance instance;
  StatePrior prior;
  InfoConfig info;

  /// Rows observed by a selection of subset indices (0-based).
  LinearObservation observation(const std::vector<int>& selection) const;
  double mi(const std::vector<int>& selection) const;
};

CoverProblem build_cover_instance(int universe_size, std::vector<std::vector<int>> subsets,
                                  double gamma, double kappa, bool duplicating = false);

struct CoverReport {
  std::size_t subsets_checked = 0;
  double max_relative_error = 0.0;
  std::vector<int> greedy_by_mi;        // subset indices in selection order
  std::vector<int> greedy_by_coverage;
  int coverage_by_mi = 0;
  int coverage_by_coverage = 0;
  bool greedy_match = false;
};

/// Checks MI(S) = c |cover(S)| for every |S| <= k and compares the two
/// greedy runs. Throws EquivalenceViolation naming the offending S.
CoverReport cover_equivalence_check(const CoverProblem& problem, int k);

struct MmseReport {
  double logdet = 0.0;  // of the empirical error covariance
  double std_error = 0.0;  // bootstrap
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t samples = 0;
  Eigen::MatrixXd error_covariance;
};

inline constexpr int kBootstrapResamples = 200;

/// Draws (theta, z), applies the linear MMSE estimator and returns the log
/// determinant of the empirical error covariance with a bootstrap interval.
/// Draw i depends only on (seed, i).
MmseReport mmse_monte_carlo(const StatePrior& prior, const LinearObservation& obs,
                            std::size_t samples, std::uint64_t seed);

struct ProbeOptions {
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  /// Largest number of uncertain rows in B + s; bigger draws are trimmed.
  /// Keeps exact failure evaluation cheap.
  std::optional<int> max_uncertain_rows;
  bool negate = false;  // test fixture: probe -F instead of F
  double submodular_tol = 1e-9;
  double monotone_tol = 1e-10;
};

struct ProbeReport {
  std::size_t trials = 0;
  std::size_t submodularity_violations = 0;
  std::size_t monotonicity_violations = 0;
  double worst_submodularity = 0.0;  // largest marginal(B,s) - marginal(A,s)
  double worst_monotonicity = 0.0;   // most negative marginal(B,s)
  std::string example;               // first violating triple, if any
  bool ok() const { return submodularity_violations == 0 && monotonicity_violations == 0; }
};

ProbeReport submodularity_probe(const Objective& obj, const ProbeOptions& opts = {});

struct DOptimalityReport {
  int k = 0;
  std::vector<std::vector<int>> argmax_mi;        // candidate ids, tied sets
  std::vector<std::vector<int>> argmin_logdet;
  bool equal = false;
};

/// Over all k-subsets: the sets maximizing the objective versus the sets
/// minimizing the expected log determinant of the posterior covariance,
/// the latter computed from failure patterns and posterior_cov directly.
DOptimalityReport d_optimality_check(const SusceptanceModel& model, const Objective& obj, int k);

/// Random connected network: a random spanning tree plus `extra_branches`
/// chords, reactances in [0.05, 0.5], injections in [-1, 1] pu. Bus 1 is slack.
NetworkCase random_case(int buses, int extra_branches, std::uint64_t seed);

}  // namespace pmu
