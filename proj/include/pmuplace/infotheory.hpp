#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pmuplace/measurements.hpp"
#include "pmuplace/network.hpp"

namespace pmu {

enum class InfoUnit { Nats, Bits };
enum class FailureMode { Exact, MonteCarlo };
enum class ObjectiveMode { PmuOnly, Conditional };  // F1, F2

inline double nats_to(double nats, InfoUnit unit) {
  return unit == InfoUnit::Bits ? nats / std::log(2.0) : nats;
}

struct InfoConfig {
  InfoUnit unit = InfoUnit::Nats;
  double quantization_step = 1e-4;  // radians; display only, never enters MI
  double jitter = 1e-12;            // relative diagonal regularization
  FailureMode failure_mode = FailureMode::Exact;
  std::size_t mc_samples = 2000;
  std::uint64_t seed = 0;
  std::size_t pattern_cap = kMaxFailurePatterns;

  void validate() const;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  // zero for exact evaluation
};

/// log det via Cholesky after adding jitter * trace(m) / dim to the diagonal.
double logdet_psd(const Eigen::MatrixXd& m, double jitter = 1e-12);

/// I(theta; z) = 1/2 logdet(I + R^-1/2 H Sigma H^T R^-1/2) in the configured unit.
double gaussian_mi(const StatePrior& prior, const LinearObservation& obs,
                   const InfoConfig& info = {});

/// Sigma - Sigma H^T (H Sigma H^T + R)^-1 H Sigma, symmetrized.
Eigen::MatrixXd posterior_cov(const StatePrior& prior, const LinearObservation& obs);

/// I(theta; z_pmu | z_conv).
double conditional_mi(const StatePrior& prior, const LinearObservation& pmu_obs,
                      const LinearObservation& conv_obs, const InfoConfig& info = {});

/// Failure-averaged MI of `obs`, each row alive independently with its
/// availability. Monte Carlo draws are keyed by (seed, sample, row source,
/// row channel) so a row's fate in a sample does not depend on which other
/// rows are present.
Estimate expected_mi(const StatePrior& prior, const LinearObservation& obs,
                     const LinearObservation* conv_obs, const InfoConfig& info);

Estimate expected_mi(const StatePrior& prior, std::span<const PmuCandidate> cands,
                     const SusceptanceModel& model, const std::optional<ConventionalPlan>& conv,
                     const InfoConfig& info);

/// E over independent row availabilities of 1/2 logdet(I + G_AA), where A is
/// the alive row set. Depth-first over the uncertain rows with an
/// incrementally extended Cholesky factor, so memory is O(rows^2).
/// Throws PatternExplosion when 2^(uncertain rows) exceeds `pattern_cap`.
double expected_half_logdet(const Eigen::MatrixXd& gram, std::span<const double> availability,
                            double jitter = 0.0,
                            std::size_t pattern_cap = kMaxFailurePatterns);

/// Uniform in [0,1) from a counter-based hash; identical for identical keys.
double counter_uniform(std::uint64_t seed, std::uint64_t sample, std::int64_t source,
                       std::int64_t channel);

struct ObjectiveSpec {
  ObjectiveMode mode = ObjectiveMode::PmuOnly;
  InjectionProfile profile;
  std::optional<ConventionalPlan> conventional;
  InfoConfig info;

  void validate() const;
};

/// The placement objective F(S) compiled for a fixed candidate set. All
/// values are nats. Selections are given as indices into candidates().
class Objective {
 public:
  Objective(const SusceptanceModel& model, const ObjectiveSpec& spec,
            std::vector<PmuCandidate> candidates);
  ~Objective();
  Objective(Objective&&) noexcept;
  Objective& operator=(Objective&&) noexcept;

  const std::vector<PmuCandidate>& candidates() const { return candidates_; }
  int num_candidates() const { return static_cast<int>(candidates_.size()); }
  int num_states() const;
  const ObjectiveSpec& spec() const { return spec_; }
  const std::vector<StatePrior>& priors() const;
  /// Per-slot covariance the PMU rows are measured against: the prior (F1)
  /// or the prior conditioned on the conventional plan (F2).
  const std::vector<Eigen::MatrixXd>& base_covariances() const;
  /// Index of a candidate id, or -1.
  int index_of(int candidate_id) const;

  /// F(S) with failures, averaged over slots.
  Estimate estimate(std::span<const int> selection) const;
  double value(std::span<const int> selection) const { return estimate(selection).value; }
  /// F(S) with every channel alive. Upper-bounds value(S) (and every Monte
  /// Carlo sample of it).
  double no_failure_value(std::span<const int> selection) const;
  /// value(S) when the failure patterns fit the cap; otherwise an upper
  /// bound that treats the rows beyond the cap as always alive.
  double capped_upper_bound(std::span<const int> selection) const;
  /// Rows of the selection with availability strictly between 0 and 1.
  int uncertain_rows(std::span<const int> selection) const;

  /// Incremental evaluation for greedy solvers: per-scenario posterior
  /// covariances (failure patterns or Monte Carlo samples) for the current
  /// selection. When the scenario set would outgrow the memory budget the
  /// state degrades to from-scratch evaluation.
  class State;
  State initial_state() const;
  /// F(S + {candidate}) - F(S).
  double gain(const State& state, int candidate) const;
  void extend(State& state, int candidate) const;

 private:
  struct Impl;
  std::vector<PmuCandidate> candidates_;
  ObjectiveSpec spec_;
  std::unique_ptr<Impl> impl_;
};

class Objective::State {
 public:
  const std::vector<int>& selection() const { return selection_; }
  double value() const { return value_; }
  bool incremental() const { return incremental_; }

 private:
  friend class Objective;
  struct Scenario {
    double weight = 1.0;
    std::uint64_t sample = 0;
    std::vector<Eigen::MatrixXd> cov;  // one per slot
  };
  std::vector<int> selection_;
  std::vector<Scenario> scenarios_;
  double value_ = 0.0;
  bool incremental_ = true;
};

/// Convenience wrapper: F(S) for candidate ids.
double objective_value(const SusceptanceModel& model, const ObjectiveSpec& spec,
                       std::span<const PmuCandidate> candidates, std::span<const int> selected_ids);

}  // namespace pmu
