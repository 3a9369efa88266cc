#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmuplace/network.hpp"

namespace pmu {

/// A PMU configuration {bus, channels}. Channel 0 is the voltage channel;
/// channel k >= 1 is the current channel towards channels[k-1].
struct PmuCandidate {
  int candidate_id = 0;
  int bus = 0;
  std::vector<int> channels;
  double voltage_noise_var = 0.0;           // rad^2
  std::vector<double> current_noise_vars;   // rad^2, one per channel
  double voltage_availability = 1.0;
  std::vector<double> channel_availabilities;

  int num_channels() const { return 1 + static_cast<int>(channels.size()); }
  double availability(int channel) const {
    return channel == 0 ? voltage_availability : channel_availabilities[channel - 1];
  }
};

struct MeasurementDefaults {
  double pmu_noise_std_deg = 0.02;
  double conv_noise_std_deg = 0.57;
  double availability = 0.97;

  double pmu_noise_var() const { return deg_to_rad(pmu_noise_std_deg) * deg_to_rad(pmu_noise_std_deg); }
  double conv_noise_var() const { return deg_to_rad(conv_noise_std_deg) * deg_to_rad(conv_noise_std_deg); }
};

struct BusOverride {
  std::optional<double> noise_std_deg;
  std::optional<double> availability;
};

struct CandidateOptions {
  std::optional<int> channel_limit;
  /// With a channel limit, emit one candidate per (bus, channel subset)
  /// instead of one per bus. Candidate ids are then sequential from 1.
  bool enumerate_channel_subsets = false;
  std::size_t max_candidates = 100000;
  MeasurementDefaults defaults;
  std::map<int, BusOverride> overrides;
};

/// One candidate per bus (id = bus id) monitoring every neighbour, or the
/// `channel_limit` neighbours with the largest prior angle variance (ties to
/// the lowest bus id). `priors` supplies those variances; the slack bus
/// counts as variance 0. A bus whose PMU would observe nothing (an isolated
/// slack bus) gets no candidate.
std::vector<PmuCandidate> enumerate_candidates(const NetworkCase& net,
                                               const SusceptanceModel& model,
                                               std::span<const StatePrior> priors,
                                               const CandidateOptions& options = {});

struct InjectionMeter {
  int bus = 0;
  double noise_var = 0.0;
};

struct FlowMeter {
  int from = 0;
  int to = 0;
  double noise_var = 0.0;
};

struct ConventionalPlan {
  std::vector<InjectionMeter> injection_meters;
  std::vector<FlowMeter> flow_meters;

  bool empty() const { return injection_meters.empty() && flow_meters.empty(); }
};

/// Injection meters on every bus and a flow meter on every branch record.
ConventionalPlan full_conventional_plan(const NetworkCase& net, double noise_var);

struct RowLabel {
  enum class Kind { PmuVoltage, PmuCurrent, Injection, Flow, Synthetic };
  Kind kind = Kind::Synthetic;
  int source = 0;   // candidate id, meter index, or synthetic group
  int channel = 0;  // channel index within the candidate
  int bus = 0;
  int other = 0;    // far end of a current / flow row

  std::string str() const;
};

/// Stacked linear-Gaussian measurement z = H theta + e with diagonal noise.
struct LinearObservation {
  Eigen::MatrixXd h;
  Eigen::VectorXd noise_var;
  std::vector<RowLabel> labels;
  std::vector<double> availability;  // per row; 1 for conventional meters

  int rows() const { return static_cast<int>(h.rows()); }
  int cols() const { return static_cast<int>(h.cols()); }
  Eigen::MatrixXd noise_cov() const { return noise_var.asDiagonal(); }

  static LinearObservation empty(int num_states);
  LinearObservation select_rows(std::span<const int> rows) const;
  LinearObservation append(const LinearObservation& other) const;
};

/// Rows: voltage (+1 on theta_i), then one row per channel (+1 on theta_i,
/// -1 on theta_j). Slack terms are dropped; a row left with no coefficient
/// (the voltage row of a PMU at the slack bus) is omitted.
LinearObservation candidate_observation(const PmuCandidate& cand, const SusceptanceModel& model);

LinearObservation stack_candidates(std::span<const PmuCandidate> cands,
                                   const SusceptanceModel& model);

/// Injection rows use row i of the DC equation over the state columns; flow
/// rows measure (theta_i - theta_j) / x_ij, i.e. B_ij (theta_j - theta_i)
/// with the Laplacian sign convention.
LinearObservation conventional_observation(const ConventionalPlan& plan,
                                           const SusceptanceModel& model);

struct FailurePattern {
  std::vector<bool> alive;  // one flag per channel, candidates in order
  double probability = 1.0;
};

inline constexpr std::size_t kMaxFailurePatterns = std::size_t{1} << 20;

/// Every alive/dead combination of the channels whose availability is
/// strictly between 0 and 1; other channels are fixed alive (a == 1) or
/// dead (a == 0).
std::vector<FailurePattern> failure_patterns(std::span<const PmuCandidate> cands,
                                             std::size_t cap = kMaxFailurePatterns);

}  // namespace pmu
