#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pmu {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Bus {
  int id = 0;
  double injection_mean = 0.0;  // per-unit, generation minus load
  double injection_std = 0.0;   // per-unit
};

struct Branch {
  int from = 0;
  int to = 0;
  double reactance = 0.0;  // per-unit, > 0
};

/// Raw grid topology plus nominal injection statistics. Buses are kept in
/// ascending id order regardless of the order they appear in the source file.
struct NetworkCase {
  double base_mva = 100.0;
  int slack_bus = 0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;

  const Bus* find_bus(int id) const;
  bool has_branch(int a, int b) const;
  /// Adjacent bus ids, ascending, parallel branches collapsed.
  std::vector<int> neighbors(int id) const;
};

enum class CaseFormat { Json, Matpower };

std::optional<CaseFormat> parse_case_format(std::string_view tag);

/// How missing injection standard deviations are filled in: a fraction of
/// |mean|, never below a floor (zero-injection buses would otherwise make the
/// prior degenerate).
struct InjectionStdRule {
  double fraction_of_mean = 0.10;
  double floor_mw = 0.2;
};

NetworkCase parse_case(std::string_view text, CaseFormat format,
                       const InjectionStdRule& std_rule = {});

/// Reads a case file; the format is inferred from the extension (.json / .m)
/// when not given.
NetworkCase load_case(const std::filesystem::path& path,
                      std::optional<CaseFormat> format = std::nullopt,
                      const InjectionStdRule& std_rule = {});

/// DC susceptance matrices. b_full is the weighted graph Laplacian (edge
/// weight 1/x), so P = b_reduced * theta over the non-slack buses.
struct SusceptanceModel {
  Eigen::MatrixXd b_full;
  Eigen::MatrixXd b_reduced;
  std::vector<int> bus_ids;    // row order of b_full, ascending
  std::vector<int> state_ids;  // row order of b_reduced (non-slack), ascending
  int slack_bus = 0;

  int num_states() const { return static_cast<int>(state_ids.size()); }
  /// Row of b_reduced for a bus, or -1 for the slack bus / unknown ids.
  int state_index(int bus_id) const;
  /// Row of b_full for a bus, or -1.
  int full_index(int bus_id) const;

  std::map<int, int> state_lookup;
  std::map<int, int> full_lookup;
};

SusceptanceModel build_susceptance(const NetworkCase& net);

/// Injection statistics per time slot, over all buses in
/// SusceptanceModel::bus_ids order.
struct InjectionProfile {
  struct Slot {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  std::vector<Slot> slots;

  int num_slots() const { return static_cast<int>(slots.size()); }
};

/// One slot at the case's nominal injections with diagonal covariance.
InjectionProfile nominal_profile(const NetworkCase& net, const SusceptanceModel& model);

/// Slots whose means are the nominal means times each scale; the standard
/// deviations scale with them.
InjectionProfile scaled_profile(const NetworkCase& net, const SusceptanceModel& model,
                                const std::vector<double>& scales);

struct StatePrior {
  Eigen::VectorXd mean;        // radians
  Eigen::MatrixXd covariance;  // radians^2
  int slot_index = 0;

  int dim() const { return static_cast<int>(mean.size()); }
};

/// Gaussian prior over non-slack bus angles: mean B^-1 mu, covariance
/// B^-1 Sigma B^-1.
StatePrior build_prior(const SusceptanceModel& model, const InjectionProfile::Slot& slot,
                       int slot_index = 0);

std::vector<StatePrior> build_priors(const SusceptanceModel& model,
                                     const InjectionProfile& profile);

}  // namespace pmu
