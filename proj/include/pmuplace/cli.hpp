#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmuplace/measurements.hpp"
#include "pmuplace/placement.hpp"

namespace pmu {

struct RunConfig {
  std::filesystem::path case_path;
  std::optional<CaseFormat> case_format;
  ObjectiveMode objective = ObjectiveMode::PmuOnly;
  int k = 4;
  std::optional<int> k_max;
  std::optional<int> channel_limit;
  MeasurementDefaults defaults;
  std::map<int, BusOverride> overrides;
  InjectionStdRule std_rule;
  std::vector<double> profile_scales;  // empty: one nominal slot
  /// Verbatim candidate list; replaces enumeration when set.
  std::optional<std::vector<PmuCandidate>> candidates;
  /// Conventional plan for f2; the full plan when unset.
  std::optional<ConventionalPlan> conventional;
  FailureMode failure_mode = FailureMode::Exact;
  std::size_t mc_samples = 2000;
  std::uint64_t seed = 0;
  InfoUnit unit = InfoUnit::Nats;
  Solver solver = Solver::Greedy;
  std::vector<int> selection;  // eval
  std::size_t trials = 2000;   // verify
  bool negate_fixture = false; // verify
  bool omit_timing = false;
  std::filesystem::path out_json;
  std::filesystem::path out_csv;

  /// Overlays keys from a config file; unknown keys are rejected. Relative
  /// paths resolve against `base_dir`.
  void apply_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  void validate() const;
};

/// Everything derived from a config that the commands share.
struct Session {
  NetworkCase net;
  SusceptanceModel model;
  ObjectiveSpec spec;
  std::vector<PmuCandidate> candidates;
  Objective objective;
};

Session open_session(const RunConfig& cfg);

nlohmann::json cmd_place(const RunConfig& cfg);
nlohmann::json cmd_eval(const RunConfig& cfg);
nlohmann::json cmd_sweep(const RunConfig& cfg);
/// "passed" is false when any check fails.
nlohmann::json cmd_verify(const RunConfig& cfg);

/// Command-line entry point. Exit codes: 0 success, 1 validation or
/// verification failure, 2 numerical failure.
int cli_main(int argc, char** argv);

}  // namespace pmu
