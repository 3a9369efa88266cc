#include "pmuplace/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include <CLI11.hpp>

#include "pmuplace/error.hpp"
#include "pmuplace/verification.hpp"

namespace pmu {

using nlohmann::json;

namespace {

void log(const std::string& msg) { std::cerr << "[pmuplace] " << msg << '\n'; }

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); }

ObjectiveMode parse_objective(const std::string& s) {
  if (s == "f1") return ObjectiveMode::PmuOnly;
  if (s == "f2") return ObjectiveMode::Conditional;
  invalid("objective must be f1 or f2, got '" + s + "'");
}

FailureMode parse_failure_mode(const std::string& s) {
  if (s == "exact") return FailureMode::Exact;
  if (s == "mc" || s == "monte_carlo") return FailureMode::MonteCarlo;
  invalid("failure mode must be exact or mc, got '" + s + "'");
}

InfoUnit parse_unit(const std::string& s) {
  if (s == "nats") return InfoUnit::Nats;
  if (s == "bits") return InfoUnit::Bits;
  invalid("unit must be nats or bits, got '" + s + "'");
}

Solver parse_solver(const std::string& s) {
  if (s == "greedy") return Solver::Greedy;
  if (s == "lazy" || s == "lazy_greedy") return Solver::LazyGreedy;
  if (s == "exhaustive") return Solver::Exhaustive;
  invalid("solver must be greedy, lazy or exhaustive, got '" + s + "'");
}

CaseFormat parse_format(const std::string& s) {
  if (auto f = parse_case_format(s)) return *f;
  invalid("case format must be json or matpower, got '" + s + "'");
}

const char* objective_name(ObjectiveMode m) { return m == ObjectiveMode::PmuOnly ? "f1" : "f2"; }
const char* failure_name(FailureMode m) { return m == FailureMode::Exact ? "exact" : "mc"; }

double to_bits(double nats) { return nats_to(nats, InfoUnit::Bits); }

std::vector<int> indices_of(const Objective& obj, const std::vector<int>& ids) {
  std::vector<int> out;
  std::set<int> seen;
  for (int id : ids) {
    const int i = obj.index_of(id);
    if (i < 0) throw Error(ErrorKind::UnknownCandidate, "no candidate with id " + std::to_string(id));
    if (!seen.insert(id).second) invalid("candidate " + std::to_string(id) + " listed twice");
    out.push_back(i);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CurveRow {
  int k = 0;
  double nats = 0.0;
};

void write_curve(const std::filesystem::path& path, const std::vector<CurveRow>& rows, double denom) {
  std::string text = "k,objective_nats,objective_bits,normalized_gain\n";
  for (const auto& r : rows) {
    const double norm = denom > 0.0 ? r.nats / denom : 0.0;
    text += std::to_string(r.k) + "," + fmt(r.nats) + "," + fmt(to_bits(r.nats)) + "," + fmt(norm) + "\n";
  }
  write_text(path, text);
}

json header(const RunConfig& cfg, const Session& s) {
  json j;
  j["case"] = cfg.case_path.filename().string();
  j["buses"] = s.net.buses.size();
  j["branches"] = s.net.branches.size();
  j["objective"] = objective_name(cfg.objective);
  j["candidates"] = s.candidates.size();
  j["pmu_noise_deg"] = cfg.defaults.pmu_noise_std_deg;
  j["conv_noise_deg"] = cfg.defaults.conv_noise_std_deg;
  j["availability"] = cfg.defaults.availability;
  j["failure_mode"] = failure_name(cfg.failure_mode);
  if (cfg.failure_mode == FailureMode::MonteCarlo) {
    j["mc_samples"] = cfg.mc_samples;
    j["seed"] = cfg.seed;
  }
  j["slots"] = s.spec.profile.num_slots();
  j["unit"] = cfg.unit == InfoUnit::Nats ? "nats" : "bits";
  return j;
}

double normalization(const Session& s) {
  std::vector<int> all(s.objective.num_candidates());
  for (int i = 0; i < s.objective.num_candidates(); ++i) all[i] = i;
  return s.objective.no_failure_value(all);
}

void put_normalization(json& j, double denom) {
  j["normalization"] = "value / no-failure MI of installing every candidate";
  j["normalization_denominator_nats"] = denom;
}

json placement_json(const PlacementResult& r, InfoUnit unit) {
  json j;
  j["solver"] = to_string(r.solver);
  j["budget"] = r.budget;
  j["order"] = r.order;
  json sets = json::array();
  for (std::size_t i = 1; i <= r.order.size(); ++i) {
    std::vector<int> s(r.order.begin(), r.order.begin() + static_cast<long>(i));
    std::sort(s.begin(), s.end());
    sets.push_back(s);
  }
  j["sets"] = sets;
  j["values_nats"] = r.values;
  std::vector<double> bits;
  for (double v : r.values) bits.push_back(to_bits(v));
  j["values_bits"] = bits;
  j["marginals_nats"] = r.marginals;
  j["objective"] = nats_to(r.value(), unit);
  j["evaluations"] = r.evaluations;
  return j;
}

PlacementResult run_solver(const Objective& obj, Solver solver, int k) {
  switch (solver) {
    case Solver::Greedy: return greedy_place(obj, k);
    case Solver::LazyGreedy: return lazy_greedy_place(obj, k);
    case Solver::Exhaustive: {
      ExhaustiveOptions opts;
      opts.progress = [](std::size_t done, std::size_t total) {
        log("exhaustive: " + std::to_string(done) + " exact evaluations (of at most " + std::to_string(total) + ")");
      };
      return exhaustive_place(obj, k, opts);
    }
  }
  return {};
}

void finish(const RunConfig& cfg, json& j, double seconds) {
  if (!cfg.omit_timing) j["wall_time_s"] = seconds;
  if (!cfg.out_json.empty()) write_text(cfg.out_json, j.dump(2) + "\n");
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void RunConfig::apply_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) invalid("config file must hold a JSON object");
  auto path = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    return p.is_relative() ? base_dir / p : p;
  };
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "case") case_path = path(v);
      else if (key == "format") case_format = parse_format(v.get<std::string>());
      else if (key == "objective") objective = parse_objective(v.get<std::string>());
      else if (key == "k") k = v.get<int>();
      else if (key == "k_max") k_max = v.get<int>();
      else if (key == "channel_limit") {
        if (v.is_null()) channel_limit.reset();
        else channel_limit = v.get<int>();
      } else if (key == "pmu_noise_deg") defaults.pmu_noise_std_deg = v.get<double>();
      else if (key == "conv_noise_deg") defaults.conv_noise_std_deg = v.get<double>();
      else if (key == "availability") defaults.availability = v.get<double>();
      else if (key == "failure_mode") failure_mode = parse_failure_mode(v.get<std::string>());
      else if (key == "mc_samples") mc_samples = v.get<std::size_t>();
      else if (key == "seed") seed = v.get<std::uint64_t>();
      else if (key == "unit") unit = parse_unit(v.get<std::string>());
      else if (key == "solver") solver = parse_solver(v.get<std::string>());
      else if (key == "set") selection = v.get<std::vector<int>>();
      else if (key == "trials") trials = v.get<std::size_t>();
      else if (key == "out_json") out_json = path(v);
      else if (key == "out_csv") out_csv = path(v);
      else if (key == "profile_scales") profile_scales = v.get<std::vector<double>>();
      else if (key == "injection_std_fraction") std_rule.fraction_of_mean = v.get<double>();
      else if (key == "injection_std_floor_mw") std_rule.floor_mw = v.get<double>();
      else if (key == "candidates") {
        std::vector<PmuCandidate> list;
        for (const auto& c : v) {
          PmuCandidate cand;
          cand.bus = c.at("bus").get<int>();
          cand.candidate_id = c.value("id", cand.bus);
          cand.channels = c.value("channels", std::vector<int>{});
          const double sd = deg_to_rad(c.value("noise_std_deg", defaults.pmu_noise_std_deg));
          const double a = c.value("availability", defaults.availability);
          cand.voltage_noise_var = sd * sd;
          cand.voltage_availability = a;
          cand.current_noise_vars.assign(cand.channels.size(), sd * sd);
          cand.channel_availabilities.assign(cand.channels.size(), a);
          list.push_back(cand);
        }
        candidates = list;
      } else if (key == "conventional") {
        ConventionalPlan plan;
        auto var = [&](const json& m) {
          const double sd = deg_to_rad(m.value("noise_std_deg", defaults.conv_noise_std_deg));
          return sd * sd;
        };
        for (const auto& m : v.value("injections", json::array())) {
          plan.injection_meters.push_back({m.at("bus").get<int>(), var(m)});
        }
        for (const auto& m : v.value("flows", json::array())) {
          plan.flow_meters.push_back({m.at("from").get<int>(), m.at("to").get<int>(), var(m)});
        }
        conventional = plan;
      } else if (key == "overrides") {
        for (const auto& [bus, o] : v.items()) {
          BusOverride ov;
          for (const auto& [field, val] : o.items()) {
            if (field == "noise_std_deg") ov.noise_std_deg = val.get<double>();
            else if (field == "availability") ov.availability = val.get<double>();
            else invalid("unknown override field '" + field + "' for bus " + bus);
          }
          overrides[std::stoi(bus)] = ov;
        }
      } else {
        invalid("unknown config key '" + key + "'");
      }
    } catch (const json::exception& e) {
      invalid("config key '" + key + "': " + e.what());
    }
  }
}

void RunConfig::validate() const {
  if (case_path.empty()) invalid("no case given; pass --case <file> or set \"case\" in the config");
  if (!std::filesystem::exists(case_path)) invalid("case file not found: " + case_path.string());
  if (k < 0) invalid("budget k must be non-negative");
  if (k_max && *k_max < 0) invalid("k_max must be non-negative");
  if (channel_limit && *channel_limit < 0) invalid("channel limit must be non-negative");
  if (!(defaults.pmu_noise_std_deg > 0.0)) invalid("PMU noise std must be positive");
  if (!(defaults.conv_noise_std_deg > 0.0)) invalid("conventional noise std must be positive");
  if (defaults.availability < 0.0 || defaults.availability > 1.0) invalid("availability must lie in [0, 1]");
  for (const auto& [bus, o] : overrides) {
    if (o.availability && (*o.availability < 0.0 || *o.availability > 1.0)) {
      invalid("override availability for bus " + std::to_string(bus) + " must lie in [0, 1]");
    }
    if (o.noise_std_deg && !(*o.noise_std_deg > 0.0)) {
      invalid("override noise std for bus " + std::to_string(bus) + " must be positive");
    }
  }
  if (failure_mode == FailureMode::MonteCarlo && mc_samples < 1) invalid("mc_samples must be at least 1");
  for (double s : profile_scales) {
    if (!(s != 0.0) || !std::isfinite(s)) invalid("profile scales must be finite and nonzero");
  }
  for (const auto& p : {out_json, out_csv}) {
    if (!p.empty() && p.has_parent_path() && !std::filesystem::exists(p.parent_path())) {
      invalid("output directory does not exist: " + p.parent_path().string());
    }
  }
}

Session open_session(const RunConfig& cfg) {
  cfg.validate();
  NetworkCase net = load_case(cfg.case_path, cfg.case_format, cfg.std_rule);
  SusceptanceModel model = build_susceptance(net);
  ObjectiveSpec spec;
  spec.mode = cfg.objective;
  spec.profile = cfg.profile_scales.empty() ? nominal_profile(net, model)
                                            : scaled_profile(net, model, cfg.profile_scales);
  if (cfg.objective == ObjectiveMode::Conditional) {
    spec.conventional = cfg.conventional ? *cfg.conventional
                                         : full_conventional_plan(net, cfg.defaults.conv_noise_var());
  }
  spec.info.failure_mode = cfg.failure_mode;
  spec.info.mc_samples = cfg.mc_samples;
  spec.info.seed = cfg.seed;
  const auto priors = build_priors(model, spec.profile);
  CandidateOptions opts;
  opts.channel_limit = cfg.channel_limit;
  opts.defaults = cfg.defaults;
  opts.overrides = cfg.overrides;
  auto cands = cfg.candidates ? *cfg.candidates : enumerate_candidates(net, model, priors, opts);
  for (const auto& c : cands) candidate_observation(c, model);  // topology check up front
  Objective obj(model, spec, cands);
  return Session{std::move(net), std::move(model), std::move(spec), std::move(cands), std::move(obj)};
}

json cmd_place(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Session s = open_session(cfg);
  log("placing K=" + std::to_string(cfg.k) + " on " + std::to_string(s.candidates.size()) + " candidates");
  const PlacementResult r = run_solver(s.objective, cfg.solver, cfg.k);
  const double denom = normalization(s);

  json j = header(cfg, s);
  j["command"] = "place";
  j.update(placement_json(r, cfg.unit));
  put_normalization(j, denom);
  if (cfg.failure_mode == FailureMode::MonteCarlo && !r.order.empty()) {
    j["final_std_error_nats"] = s.objective.estimate(indices_of(s.objective, r.order)).std_error;
  }
  std::vector<CurveRow> curve{{0, 0.0}};
  if (r.solver == Solver::Exhaustive) {
    if (!r.order.empty()) curve.push_back({static_cast<int>(r.order.size()), r.value()});
  } else {
    for (std::size_t i = 0; i < r.values.size(); ++i) curve.push_back({static_cast<int>(i + 1), r.values[i]});
  }
  json norm = json::array();
  for (const auto& c : curve) norm.push_back(denom > 0.0 ? c.nats / denom : 0.0);
  j["normalized_gain"] = norm;
  if (!cfg.out_csv.empty()) write_curve(cfg.out_csv, curve, denom);
  finish(cfg, j, elapsed(t0));
  return j;
}

json cmd_eval(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Session s = open_session(cfg);
  const auto sel = indices_of(s.objective, cfg.selection);
  const Estimate est = s.objective.estimate(sel);

  // Posterior with every selected channel alive, variances averaged over slots.
  std::vector<PmuCandidate> chosen;
  for (int i : sel) chosen.push_back(s.candidates[i]);
  const LinearObservation obs = stack_candidates(chosen, s.model);
  const int n = s.model.num_states();
  Eigen::VectorXd prior_var = Eigen::VectorXd::Zero(n), post_var = Eigen::VectorXd::Zero(n);
  double logdet_post = 0.0;
  const auto& bases = s.objective.base_covariances();
  for (std::size_t t = 0; t < bases.size(); ++t) {
    StatePrior p{s.objective.priors()[t].mean, bases[t], static_cast<int>(t)};
    const Eigen::MatrixXd post = posterior_cov(p, obs);
    prior_var += bases[t].diagonal();
    post_var += post.diagonal();
    logdet_post += logdet_psd(post, 0.0);
  }
  const double slots = static_cast<double>(bases.size());
  json buses = json::array();
  for (int bus : s.model.bus_ids) {
    const int i = s.model.state_index(bus);
    const double pv = i < 0 ? 0.0 : prior_var(i) / slots;
    const double qv = i < 0 ? 0.0 : post_var(i) / slots;
    buses.push_back({{"bus", bus},
                     {"prior_std_deg", rad_to_deg(std::sqrt(std::max(0.0, pv)))},
                     {"posterior_std_deg", rad_to_deg(std::sqrt(std::max(0.0, qv)))}});
  }

  json j = header(cfg, s);
  j["command"] = "eval";
  auto ids = cfg.selection;
  std::sort(ids.begin(), ids.end());
  j["set"] = ids;
  j["objective"] = nats_to(est.value, cfg.unit);
  j["value_nats"] = est.value;
  j["value_bits"] = to_bits(est.value);
  if (cfg.failure_mode == FailureMode::MonteCarlo) j["std_error_nats"] = est.std_error;
  j["no_failure_value_nats"] = s.objective.no_failure_value(sel);
  j["logdet_posterior"] = logdet_post / slots;
  j["posterior_note"] = "posterior with every selected channel alive";
  j["buses"] = buses;
  const double denom = normalization(s);
  put_normalization(j, denom);
  j["normalized_gain"] = denom > 0.0 ? est.value / denom : 0.0;
  finish(cfg, j, elapsed(t0));
  return j;
}

json cmd_sweep(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Session s = open_session(cfg);
  const int k_max = std::min(cfg.k_max.value_or(cfg.k), s.objective.num_candidates());
  // One greedy run serves every budget by the prefix property.
  const PlacementResult g = lazy_greedy_place(s.objective, k_max);
  const double denom = normalization(s);

  json j = header(cfg, s);
  j["command"] = "sweep";
  j["k_max"] = k_max;
  j["greedy"] = placement_json(g, cfg.unit);
  std::vector<CurveRow> curve{{0, 0.0}};
  for (std::size_t i = 0; i < g.values.size(); ++i) curve.push_back({static_cast<int>(i + 1), g.values[i]});

  if (cfg.solver == Solver::Exhaustive) {
    std::vector<PlacementResult> optimal;
    json opt = json::array();
    for (int k = 1; k <= k_max; ++k) {
      if (binomial(s.objective.num_candidates(), k) > ExhaustiveOptions{}.max_combinations) {
        log("exhaustive skipped from K=" + std::to_string(k) + ": search space too large");
        break;
      }
      optimal.push_back(run_solver(s.objective, Solver::Exhaustive, k));
      opt.push_back({{"k", k}, {"set", optimal.back().order}, {"value_nats", optimal.back().value()}});
    }
    const auto rep = approximation_report(g, optimal);
    json ratios = json::array();
    for (const auto& e : rep.entries) {
      ratios.push_back({{"k", e.k}, {"greedy", e.greedy}, {"optimal", e.optimal}, {"ratio", e.ratio},
                        {"below_bound", e.below_bound}});
    }
    j["optimal"] = opt;
    j["approximation"] = ratios;
    j["approximation_ok"] = rep.ok();
  }
  put_normalization(j, denom);
  if (!cfg.out_csv.empty()) write_curve(cfg.out_csv, curve, denom);
  finish(cfg, j, elapsed(t0));
  return j;
}

json cmd_verify(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Session s = open_session(cfg);
  json j = header(cfg, s);
  j["command"] = "verify";
  bool passed = true;

  ProbeOptions probe;
  probe.trials = cfg.trials;
  probe.seed = cfg.seed;
  probe.negate = cfg.negate_fixture;
  if (cfg.failure_mode == FailureMode::Exact) probe.max_uncertain_rows = 14;
  auto probe_json = [&](const Objective& obj, const char* name) {
    log(std::string("submodularity probe (") + name + ")");
    const ProbeReport rep = submodularity_probe(obj, probe);
    passed = passed && rep.ok();
    return json{{"objective", name},
                {"trials", rep.trials},
                {"submodularity_violations", rep.submodularity_violations},
                {"monotonicity_violations", rep.monotonicity_violations},
                {"worst_submodularity_excess", rep.worst_submodularity},
                {"worst_monotonicity_gain", rep.worst_monotonicity},
                {"example", rep.example},
                {"passed", rep.ok()}};
  };
  json probes = json::array();
  probes.push_back(probe_json(s.objective, objective_name(cfg.objective)));
  if (cfg.objective == ObjectiveMode::PmuOnly) {
    ObjectiveSpec f2 = s.spec;
    f2.mode = ObjectiveMode::Conditional;
    f2.conventional = full_conventional_plan(s.net, cfg.defaults.conv_noise_var());
    probes.push_back(probe_json(Objective(s.model, f2, s.candidates), "f2"));
  }
  j["submodularity"] = probes;

  // Cover fixture: 8 elements, 5 subsets, budget 2.
  {
    log("cover equivalence");
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::vector<int>> subsets;
    for (int m = 0; m < 5; ++m) {
      std::vector<int> sub;
      const int size = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int e = 0; e < size; ++e) sub.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
      subsets.push_back(sub);
    }
    const CoverProblem cover = build_cover_instance(8, subsets, 1.0, 0.5);
    json c{{"universe", 8}, {"subsets", cover.instance.subsets}, {"k", 2}};
    try {
      const CoverReport rep = cover_equivalence_check(cover, 2);
      c["subsets_checked"] = rep.subsets_checked;
      c["max_relative_error"] = rep.max_relative_error;
      c["greedy_by_mi"] = rep.greedy_by_mi;
      c["greedy_by_coverage"] = rep.greedy_by_coverage;
      c["passed"] = rep.greedy_match;
      passed = passed && rep.greedy_match;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EquivalenceViolation) throw;
      c["violation"] = e.what();
      c["passed"] = false;
      passed = false;
    }
    j["cover"] = c;
  }

  // MMSE oracle on the case prior, observed by the best single PMU.
  {
    log("MMSE Monte Carlo oracle");
    const PlacementResult first = greedy_place(s.objective, 1);
    std::vector<PmuCandidate> chosen;
    if (!first.order.empty()) chosen.push_back(s.candidates[s.objective.index_of(first.order[0])]);
    const LinearObservation obs = stack_candidates(chosen, s.model);
    const StatePrior prior{s.objective.priors()[0].mean, s.objective.base_covariances()[0], 0};
    const double analytic = logdet_psd(posterior_cov(prior, obs), 0.0);
    const MmseReport rep = mmse_monte_carlo(prior, obs, 10000, cfg.seed);
    const bool ok = std::abs(rep.logdet - analytic) <= 3.0 * rep.std_error;
    passed = passed && ok;
    j["mmse"] = {{"pmu", first.order},       {"samples", rep.samples},     {"empirical_logdet", rep.logdet},
                 {"analytic_logdet", analytic}, {"bootstrap_se", rep.std_error}, {"ci95", {rep.ci_low, rep.ci_high}},
                 {"passed", ok}};
  }

  {
    const int k = std::min(cfg.k, s.objective.num_candidates());
    log("lazy vs naive greedy, K=" + std::to_string(k));
    const PlacementResult naive = greedy_place(s.objective, k);
    const PlacementResult lazy = lazy_greedy_place(s.objective, k);
    const bool same = naive.order == lazy.order && naive.values == lazy.values && naive.marginals == lazy.marginals;
    passed = passed && same;
    j["lazy_greedy"] = {{"k", k},
                        {"order", naive.order},
                        {"naive_evaluations", naive.evaluations},
                        {"lazy_evaluations", lazy.evaluations},
                        {"identical", same},
                        {"passed", same}};
  }
  j["passed"] = passed;
  finish(cfg, j, elapsed(t0));
  return j;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Mutual-information PMU placement"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string format, objective = "f1", failure = "exact", unit = "nats", solver = "greedy";
  std::string config_path, case_path, out_json, out_csv;
  std::optional<int> k_max, channel_limit;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--case", case_path, "Case file (.json or MATPOWER .m)");
    sub->add_option("--format", format, "Case format: json | matpower");
    sub->add_option("--objective", objective, "f1 (PMU only) | f2 (conditional on conventional meters)");
    sub->add_option("--k", cfg.k, "Budget");
    sub->add_option("--k-max", k_max, "Largest budget for sweep");
    sub->add_option("--channel-limit", channel_limit, "Current channels per PMU");
    sub->add_option("--pmu-noise-deg", cfg.defaults.pmu_noise_std_deg, "PMU angle noise std (degrees)");
    sub->add_option("--conv-noise-deg", cfg.defaults.conv_noise_std_deg, "Conventional meter noise std");
    sub->add_option("--availability", cfg.defaults.availability, "Per-channel availability");
    sub->add_option("--failure-mode", failure, "exact | mc");
    sub->add_option("--mc-samples", cfg.mc_samples, "Monte Carlo failure samples");
    sub->add_option("--seed", cfg.seed, "Monte Carlo seed");
    sub->add_option("--unit", unit, "nats | bits");
    sub->add_option("--solver", solver, "greedy | lazy | exhaustive");
    sub->add_option("--out-json", out_json, "JSON report path (stdout if omitted)");
    sub->add_option("--out-csv", out_csv, "CSV curve path");
    sub->add_option("--config", config_path, "JSON config; its keys override flags");
    sub->add_flag("--omit-timing", cfg.omit_timing, "Leave wall time out of the report");
  };
  auto* place = app.add_subcommand("place", "Greedy / exhaustive placement for one budget");
  auto* eval = app.add_subcommand("eval", "Score an explicit placement");
  auto* sweep = app.add_subcommand("sweep", "Greedy curve over budgets 0..k-max");
  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  for (auto* sub : {place, eval, sweep, verify}) common(sub);
  eval->add_option("--set", cfg.selection, "Candidate ids, comma separated")->delimiter(',');
  verify->add_option("--trials", cfg.trials, "Submodularity probe trials");
  verify->add_flag("--negate-fixture", cfg.negate_fixture, "Probe the negated objective (must fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!case_path.empty()) cfg.case_path = case_path;
    if (!format.empty()) cfg.case_format = parse_format(format);
    cfg.objective = parse_objective(objective);
    cfg.failure_mode = parse_failure_mode(failure);
    cfg.unit = parse_unit(unit);
    cfg.solver = parse_solver(solver);
    cfg.k_max = k_max;
    cfg.channel_limit = channel_limit;
    if (!out_json.empty()) cfg.out_json = out_json;
    if (!out_csv.empty()) cfg.out_csv = out_csv;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) invalid("cannot open config " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        invalid("config " + config_path + " is not valid JSON: " + e.what());
      }
      cfg.apply_json(j, std::filesystem::path(config_path).parent_path());
    }

    json report;
    if (place->parsed()) report = cmd_place(cfg);
    else if (eval->parsed()) report = cmd_eval(cfg);
    else if (sweep->parsed()) report = cmd_sweep(cfg);
    else report = cmd_verify(cfg);
    if (cfg.out_json.empty()) std::cout << report.dump(2) << '\n';
    if (verify->parsed() && !report.value("passed", false)) {
      log("verification FAILED");
      return 1;
    }
    return 0;
  } catch (const Error& e) {
    log(std::string("error: ") + e.what());
    if (e.kind() == ErrorKind::PatternExplosion) log("hint: rerun with --failure-mode mc");
    return e.is_numerical() ? 2 : 1;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
}

}  // namespace pmu
