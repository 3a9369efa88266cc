#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmuplace/error.hpp"
#include "pmuplace/infotheory.hpp"
#include "pmuplace/measurements.hpp"
#include "pmuplace/network.hpp"

namespace fixture {

inline std::string data(const std::string& name) { return std::string(PMU_DATA_DIR) + "/" + name; }

// 1 - 2 - 3, x = 1 on both branches, slack 1.
inline const char* kPath3 = R"({
  "base_mva": 100, "slack": 1,
  "buses": [{"id": 1, "p_inj_mw": 0}, {"id": 2, "p_inj_mw": 30}, {"id": 3, "p_inj_mw": -30}],
  "branches": [{"from": 1, "to": 2, "x_pu": 1.0}, {"from": 2, "to": 3, "x_pu": 1.0}]
})";

inline const char* kTwoBus = R"({
  "base_mva": 100, "slack": 1,
  "buses": [{"id": 1, "p_inj_mw": 0}, {"id": 2, "p_inj_mw": 50, "p_std_mw": 5}],
  "branches": [{"from": 1, "to": 2, "x_pu": 0.5}]
})";

inline pmu::NetworkCase path3() { return pmu::parse_case(kPath3, pmu::CaseFormat::Json); }
inline pmu::NetworkCase two_bus() { return pmu::parse_case(kTwoBus, pmu::CaseFormat::Json); }
inline pmu::NetworkCase ieee14() { return pmu::load_case(data("case14.m")); }
inline pmu::NetworkCase ieee57() { return pmu::load_case(data("case57.m")); }

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double ridge = 0.1) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return a * a.transpose() + ridge * Eigen::MatrixXd::Identity(n, n);
}

inline pmu::StatePrior random_prior(int n, std::mt19937_64& rng) {
  pmu::StatePrior p;
  std::normal_distribution<double> g;
  p.mean = Eigen::VectorXd(n);
  for (int i = 0; i < n; ++i) p.mean(i) = g(rng);
  p.covariance = random_spd(n, rng);
  return p;
}

// Synthetic observation with distinct (source, channel) labels.
inline pmu::LinearObservation random_obs(int rows, int cols, std::mt19937_64& rng, int source = 0,
                                         double availability = 1.0) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.1, 2.0);
  pmu::LinearObservation o;
  o.h = Eigen::MatrixXd(rows, cols);
  o.noise_var = Eigen::VectorXd(rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) o.h(r, c) = g(rng);
    o.noise_var(r) = u(rng);
    pmu::RowLabel l;
    l.source = source;
    l.channel = r;
    o.labels.push_back(l);
    o.availability.push_back(availability);
  }
  return o;
}

// Oracle: log det from eigenvalues.
inline double eigen_logdet(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  return eig.eigenvalues().array().log().sum();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// Default objective spec on a case: one nominal slot.
inline pmu::ObjectiveSpec nominal_spec(const pmu::NetworkCase& net, const pmu::SusceptanceModel& model) {
  pmu::ObjectiveSpec spec;
  spec.profile = pmu::nominal_profile(net, model);
  return spec;
}

inline std::vector<pmu::PmuCandidate> default_candidates(const pmu::NetworkCase& net,
                                                         const pmu::SusceptanceModel& model,
                                                         const pmu::ObjectiveSpec& spec,
                                                         pmu::CandidateOptions opts = {}) {
  const auto priors = pmu::build_priors(model, spec.profile);
  return pmu::enumerate_candidates(net, model, priors, opts);
}

}  // namespace fixture


namespace fixture {

// Kind of the pmu::Error thrown by fn, or nullopt when nothing is thrown.
template <typename Fn>
std::optional<pmu::ErrorKind> error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const pmu::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace fixture
