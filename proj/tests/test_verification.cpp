#include <doctest.h>

#include <random>
#include <set>

#include "pmuplace/verification.hpp"
#include "support.hpp"

using namespace pmu;
using fixture::error_kind;

TEST_CASE("cover instance: empty selection and disjoint full cover") {
  const auto p = build_cover_instance(6, {{1, 2}, {3}, {4, 5, 6}}, 2.0, 0.5);
  CHECK(p.mi({}) == 0.0);
  const double c = 0.5 * std::log(1.0 + 2.0 / 0.5);
  CHECK(p.instance.unit_information() == doctest::Approx(c));
  CHECK(p.mi({0, 1, 2}) == doctest::Approx(6 * c));
  const auto rep = cover_equivalence_check(p, 3);
  CHECK(rep.subsets_checked == 8);
  CHECK(rep.greedy_match);
}

TEST_CASE("cover instance validation") {
  CHECK(error_kind([] { build_cover_instance(3, {{}}, 1.0, 1.0); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind([] { build_cover_instance(3, {{4}}, 1.0, 1.0); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind([] { build_cover_instance(3, {{1}}, 0.0, 1.0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("cover: argmax by MI equals brute-force max cover") {
  std::mt19937_64 rng(21);
  int compared = 0;
  for (int t = 0; t < 40; ++t) {
    std::vector<std::vector<int>> subsets(5);
    for (auto& s : subsets) {
      const int size = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int i = 0; i < size; ++i) s.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
    }
    const auto p = build_cover_instance(8, subsets, 1.0, 0.3);
    // brute-force cover counter over all pairs
    int best_cov = -1, ties = 0;
    std::pair<int, int> best_pair;
    double best_mi = -1.0;
    std::pair<int, int> mi_pair;
    for (int a = 0; a < 5; ++a) {
      for (int b = a + 1; b < 5; ++b) {
        std::set<int> u(subsets[a].begin(), subsets[a].end());
        u.insert(subsets[b].begin(), subsets[b].end());
        const int cov = static_cast<int>(u.size());
        if (cov > best_cov) {
          best_cov = cov;
          best_pair = {a, b};
          ties = 0;
        } else if (cov == best_cov) {
          ++ties;
        }
        const double mi = p.mi({a, b});
        if (mi > best_mi) {
          best_mi = mi;
          mi_pair = {a, b};
        }
      }
    }
    if (ties == 0) {
      CHECK(mi_pair == best_pair);
      ++compared;
    }
  }
  CHECK(compared > 5);
}

TEST_CASE("cover: overlapping subsets pass, duplicating form is caught") {
  const std::vector<std::vector<int>> subsets{{1, 2, 3}, {3, 4}, {4, 5, 6}, {1, 6}, {7}};
  const auto rep = cover_equivalence_check(build_cover_instance(8, subsets, 1.0, 0.5), 3);
  CHECK(rep.max_relative_error < 1e-9);
  CHECK(rep.greedy_match);
  CHECK(rep.coverage_by_mi == 7);
  const auto dup = build_cover_instance(8, subsets, 1.0, 0.5, true);
  CHECK(error_kind([&] { cover_equivalence_check(dup, 3); }) == ErrorKind::EquivalenceViolation);
}

TEST_CASE("MMSE Monte Carlo: no observation recovers the prior") {
  std::mt19937_64 rng(22);
  const auto prior = fixture::random_prior(3, rng);
  const auto rep = mmse_monte_carlo(prior, LinearObservation::empty(3), 20000, 1);
  CHECK(std::abs(rep.logdet - fixture::eigen_logdet(prior.covariance)) <= 3.0 * rep.std_error);
  CHECK(rep.ci_low < rep.logdet);
  CHECK(rep.ci_high > rep.logdet);
}

TEST_CASE("MMSE Monte Carlo: scalar posterior") {
  StatePrior prior{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 0};
  LinearObservation obs;
  obs.h = Eigen::MatrixXd::Identity(1, 1);
  obs.noise_var = Eigen::VectorXd::Ones(1);
  obs.labels.resize(1);
  obs.availability = {1.0};
  const auto rep = mmse_monte_carlo(prior, obs, 100000, 2);
  CHECK(std::abs(rep.logdet - std::log(0.5)) <= 3.0 * rep.std_error);
  CHECK(rep.error_covariance(0, 0) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("MMSE Monte Carlo: 3-bus path against the analytic posterior") {
  const auto net = fixture::path3();
  const auto m = build_susceptance(net);
  const auto prior = build_prior(m, nominal_profile(net, m).slots[0]);
  const auto cands = fixture::default_candidates(net, m, fixture::nominal_spec(net, m));
  const auto obs = candidate_observation(cands[2], m);
  const double analytic = logdet_psd(posterior_cov(prior, obs), 0.0);
  const auto rep = mmse_monte_carlo(prior, obs, 50000, 3);
  CHECK(std::abs(rep.logdet - analytic) <= 3.0 * rep.std_error);
  // determinism
  CHECK(mmse_monte_carlo(prior, obs, 2000, 3).logdet == mmse_monte_carlo(prior, obs, 2000, 3).logdet);
  CHECK(error_kind([&] { mmse_monte_carlo(prior, obs, 10, 3); }) == ErrorKind::DegenerateSampleCovariance);
}

TEST_CASE("submodularity probe") {
  const auto net = fixture::ieee14();
  const auto m = build_susceptance(net);
  auto spec = fixture::nominal_spec(net, m);
  const auto cands = fixture::default_candidates(net, m, spec);
  ProbeOptions opts;
  opts.trials = 300;
  opts.max_uncertain_rows = 12;
  const Objective f1(m, spec, cands);
  auto rep = submodularity_probe(f1, opts);
  CHECK(rep.trials == 300);
  CHECK(rep.ok());
  CHECK(rep.example.empty());

  spec.mode = ObjectiveMode::Conditional;
  spec.conventional = full_conventional_plan(net, MeasurementDefaults{}.conv_noise_var());
  CHECK(submodularity_probe(Objective(m, spec, cands), opts).ok());

  opts.negate = true;
  rep = submodularity_probe(f1, opts);
  CHECK(rep.monotonicity_violations > 0);
  CHECK_FALSE(rep.example.empty());
}

TEST_CASE("D-optimality on small random networks") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto net = random_case(4 + static_cast<int>(seed % 3), 2, seed);
    const auto m = build_susceptance(net);
    const auto spec = fixture::nominal_spec(net, m);
    const Objective obj(m, spec, fixture::default_candidates(net, m, spec));
    for (int k = 1; k <= 3; ++k) {
      const auto rep = d_optimality_check(m, obj, k);
      CHECK(rep.equal);
      CHECK_FALSE(rep.argmax_mi.empty());
    }
  }
}

TEST_CASE("random cases are connected and reproducible") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = random_case(8, 3, seed);
    const auto b = random_case(8, 3, seed);
    CHECK(a.branches.size() == 10);
    CHECK(a.branches.size() == b.branches.size());
    CHECK(a.buses[3].injection_mean == b.buses[3].injection_mean);
    CHECK_NOTHROW(build_susceptance(a));
  }
}
