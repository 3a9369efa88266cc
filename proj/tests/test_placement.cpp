#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pmuplace/placement.hpp"
#include "pmuplace/verification.hpp"
#include "support.hpp"

using namespace pmu;
using fixture::error_kind;

namespace {

struct Ieee14 {
  NetworkCase net = fixture::ieee14();
  SusceptanceModel model = build_susceptance(net);
  ObjectiveSpec spec = fixture::nominal_spec(net, model);
  std::vector<PmuCandidate> cands = fixture::default_candidates(net, model, spec);
};

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

void check_result_invariants(const PlacementResult& r, bool greedy) {
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const double prev = i == 0 ? 0.0 : r.values[i - 1];
    CHECK(r.values[i] >= prev - 1e-12);
    CHECK(std::abs(r.values[i] - prev - r.marginals[i]) < 1e-10);
    if (greedy && i > 0) CHECK(r.marginals[i] <= r.marginals[i - 1] + 1e-9);
  }
  auto ids = sorted(r.order);
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

// Oracle: evaluate every k-subset, keep the best (lexicographic on ties).
std::vector<int> brute_best(const Objective& obj, int k) {
  const int n = obj.num_candidates();
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + k, true);
  double best = -1.0;
  std::vector<int> best_ids;
  do {
    std::vector<int> sel, ids;
    for (int i = 0; i < n; ++i) {
      if (pick[i]) {
        sel.push_back(i);
        ids.push_back(obj.candidates()[i].candidate_id);
      }
    }
    std::sort(ids.begin(), ids.end());
    const double v = obj.value(sel);
    if (v > best + 1e-12 || (std::abs(v - best) <= 1e-12 && ids < best_ids)) {
      best = v;
      best_ids = ids;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best_ids;
}

Objective no_fail_objective(const Ieee14& c) {
  auto sure = c.cands;
  for (auto& cand : sure) {
    cand.voltage_availability = 1.0;
    for (auto& a : cand.channel_availabilities) a = 1.0;
  }
  return Objective(c.model, c.spec, sure);
}

}  // namespace

TEST_CASE("14-bus greedy order") {
  Ieee14 c;
  const Objective obj(c.model, c.spec, c.cands);
  const auto r = greedy_place(obj, 4);
  CHECK(r.order == std::vector<int>{4, 13, 9, 6});
  CHECK(r.budget == 4);
  CHECK(r.solver == Solver::Greedy);
  check_result_invariants(r, true);
  // prefix property
  for (int k = 0; k < 4; ++k) {
    const auto shorter = greedy_place(obj, k);
    CHECK(shorter.order == std::vector<int>(r.order.begin(), r.order.begin() + k));
    CHECK(shorter.values == std::vector<double>(r.values.begin(), r.values.begin() + k));
  }
  CHECK(greedy_place(obj, 0).order.empty());
  CHECK(greedy_place(obj, 0).value() == 0.0);
  // every PMU at once is beyond exact failure enumeration; check the clamp without failures
  const Objective no_fail = no_fail_objective(c);
  CHECK(greedy_place(no_fail, 40).order.size() == 14);
  CHECK(error_kind([&] { greedy_place(obj, 14); }) == ErrorKind::PatternExplosion);
  CHECK(error_kind([&] { greedy_place(obj, -1); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("14-bus exhaustive optima") {
  Ieee14 c;
  const Objective obj(c.model, c.spec, c.cands);
  CHECK(exhaustive_place(obj, 1).order == std::vector<int>{4});
  CHECK(exhaustive_place(obj, 2).order == std::vector<int>{4, 13});
  const auto k3 = exhaustive_place(obj, 3);
  CHECK(k3.order == std::vector<int>{4, 6, 9});
  check_result_invariants(k3, false);
  CHECK(exhaustive_place(no_fail_objective(c), 14).order.size() == 14);
  CHECK(exhaustive_place(obj, 0).order.empty());
  ExhaustiveOptions small;
  small.max_combinations = 1000;
  CHECK(error_kind([&] { exhaustive_place(obj, 4, small); }) == ErrorKind::SearchSpaceTooLarge);
}

TEST_CASE("exhaustive matches brute force on random small cases") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = random_case(6 + static_cast<int>(seed % 3), 3, seed);
    const auto m = build_susceptance(net);
    const auto spec = fixture::nominal_spec(net, m);
    const Objective obj(m, spec, fixture::default_candidates(net, m, spec));
    for (int k = 1; k <= 3; ++k) CHECK(exhaustive_place(obj, k).order == brute_best(obj, k));
  }
}

TEST_CASE("exhaustive tie-break prefers the smallest id set") {
  Ieee14 c;
  auto cands = c.cands;
  // Clone of bus 4 with a larger id: {4} and {40} tie.
  PmuCandidate clone = cands[3];
  clone.candidate_id = 40;
  cands.push_back(clone);
  const Objective obj(c.model, c.spec, cands);
  CHECK(exhaustive_place(obj, 1).order == std::vector<int>{4});
  // greedy ties go to the lowest id too
  CHECK(greedy_place(obj, 1).order == std::vector<int>{4});
  CHECK(lazy_greedy_place(obj, 1).order == std::vector<int>{4});
}

TEST_CASE("exhaustive progress callback") {
  Ieee14 c;
  const Objective obj(c.model, c.spec, c.cands);
  ExhaustiveOptions opts;
  opts.progress_every = 5;
  std::size_t calls = 0;
  opts.progress = [&](std::size_t done, std::size_t total) {
    ++calls;
    CHECK(done % 5 == 0);
    CHECK(total == 364);
  };
  const auto r = exhaustive_place(obj, 3, opts);
  CHECK(calls > 0);
}

TEST_CASE("lazy greedy equals naive greedy") {
  Ieee14 c;
  for (auto mode : {FailureMode::Exact, FailureMode::MonteCarlo}) {
    auto spec = c.spec;
    spec.info.failure_mode = mode;
    spec.info.mc_samples = 400;
    const Objective obj(c.model, spec, c.cands);
    const auto naive = greedy_place(obj, 4);
    const auto lazy = lazy_greedy_place(obj, 4);
    CHECK(lazy.order == naive.order);
    CHECK(lazy.values == naive.values);
    CHECK(lazy.marginals == naive.marginals);
    CHECK(lazy.evaluations <= naive.evaluations);
    CHECK(lazy.solver == Solver::LazyGreedy);
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = random_case(8, 4, seed);
    const auto m = build_susceptance(net);
    auto spec = fixture::nominal_spec(net, m);
    spec.info.failure_mode = FailureMode::MonteCarlo;
    spec.info.mc_samples = 200;
    spec.info.seed = seed;
    const Objective obj(m, spec, fixture::default_candidates(net, m, spec));
    const auto naive = greedy_place(obj, 8);
    const auto lazy = lazy_greedy_place(obj, 8);
    CHECK(lazy.order == naive.order);
    CHECK(lazy.values == naive.values);
  }
  std::vector<PmuCandidate> single{c.cands[6]};
  const Objective one(c.model, c.spec, single);
  CHECK(lazy_greedy_place(one, 3).order == std::vector<int>{7});
}

TEST_CASE("Monte Carlo greedy is deterministic for a seed") {
  Ieee14 c;
  auto spec = c.spec;
  spec.info.failure_mode = FailureMode::MonteCarlo;
  spec.info.mc_samples = 500;
  spec.info.seed = 11;
  const auto a = greedy_place(Objective(c.model, spec, c.cands), 5);
  const auto b = greedy_place(Objective(c.model, spec, c.cands), 5);
  CHECK(a.order == b.order);
  CHECK(a.values == b.values);
  check_result_invariants(a, true);
}

TEST_CASE("approximation report") {
  Ieee14 c;
  const Objective obj(c.model, c.spec, c.cands);
  const auto g = greedy_place(obj, 4);
  std::vector<PlacementResult> opt;
  for (int k = 1; k <= 4; ++k) opt.push_back(exhaustive_place(obj, k));
  const auto rep = approximation_report(g, opt);
  REQUIRE(rep.entries.size() == 4);
  CHECK(rep.ok());
  // K=3: greedy {4,9,13} against the optimum {4,6,9}, ratio about 0.989
  CHECK(rep.min_ratio >= 0.98);
  CHECK(rep.entries[0].ratio == doctest::Approx(1.0));

  // identical inputs
  std::vector<PlacementResult> same;
  for (int k = 1; k <= 4; ++k) {
    PlacementResult p = g;
    p.order.resize(k);
    p.values.resize(k);
    same.push_back(p);
  }
  for (const auto& e : approximation_report(g, same).entries) CHECK(e.ratio == 1.0);

  PlacementResult fake = opt[1];
  fake.values.back() *= 2.0;
  std::vector<PlacementResult> bad{fake};
  CHECK_FALSE(approximation_report(g, bad).ok());
}

TEST_CASE("binomial") {
  CHECK(binomial(14, 4) == 1001.0);
  CHECK(binomial(57, 34) == doctest::Approx(std::exp(std::lgamma(58.0) - std::lgamma(35.0) - std::lgamma(24.0))));
  CHECK(binomial(3, 5) == 0.0);
}
