#include "pmuplace/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include "pmuplace/error.hpp"

namespace pmu {

namespace {

// Candidate indices sorted by id, so index order is the tie-break order.
std::vector<int> id_order(const Objective& obj) {
  std::vector<int> idx(obj.num_candidates());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return obj.candidates()[a].candidate_id < obj.candidates()[b].candidate_id;
  });
  return idx;
}

int clamp_budget(const Objective& obj, int k) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "budget must be non-negative");
  return std::min(k, obj.num_candidates());
}

double slack(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

}  // namespace

const char* to_string(Solver s) {
  switch (s) {
    case Solver::Greedy: return "greedy";
    case Solver::LazyGreedy: return "lazy_greedy";
    case Solver::Exhaustive: return "exhaustive";
  }
  return "?";
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return std::round(c);
}

PlacementResult greedy_place(const Objective& obj, int k) {
  PlacementResult res;
  res.solver = Solver::Greedy;
  res.budget = k;
  k = clamp_budget(obj, k);
  const auto ids = id_order(obj);
  std::vector<bool> taken(obj.num_candidates(), false);
  auto state = obj.initial_state();
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double best_gain = 0.0;
    for (int c : ids) {
      if (taken[c]) continue;
      const double g = obj.gain(state, c);
      ++res.evaluations;
      if (best < 0 || g > best_gain) {
        best = c;
        best_gain = g;
      }
    }
    obj.extend(state, best);
    taken[best] = true;
    res.order.push_back(obj.candidates()[best].candidate_id);
    res.marginals.push_back(best_gain);
    res.values.push_back(obj.value(state.selection()));
  }
  return res;
}

PlacementResult lazy_greedy_place(const Objective& obj, int k) {
  PlacementResult res;
  res.solver = Solver::LazyGreedy;
  res.budget = k;
  k = clamp_budget(obj, k);
  const auto ids = id_order(obj);
  std::vector<int> rank(obj.num_candidates());
  for (int i = 0; i < static_cast<int>(ids.size()); ++i) rank[ids[i]] = i;
  std::vector<double> bound(obj.num_candidates(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(obj.num_candidates(), false);
  auto state = obj.initial_state();

  for (int step = 0; step < k; ++step) {
    // Stale bounds, largest first, ties by id.
    auto worse = [&](int a, int b) {
      if (bound[a] != bound[b]) return bound[a] < bound[b];
      return rank[a] > rank[b];
    };
    std::priority_queue<int, std::vector<int>, decltype(worse)> queue(worse);
    for (int c : ids) {
      if (!taken[c]) queue.push(c);
    }
    int best = -1;
    double best_gain = 0.0;
    while (!queue.empty()) {
      const int c = queue.top();
      // A stale bound below the best fresh gain cannot win or tie; the slack
      // absorbs rounding in the bound.
      if (best >= 0 && bound[c] + slack(best_gain) < best_gain) break;
      queue.pop();
      const double g = obj.gain(state, c);
      ++res.evaluations;
      bound[c] = g;
      if (best < 0 || g > best_gain || (g == best_gain && rank[c] < rank[best])) {
        best = c;
        best_gain = g;
      }
    }
    obj.extend(state, best);
    taken[best] = true;
    res.order.push_back(obj.candidates()[best].candidate_id);
    res.marginals.push_back(best_gain);
    res.values.push_back(obj.value(state.selection()));
  }
  return res;
}

PlacementResult exhaustive_place(const Objective& obj, int k, const ExhaustiveOptions& opts) {
  PlacementResult res;
  res.solver = Solver::Exhaustive;
  res.budget = k;
  k = clamp_budget(obj, k);
  const int n = obj.num_candidates();
  const double total = binomial(n, k);
  if (total > opts.max_combinations) {
    throw Error(ErrorKind::SearchSpaceTooLarge,
                "C(" + std::to_string(n) + "," + std::to_string(k) + ") = " + std::to_string(total) +
                    " subsets exceeds the cap of " + std::to_string(opts.max_combinations));
  }
  if (k == 0) return res;
  const auto ids = id_order(obj);

  // Walks every k-combination of positions in `ids`, lexicographically.
  auto for_each_combination = [&](auto&& fn) {
    std::vector<int> pos(k);
    std::iota(pos.begin(), pos.end(), 0);
    std::vector<int> sel(k);
    while (true) {
      for (int i = 0; i < k; ++i) sel[i] = ids[pos[i]];
      fn(sel, pos);
      int i = k - 1;
      while (i >= 0 && pos[i] == n - k + i) --i;
      if (i < 0) break;
      ++pos[i];
      for (int j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
    }
  };

  auto too_many_patterns = [&](const std::vector<int>& sel) {
    return obj.spec().info.failure_mode == FailureMode::Exact &&
           (std::size_t{1} << std::min(obj.uncertain_rows(sel), 62)) > obj.spec().info.pattern_cap;
  };
  std::vector<int> best_pos;
  double best = -std::numeric_limits<double>::infinity();
  std::set<std::vector<int>> done;
  std::size_t exact = 0;
  auto consider = [&](const std::vector<int>& sel, const std::vector<int>& pos) {
    if (!done.insert(pos).second) return;
    const double v = obj.value(sel);
    ++exact;
    ++res.evaluations;
    if (opts.progress && opts.progress_every > 0 && exact % opts.progress_every == 0) {
      opts.progress(exact, static_cast<std::size_t>(total));
    }
    if (v > best || (v == best && pos < best_pos)) {
      best = v;
      best_pos = pos;
    }
  };

  // Pass 1: a few subsets with the largest bounds give a strong incumbent.
  constexpr std::size_t kSeeds = 16;
  using Scored = std::pair<double, std::vector<int>>;
  auto cmp = [](const Scored& a, const Scored& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::priority_queue<Scored, std::vector<Scored>, decltype(cmp)> top(cmp);
  for_each_combination([&](const std::vector<int>& sel, const std::vector<int>& pos) {
    const double ub = obj.no_failure_value(sel);
    ++res.evaluations;
    top.push({ub, pos});
    if (top.size() > kSeeds) top.pop();
  });
  std::vector<Scored> seeds;
  while (!top.empty()) {
    seeds.push_back(top.top());
    top.pop();
  }
  std::reverse(seeds.begin(), seeds.end());
  for (const auto& [ub, pos] : seeds) {
    std::vector<int> sel(k);
    for (int i = 0; i < k; ++i) sel[i] = ids[pos[i]];
    if (!too_many_patterns(sel)) consider(sel, pos);
  }

  // Pass 2: anything whose bound reaches the incumbent is evaluated.
  for_each_combination([&](const std::vector<int>& sel, const std::vector<int>& pos) {
    if (done.count(pos)) return;
    const double ub = obj.no_failure_value(sel);
    ++res.evaluations;
    if (ub < best - slack(best)) return;
    if (too_many_patterns(sel)) {
      // Too many patterns to evaluate; a tighter bound usually settles it.
      if (obj.capped_upper_bound(sel) < best - slack(best)) return;
    }
    consider(sel, pos);
  });

  std::vector<int> chosen;
  for (int p : best_pos) chosen.push_back(ids[p]);
  double prev = 0.0;
  for (int i = 0; i < k; ++i) {
    const double v =
        i + 1 == k ? best : obj.value(std::span<const int>(chosen.data(), static_cast<std::size_t>(i + 1)));
    res.order.push_back(obj.candidates()[chosen[i]].candidate_id);
    res.values.push_back(v);
    res.marginals.push_back(v - prev);
    prev = v;
  }
  return res;
}

PlacementResult greedy_place(const SusceptanceModel& model, const ObjectiveSpec& spec,
                             std::vector<PmuCandidate> cands, int k) {
  return greedy_place(Objective(model, spec, std::move(cands)), k);
}

PlacementResult lazy_greedy_place(const SusceptanceModel& model, const ObjectiveSpec& spec,
                                  std::vector<PmuCandidate> cands, int k) {
  return lazy_greedy_place(Objective(model, spec, std::move(cands)), k);
}

PlacementResult exhaustive_place(const SusceptanceModel& model, const ObjectiveSpec& spec,
                                 std::vector<PmuCandidate> cands, int k, const ExhaustiveOptions& opts) {
  return exhaustive_place(Objective(model, spec, std::move(cands)), k, opts);
}

bool ApproximationReport::ok() const {
  return std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.below_bound; });
}

ApproximationReport approximation_report(const PlacementResult& greedy,
                                         std::span<const PlacementResult> optimal) {
  ApproximationReport rep;
  for (const auto& opt : optimal) {
    const int k = static_cast<int>(opt.order.size());
    ApproximationEntry e;
    e.k = k;
    e.optimal = opt.value();
    if (k > static_cast<int>(greedy.values.size())) {
      throw Error(ErrorKind::InvalidArgument, "greedy run is shorter than budget " + std::to_string(k));
    }
    e.greedy = k == 0 ? 0.0 : greedy.values[k - 1];
    e.ratio = e.optimal > 0.0 ? e.greedy / e.optimal : 1.0;
    e.below_bound = e.ratio < kGreedyBound;
    rep.min_ratio = std::min(rep.min_ratio, e.ratio);
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace pmu
