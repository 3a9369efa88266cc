#include "pmuplace/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pmuplace/error.hpp"

namespace pmu {

namespace {

std::string set_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

double standard_normal(std::uint64_t seed, std::uint64_t sample, std::int64_t slot) {
  const double u1 = 1.0 - counter_uniform(seed, sample, slot, 0);  // (0, 1]
  const double u2 = counter_uniform(seed, sample, slot, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

bool within(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

template <typename Fn>
void for_each_subset(int n, int k, Fn&& fn) {
  if (k > n) return;
  std::vector<int> s(k);
  std::iota(s.begin(), s.end(), 0);
  while (true) {
    fn(s);
    int i = k - 1;
    while (i >= 0 && s[i] == n - k + i) --i;
    if (i < 0) return;
    ++s[i];
    for (int j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
  }
}

// Greedy over subset indices, ties (within tolerance) to the lowest index.
template <typename Fn>
std::vector<int> greedy_indices(int n, int k, Fn&& value) {
  std::vector<int> sel;
  std::vector<bool> used(n, false);
  for (int step = 0; step < std::min(k, n); ++step) {
    int best = -1;
    double best_v = 0.0;
    for (int m = 0; m < n; ++m) {
      if (used[m]) continue;
      auto trial = sel;
      trial.push_back(m);
      const double v = value(trial);
      if (best < 0 || v > best_v + 1e-9 * std::max(1.0, std::abs(best_v))) {
        best = m;
        best_v = v;
      }
    }
    used[best] = true;
    sel.push_back(best);
  }
  return sel;
}

}  // namespace

double CoverInstance::unit_information() const { return 0.5 * std::log1p(gamma / kappa); }

int CoverInstance::coverage(const std::vector<int>& selection) const {
  std::set<int> covered;
  for (int m : selection) covered.insert(subsets[m].begin(), subsets[m].end());
  return static_cast<int>(covered.size());
}

LinearObservation CoverProblem::observation(const std::vector<int>& selection) const {
  const int n = instance.universe_size;
  std::vector<std::pair<int, int>> rows;  // (subset, element)
  if (instance.duplicating) {
    for (int m : selection)
      for (int e : instance.subsets[m]) rows.emplace_back(m, e);
  } else {
    std::map<int, int> first;  // element -> subset that first covers it
    for (int m : selection)
      for (int e : instance.subsets[m]) first.emplace(e, m);
    for (const auto& [e, m] : first) rows.emplace_back(m, e);
  }
  LinearObservation obs;
  obs.h = Eigen::MatrixXd::Zero(static_cast<int>(rows.size()), n);
  obs.noise_var = Eigen::VectorXd::Constant(static_cast<int>(rows.size()), instance.kappa);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    obs.h(static_cast<int>(r), rows[r].second - 1) = 1.0;
    RowLabel label;
    label.kind = RowLabel::Kind::Synthetic;
    label.source = rows[r].first;
    label.channel = rows[r].second;
    label.bus = rows[r].second;
    obs.labels.push_back(label);
    obs.availability.push_back(1.0);
  }
  return obs;
}

double CoverProblem::mi(const std::vector<int>& selection) const {
  return gaussian_mi(prior, observation(selection), info);
}

CoverProblem build_cover_instance(int universe_size, std::vector<std::vector<int>> subsets,
                                  double gamma, double kappa, bool duplicating) {
  if (universe_size < 1) throw Error(ErrorKind::InvalidArgument, "universe must be nonempty");
  if (!(gamma > 0.0) || !(kappa > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma and kappa must be positive");
  for (auto& s : subsets) {
    if (s.empty()) throw Error(ErrorKind::InvalidArgument, "cover subsets must be nonempty");
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.front() < 1 || s.back() > universe_size) {
      throw Error(ErrorKind::InvalidArgument, "cover element outside 1.." + std::to_string(universe_size));
    }
  }
  CoverProblem p;
  p.instance = {universe_size, std::move(subsets), gamma, kappa, duplicating};
  p.prior.mean = Eigen::VectorXd::Zero(universe_size);
  p.prior.covariance = gamma * Eigen::MatrixXd::Identity(universe_size, universe_size);
  p.info.jitter = 0.0;
  return p;
}

CoverReport cover_equivalence_check(const CoverProblem& problem, int k) {
  const auto& inst = problem.instance;
  const int m = static_cast<int>(inst.subsets.size());
  const double c = inst.unit_information();
  CoverReport rep;
  for (int size = 0; size <= std::min(k, m); ++size) {
    for_each_subset(m, size, [&](const std::vector<int>& s) {
      const double expect = c * inst.coverage(s);
      const double got = problem.mi(s);
      const double err = std::abs(got - expect) / std::max(expect, 1e-300);
      ++rep.subsets_checked;
      if (expect == 0.0 ? std::abs(got) > 1e-12 : err > 1e-9) {
        throw Error(ErrorKind::EquivalenceViolation,
                    "S=" + set_str(s) + ": MI " + std::to_string(got) + " vs c*|cover| " + std::to_string(expect));
      }
      if (expect > 0.0) rep.max_relative_error = std::max(rep.max_relative_error, err);
    });
  }
  rep.greedy_by_mi = greedy_indices(m, k, [&](const std::vector<int>& s) { return problem.mi(s); });
  rep.greedy_by_coverage =
      greedy_indices(m, k, [&](const std::vector<int>& s) { return static_cast<double>(inst.coverage(s)); });
  rep.coverage_by_mi = inst.coverage(rep.greedy_by_mi);
  rep.coverage_by_coverage = inst.coverage(rep.greedy_by_coverage);
  rep.greedy_match = rep.coverage_by_mi == rep.coverage_by_coverage;
  return rep;
}

MmseReport mmse_monte_carlo(const StatePrior& prior, const LinearObservation& obs,
                            std::size_t samples, std::uint64_t seed) {
  const int d = prior.dim();
  if (obs.cols() != d) throw Error(ErrorKind::InvalidArgument, "observation and prior dimensions differ");
  if (samples < std::max<std::size_t>(1000, 10 * static_cast<std::size_t>(d))) {
    throw Error(ErrorKind::DegenerateSampleCovariance,
                std::to_string(samples) + " samples are too few for dimension " + std::to_string(d));
  }
  const int r = obs.rows();
  const Eigen::MatrixXd root = matrix_sqrt(prior.covariance);
  Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(d, r);
  if (r > 0) {
    Eigen::MatrixXd s = obs.h * prior.covariance * obs.h.transpose();
    s.diagonal() += obs.noise_var;
    gain = Eigen::LLT<Eigen::MatrixXd>(s).solve(obs.h * prior.covariance).transpose();
  }
  const Eigen::VectorXd noise_sd = obs.noise_var.cwiseSqrt();

  const auto n = static_cast<Eigen::Index>(samples);
  Eigen::MatrixXd err(d, n);
  Eigen::VectorXd xi(d), e(r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) xi(j) = standard_normal(seed, i, j);
    for (int j = 0; j < r; ++j) e(j) = noise_sd(j) * standard_normal(seed, i, d + j);
    const Eigen::VectorXd theta = prior.mean + root * xi;
    const Eigen::VectorXd z = obs.h * theta + e;
    const Eigen::VectorXd est = prior.mean + gain * (z - obs.h * prior.mean);
    err.col(i) = theta - est;
  }

  auto logdet_of = [&](const Eigen::VectorXd& weights, Eigen::MatrixXd* out) {
    const double w = weights.sum();
    const Eigen::VectorXd mean = err * weights / w;
    Eigen::MatrixXd cov = err * weights.asDiagonal() * err.transpose();
    cov = (cov - w * mean * mean.transpose()) / (w - 1.0);
    cov = 0.5 * (cov + cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorKind::DegenerateSampleCovariance, "empirical error covariance is singular");
    }
    if (out) *out = cov;
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  };

  MmseReport rep;
  rep.samples = samples;
  rep.logdet = logdet_of(Eigen::VectorXd::Ones(n), &rep.error_covariance);

  std::vector<double> boot;
  Eigen::VectorXd counts(n);
  for (int b = 0; b < kBootstrapResamples; ++b) {
    counts.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto pick = static_cast<Eigen::Index>(counter_uniform(seed ^ 0xb0075742ULL, b, i, 2) * n);
      counts(std::min(pick, n - 1)) += 1.0;
    }
    boot.push_back(logdet_of(counts, nullptr));
  }
  const double mean = std::accumulate(boot.begin(), boot.end(), 0.0) / boot.size();
  double ss = 0.0;
  for (double v : boot) ss += (v - mean) * (v - mean);
  rep.std_error = std::sqrt(ss / (boot.size() - 1));
  std::sort(boot.begin(), boot.end());
  rep.ci_low = boot[static_cast<std::size_t>(0.025 * (boot.size() - 1))];
  rep.ci_high = boot[static_cast<std::size_t>(std::ceil(0.975 * (boot.size() - 1)))];
  return rep;
}

ProbeReport submodularity_probe(const Objective& obj, const ProbeOptions& opts) {
  ProbeReport rep;
  const int n = obj.num_candidates();
  if (n < 1) return rep;
  std::mt19937_64 rng(opts.seed);
  std::vector<int> perm(n);
  const double sign = opts.negate ? -1.0 : 1.0;
  auto f = [&](const std::vector<int>& s) { return sign * obj.value(s); };
  for (std::size_t t = 0; t < opts.trials; ++t) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int a = std::uniform_int_distribution<int>(0, b)(rng);
    const int s = perm[b];
    if (opts.max_uncertain_rows) {
      while (b > 0) {
        std::vector<int> bs(perm.begin(), perm.begin() + b);
        bs.push_back(s);
        if (obj.uncertain_rows(bs) <= *opts.max_uncertain_rows) break;
        --b;
      }
      a = std::min(a, b);
    }
    std::vector<int> set_a(perm.begin(), perm.begin() + a);
    std::vector<int> set_b(perm.begin(), perm.begin() + b);
    auto a_s = set_a;
    a_s.push_back(s);
    auto b_s = set_b;
    b_s.push_back(s);
    const double gain_a = f(a_s) - f(set_a);
    const double gain_b = f(b_s) - f(set_b);
    ++rep.trials;
    const double excess = gain_b - gain_a;
    rep.worst_submodularity = t == 0 ? excess : std::max(rep.worst_submodularity, excess);
    rep.worst_monotonicity = t == 0 ? gain_b : std::min(rep.worst_monotonicity, gain_b);
    const bool sub_bad = excess > opts.submodular_tol;
    const bool mono_bad = gain_b < -opts.monotone_tol;
    rep.submodularity_violations += sub_bad;
    rep.monotonicity_violations += mono_bad;
    if ((sub_bad || mono_bad) && rep.example.empty()) {
      auto ids = [&](const std::vector<int>& v) {
        std::vector<int> out;
        for (int i : v) out.push_back(obj.candidates()[i].candidate_id);
        std::sort(out.begin(), out.end());
        return set_str(out);
      };
      std::ostringstream os;
      os << "A=" << ids(set_a) << " B=" << ids(set_b) << " s=" << obj.candidates()[s].candidate_id
         << " gain(A)=" << gain_a << " gain(B)=" << gain_b;
      rep.example = os.str();
    }
  }
  return rep;
}

DOptimalityReport d_optimality_check(const SusceptanceModel& model, const Objective& obj, int k) {
  DOptimalityReport rep;
  rep.k = k;
  const auto& cands = obj.candidates();
  const int n = obj.num_candidates();
  std::vector<std::pair<double, std::vector<int>>> by_mi, by_logdet;
  for_each_subset(n, std::min(k, n), [&](const std::vector<int>& sel) {
    std::vector<PmuCandidate> chosen;
    std::vector<int> ids;
    for (int i : sel) {
      chosen.push_back(cands[i]);
      ids.push_back(cands[i].candidate_id);
    }
    std::sort(ids.begin(), ids.end());
    by_mi.emplace_back(obj.value(sel), ids);

    const LinearObservation all = stack_candidates(chosen, model);
    std::map<std::pair<int, int>, int> flag_of;  // (candidate id, channel) -> flag index
    int offset = 0;
    for (const auto& c : chosen) {
      for (int ch = 0; ch < c.num_channels(); ++ch) flag_of[{c.candidate_id, ch}] = offset + ch;
      offset += c.num_channels();
    }
    double expected = 0.0;
    for (const auto& pattern : failure_patterns(chosen)) {
      std::vector<int> rows;
      for (int r = 0; r < all.rows(); ++r) {
        if (pattern.alive[flag_of.at({all.labels[r].source, all.labels[r].channel})]) rows.push_back(r);
      }
      const LinearObservation alive = all.select_rows(rows);
      double slot_sum = 0.0;
      for (const auto& base : obj.base_covariances()) {
        StatePrior p;
        p.mean = Eigen::VectorXd::Zero(base.rows());
        p.covariance = base;
        slot_sum += logdet_psd(posterior_cov(p, alive), 0.0);
      }
      expected += pattern.probability * slot_sum / obj.base_covariances().size();
    }
    by_logdet.emplace_back(-expected, ids);
  });
  auto winners = [](std::vector<std::pair<double, std::vector<int>>>& v) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [score, ids] : v) best = std::max(best, score);
    std::vector<std::vector<int>> out;
    for (const auto& [score, ids] : v) {
      if (within(score, best)) out.push_back(ids);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  rep.argmax_mi = winners(by_mi);
  rep.argmin_logdet = winners(by_logdet);
  rep.equal = rep.argmax_mi == rep.argmin_logdet;
  return rep;
}

NetworkCase random_case(int buses, int extra_branches, std::uint64_t seed) {
  if (buses < 2) throw Error(ErrorKind::InvalidArgument, "random case needs at least two buses");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> reactance(0.05, 0.5), injection(-1.0, 1.0);
  NetworkCase net;
  net.slack_bus = 1;
  for (int i = 1; i <= buses; ++i) {
    const double mean = injection(rng);
    net.buses.push_back({i, mean, std::max(0.1 * std::abs(mean), 0.02)});
  }
  for (int i = 2; i <= buses; ++i) {
    const int parent = std::uniform_int_distribution<int>(1, i - 1)(rng);
    net.branches.push_back({parent, i, reactance(rng)});
  }
  const int max_extra = buses * (buses - 1) / 2 - (buses - 1);
  for (int added = 0, tries = 0; added < std::min(extra_branches, max_extra) && tries < 1000; ++tries) {
    const int a = std::uniform_int_distribution<int>(1, buses)(rng);
    const int b = std::uniform_int_distribution<int>(1, buses)(rng);
    if (a == b || net.has_branch(a, b)) continue;
    net.branches.push_back({std::min(a, b), std::max(a, b), reactance(rng)});
    ++added;
  }
  return net;
}

}  // namespace pmu
