#include "pmuplace/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "pmuplace/error.hpp"

namespace pmu {

namespace {

constexpr std::size_t kStateBudgetDoubles = std::size_t{1} << 24;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, std::string(what) + " is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + " is not symmetric");
  }
}

// Rows scaled by 1/sqrt(noise variance), so the noise becomes identity.
Eigen::MatrixXd whitened(const LinearObservation& obs) {
  Eigen::MatrixXd w = obs.h;
  for (int r = 0; r < obs.rows(); ++r) {
    if (!(obs.noise_var(r) > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "row " + obs.labels[r].str() + " has non-positive noise variance");
    }
    w.row(r) /= std::sqrt(obs.noise_var(r));
  }
  return w;
}

void check_dims(const StatePrior& prior, const LinearObservation& obs) {
  if (obs.cols() != prior.dim()) {
    throw Error(ErrorKind::InvalidArgument, "observation has " + std::to_string(obs.cols()) +
                                                " columns, prior has " + std::to_string(prior.dim()) +
                                                " states");
  }
}

// Depth-first walk over the alive/dead choices of the uncertain rows. The
// Cholesky factor of the alive block grows one row per alive choice; row m
// of `lower_` is rewritten whenever the walk returns to depth m.
class PatternWalker {
 public:
  PatternWalker(const Eigen::MatrixXd& a, std::vector<int> uncertain, std::vector<double> prob)
      : a_(a), uncertain_(std::move(uncertain)), prob_(std::move(prob)),
        stride_(static_cast<int>(a.rows())),
        lower_(static_cast<std::size_t>(stride_) * stride_, 0.0), alive_(stride_, 0) {}

  // Appends row r to the factor at position m; returns log of the new pivot.
  double push(int r, int m) {
    double* row = &lower_[static_cast<std::size_t>(m) * stride_];
    double sq = 0.0;
    for (int i = 0; i < m; ++i) {
      const double* li = &lower_[static_cast<std::size_t>(i) * stride_];
      double s = a_(alive_[i], r);
      for (int j = 0; j < i; ++j) s -= li[j] * row[j];
      row[i] = s / li[i];
      sq += row[i] * row[i];
    }
    const double d = a_(r, r) - sq;
    if (!(d > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "pivot " + std::to_string(d));
    row[m] = std::sqrt(d);
    alive_[m] = r;
    return std::log(d);
  }

  double walk(std::size_t level, int m) {
    if (level == uncertain_.size()) return 0.0;
    const double p = prob_[level];
    const bool last = level + 1 == uncertain_.size();
    double up = push(uncertain_[level], m);
    if (!last) up += walk(level + 1, m + 1);
    const double down = last ? 0.0 : walk(level + 1, m);
    return p * up + (1.0 - p) * down;
  }

 private:
  const Eigen::MatrixXd& a_;
  std::vector<int> uncertain_;
  std::vector<double> prob_;
  int stride_;
  std::vector<double> lower_;
  std::vector<int> alive_;
};

double half_logdet_alive(const Eigen::MatrixXd& gram, const std::vector<int>& alive, double shift) {
  const int m = static_cast<int>(alive.size());
  if (m == 0) return 0.0;
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) a(i, j) = gram(alive[i], alive[j]);
    a(i, i) += 1.0 + shift;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "I + HPH^T");
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += std::log(l(i, i));
  return s;
}

double jitter_shift(const Eigen::MatrixXd& gram, double jitter) {
  if (jitter <= 0.0 || gram.rows() == 0) return 0.0;
  return jitter * (1.0 + gram.trace() / static_cast<double>(gram.rows()));
}

bool row_alive(double availability, std::uint64_t seed, std::uint64_t sample, const RowLabel& label) {
  if (availability >= 1.0) return true;
  if (availability <= 0.0) return false;
  return counter_uniform(seed, sample, label.source, label.channel) < availability;
}

void check_distinct_keys(const std::vector<RowLabel>& labels, const std::vector<double>& avail) {
  std::set<std::pair<int, int>> keys;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (avail[r] <= 0.0 || avail[r] >= 1.0) continue;
    if (!keys.insert({labels[r].source, labels[r].channel}).second) {
      throw Error(ErrorKind::InvalidArgument,
                  "Monte Carlo rows need distinct (source, channel) labels; duplicate " + labels[r].str());
    }
  }
}

}  // namespace

void InfoConfig::validate() const {
  if (!(quantization_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "quantization step must be positive");
  if (jitter < 0.0) throw Error(ErrorKind::InvalidArgument, "jitter must be non-negative");
  if (failure_mode == FailureMode::MonteCarlo && mc_samples < 1) {
    throw Error(ErrorKind::InvalidArgument, "Monte Carlo needs at least one sample");
  }
}

double counter_uniform(std::uint64_t seed, std::uint64_t sample, std::int64_t source,
                       std::int64_t channel) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ sample);
  h = splitmix64(h ^ static_cast<std::uint64_t>(source));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(channel) * 0xd1b54a32d192ed03ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double logdet_psd(const Eigen::MatrixXd& m, double jitter) {
  check_symmetric(m, "logdet argument");
  const auto n = m.rows();
  if (n == 0) return 0.0;
  Eigen::MatrixXd a = m;
  a.diagonal().array() += jitter * m.trace() / static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "matrix is not positive definite after jitter");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double gaussian_mi(const StatePrior& prior, const LinearObservation& obs, const InfoConfig& info) {
  check_dims(prior, obs);
  if (obs.rows() == 0) return 0.0;
  const Eigen::MatrixXd w = whitened(obs);
  Eigen::MatrixXd m = w * prior.covariance * w.transpose();
  m = 0.5 * (m + m.transpose());
  m.diagonal().array() += 1.0;
  return nats_to(0.5 * logdet_psd(m, info.jitter), info.unit);
}

Eigen::MatrixXd posterior_cov(const StatePrior& prior, const LinearObservation& obs) {
  check_dims(prior, obs);
  if (obs.rows() == 0) return prior.covariance;
  const Eigen::MatrixXd gain_t = prior.covariance * obs.h.transpose();  // Sigma H^T
  Eigen::MatrixXd s = obs.h * gain_t;
  s = 0.5 * (s + s.transpose());
  s.diagonal() += obs.noise_var;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "innovation covariance H Sigma H^T + R");
  }
  // Sigma H^T S^-1 H Sigma as X X^T with X = Sigma H^T L^-T.
  const Eigen::MatrixXd x = llt.matrixL().solve(gain_t.transpose()).transpose();
  Eigen::MatrixXd post = prior.covariance - x * x.transpose();
  return 0.5 * (post + post.transpose());
}

double conditional_mi(const StatePrior& prior, const LinearObservation& pmu_obs,
                      const LinearObservation& conv_obs, const InfoConfig& info) {
  StatePrior conditioned{prior.mean, posterior_cov(prior, conv_obs), prior.slot_index};
  return gaussian_mi(conditioned, pmu_obs, info);
}

double expected_half_logdet(const Eigen::MatrixXd& gram, std::span<const double> availability,
                            double jitter, std::size_t pattern_cap) {
  const int n = static_cast<int>(gram.rows());
  if (static_cast<int>(availability.size()) != n) {
    throw Error(ErrorKind::InvalidArgument, "availability size does not match the Gram matrix");
  }
  std::vector<int> certain, uncertain;
  std::vector<double> prob;
  for (int r = 0; r < n; ++r) {
    if (availability[r] >= 1.0) certain.push_back(r);
    else if (availability[r] > 0.0) {
      uncertain.push_back(r);
      prob.push_back(availability[r]);
    }
  }
  if (uncertain.size() >= 63 || (std::size_t{1} << uncertain.size()) > pattern_cap) {
    throw Error(ErrorKind::PatternExplosion,
                std::to_string(uncertain.size()) + " uncertain rows exceed the exact enumeration cap; "
                "use Monte Carlo failure mode");
  }
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += 1.0 + jitter_shift(gram, jitter);
  PatternWalker walker(a, uncertain, prob);
  double base = 0.0;
  int m = 0;
  for (int r : certain) base += walker.push(r, m++);
  return 0.5 * (base + walker.walk(0, m));
}

Estimate expected_mi(const StatePrior& prior, const LinearObservation& obs,
                     const LinearObservation* conv_obs, const InfoConfig& info) {
  info.validate();
  check_dims(prior, obs);
  const Eigen::MatrixXd cov =
      conv_obs && conv_obs->rows() > 0 ? posterior_cov(prior, *conv_obs) : prior.covariance;
  Estimate est;
  if (obs.rows() == 0) return est;
  const Eigen::MatrixXd w = whitened(obs);
  Eigen::MatrixXd gram = w * cov * w.transpose();
  gram = 0.5 * (gram + gram.transpose());
  if (info.failure_mode == FailureMode::Exact) {
    est.value = expected_half_logdet(gram, obs.availability, info.jitter, info.pattern_cap);
  } else {
    check_distinct_keys(obs.labels, obs.availability);
    const double shift = jitter_shift(gram, info.jitter);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<int> alive;
    for (std::size_t s = 0; s < info.mc_samples; ++s) {
      alive.clear();
      for (int r = 0; r < obs.rows(); ++r) {
        if (row_alive(obs.availability[r], info.seed, s, obs.labels[r])) alive.push_back(r);
      }
      const double v = half_logdet_alive(gram, alive, shift);
      sum += v;
      sum_sq += v * v;
    }
    const double n = static_cast<double>(info.mc_samples);
    est.value = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * est.value * est.value) / (n - 1)) : 0.0;
    est.std_error = std::sqrt(var / n);
  }
  est.value = nats_to(est.value, info.unit);
  est.std_error = nats_to(est.std_error, info.unit);
  return est;
}

Estimate expected_mi(const StatePrior& prior, std::span<const PmuCandidate> cands,
                     const SusceptanceModel& model, const std::optional<ConventionalPlan>& conv,
                     const InfoConfig& info) {
  const LinearObservation obs = stack_candidates(cands, model);
  if (conv) {
    const LinearObservation c = conventional_observation(*conv, model);
    return expected_mi(prior, obs, &c, info);
  }
  return expected_mi(prior, obs, nullptr, info);
}

void ObjectiveSpec::validate() const {
  info.validate();
  if (profile.slots.empty()) throw Error(ErrorKind::InvalidArgument, "injection profile has no slots");
  if (mode == ObjectiveMode::Conditional && !conventional) {
    throw Error(ErrorKind::InvalidArgument, "conditional objective requires a conventional plan");
  }
}

// ---------------------------------------------------------------------------

struct Objective::Impl {
  int num_states = 0;
  std::vector<StatePrior> priors;
  std::vector<Eigen::MatrixXd> base;  // per slot
  // All candidate rows, whitened, stacked in candidate order.
  Eigen::MatrixXd rows;
  std::vector<double> avail;
  std::vector<RowLabel> labels;
  std::vector<std::pair<int, int>> span;  // per candidate: first row, count
  // Sparse copy of each whitened row for cheap H P H^T.
  std::vector<std::vector<std::pair<int, double>>> sparse;
  std::vector<Eigen::MatrixXd> gram;  // per slot, rows x rows
  std::vector<double> shift;          // per slot jitter shift

  // Rows of the selection in candidate order, so a value never depends on
  // the order the selection was listed in.
  std::vector<int> gather(std::span<const int> selection) const {
    std::vector<int> sorted(selection.begin(), selection.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> out;
    for (int c : sorted) {
      for (int k = 0; k < span[c].second; ++k) out.push_back(span[c].first + k);
    }
    return out;
  }

  Eigen::MatrixXd sub_gram(int slot, const std::vector<int>& idx) const {
    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd g(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) g(i, j) = gram[slot](idx[i], idx[j]);
    return g;
  }

  // Whitened rows of one candidate measured against covariance p.
  Eigen::MatrixXd candidate_gram(int cand, const Eigen::MatrixXd& p) const {
    const auto [first, count] = span[cand];
    Eigen::MatrixXd g(count, count);
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j <= i; ++j) {
        double s = 0.0;
        for (const auto& [ci, vi] : sparse[first + i])
          for (const auto& [cj, vj] : sparse[first + j]) s += vi * p(ci, cj) * vj;
        g(i, j) = s;
        g(j, i) = s;
      }
    }
    return g;
  }

  // Conditions p on the listed rows of one candidate (offsets within it).
  // `shift` is the slot's jitter shift, so that conditioning and the
  // from-scratch log determinant regularize the same matrix.
  void condition(Eigen::MatrixXd& p, int cand, const std::vector<int>& local_rows, double shift) const {
    if (local_rows.empty()) return;
    const int k = static_cast<int>(local_rows.size());
    Eigen::MatrixXd h(k, num_states);
    for (int i = 0; i < k; ++i) h.row(i) = rows.row(span[cand].first + local_rows[i]);
    const Eigen::MatrixXd ph = p * h.transpose();
    Eigen::MatrixXd s = h * ph;
    s = 0.5 * (s + s.transpose());
    s.diagonal().array() += 1.0 + shift;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "posterior update");
    const Eigen::MatrixXd x = llt.matrixL().solve(ph.transpose()).transpose();
    p.noalias() -= x * x.transpose();
    p = 0.5 * (p + p.transpose());
  }
};

Objective::Objective(const SusceptanceModel& model, const ObjectiveSpec& spec,
                     std::vector<PmuCandidate> candidates)
    : candidates_(std::move(candidates)), spec_(spec), impl_(std::make_unique<Impl>()) {
  spec_.validate();
  std::set<int> ids;
  for (const auto& c : candidates_) {
    if (!ids.insert(c.candidate_id).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate candidate id " + std::to_string(c.candidate_id));
    }
  }
  Impl& im = *impl_;
  im.num_states = model.num_states();
  im.priors = build_priors(model, spec_.profile);

  std::optional<LinearObservation> conv;
  if (spec_.mode == ObjectiveMode::Conditional) conv = conventional_observation(*spec_.conventional, model);
  for (const auto& prior : im.priors) {
    im.base.push_back(conv && conv->rows() > 0 ? posterior_cov(prior, *conv) : prior.covariance);
  }

  LinearObservation all = LinearObservation::empty(im.num_states);
  for (const auto& c : candidates_) {
    LinearObservation o = candidate_observation(c, model);
    im.span.emplace_back(all.rows(), o.rows());
    all = all.append(o);
  }
  im.rows = whitened(all);
  im.avail = all.availability;
  im.labels = all.labels;
  for (int r = 0; r < im.rows.rows(); ++r) {
    std::vector<std::pair<int, double>> nz;
    for (int c = 0; c < im.num_states; ++c) {
      if (im.rows(r, c) != 0.0) nz.emplace_back(c, im.rows(r, c));
    }
    im.sparse.push_back(std::move(nz));
  }
  for (const auto& p : im.base) {
    Eigen::MatrixXd g = im.rows * p * im.rows.transpose();
    g = 0.5 * (g + g.transpose());
    im.shift.push_back(jitter_shift(g, spec_.info.jitter));
    im.gram.push_back(std::move(g));
  }
}

Objective::~Objective() = default;
Objective::Objective(Objective&&) noexcept = default;
Objective& Objective::operator=(Objective&&) noexcept = default;

int Objective::num_states() const { return impl_->num_states; }
const std::vector<StatePrior>& Objective::priors() const { return impl_->priors; }
const std::vector<Eigen::MatrixXd>& Objective::base_covariances() const { return impl_->base; }

int Objective::index_of(int candidate_id) const {
  for (int i = 0; i < num_candidates(); ++i) {
    if (candidates_[i].candidate_id == candidate_id) return i;
  }
  return -1;
}

Estimate Objective::estimate(std::span<const int> selection) const {
  const Impl& im = *impl_;
  const auto idx = im.gather(selection);
  Estimate est;
  if (idx.empty()) return est;
  std::vector<double> avail;
  for (int r : idx) avail.push_back(im.avail[r]);
  const int slots = static_cast<int>(im.gram.size());
  const InfoConfig& info = spec_.info;

  if (info.failure_mode == FailureMode::Exact) {
    double total = 0.0;
    for (int t = 0; t < slots; ++t) {
      Eigen::MatrixXd g = im.sub_gram(t, idx);
      // Shift chosen from the full Gram so the value does not depend on which
      // other rows happen to be selected.
      g.diagonal().array() += im.shift[t];
      total += expected_half_logdet(g, avail, 0.0, info.pattern_cap);
    }
    est.value = total / slots;
    return est;
  }

  std::vector<RowLabel> labels;
  for (int r : idx) labels.push_back(im.labels[r]);
  check_distinct_keys(labels, avail);
  std::vector<Eigen::MatrixXd> grams;
  for (int t = 0; t < slots; ++t) grams.push_back(im.sub_gram(t, idx));
  double sum = 0.0, sum_sq = 0.0;
  std::vector<int> alive;
  for (std::size_t s = 0; s < info.mc_samples; ++s) {
    alive.clear();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (row_alive(avail[r], info.seed, s, labels[r])) alive.push_back(static_cast<int>(r));
    }
    double v = 0.0;
    for (int t = 0; t < slots; ++t) v += half_logdet_alive(grams[t], alive, im.shift[t]);
    v /= slots;
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(info.mc_samples);
  est.value = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * est.value * est.value) / (n - 1)) : 0.0;
  est.std_error = std::sqrt(var / n);
  return est;
}

double Objective::no_failure_value(std::span<const int> selection) const {
  const Impl& im = *impl_;
  const auto idx = im.gather(selection);
  if (idx.empty()) return 0.0;
  std::vector<int> all(idx.size());
  std::iota(all.begin(), all.end(), 0);
  double total = 0.0;
  for (std::size_t t = 0; t < im.gram.size(); ++t) {
    total += half_logdet_alive(im.sub_gram(static_cast<int>(t), idx), all, im.shift[t]);
  }
  return total / static_cast<double>(im.gram.size());
}

int Objective::uncertain_rows(std::span<const int> selection) const {
  int n = 0;
  for (int r : impl_->gather(selection)) n += impl_->avail[r] > 0.0 && impl_->avail[r] < 1.0;
  return n;
}

double Objective::capped_upper_bound(std::span<const int> selection) const {
  const Impl& im = *impl_;
  const auto idx = im.gather(selection);
  if (spec_.info.failure_mode != FailureMode::Exact) return value(selection);
  std::vector<double> avail;
  std::size_t budget = spec_.info.pattern_cap;
  for (int r : idx) {
    double a = im.avail[r];
    if (a > 0.0 && a < 1.0) {
      if (budget >= 2) budget /= 2;
      else a = 1.0;
    }
    avail.push_back(a);
  }
  double total = 0.0;
  for (std::size_t t = 0; t < im.gram.size(); ++t) {
    Eigen::MatrixXd g = im.sub_gram(static_cast<int>(t), idx);
    g.diagonal().array() += im.shift[t];
    total += expected_half_logdet(g, avail, 0.0, spec_.info.pattern_cap);
  }
  return total / static_cast<double>(im.gram.size());
}

Objective::State Objective::initial_state() const {
  const Impl& im = *impl_;
  State st;
  const std::size_t per = im.base.size() * static_cast<std::size_t>(im.num_states) * im.num_states;
  if (spec_.info.failure_mode == FailureMode::Exact) {
    st.scenarios_.push_back({1.0, 0, im.base});
    return st;
  }
  const std::size_t n = spec_.info.mc_samples;
  if (per * n > kStateBudgetDoubles) {
    st.incremental_ = false;
    return st;
  }
  st.scenarios_.reserve(n);
  for (std::size_t s = 0; s < n; ++s) st.scenarios_.push_back({1.0 / static_cast<double>(n), s, im.base});
  return st;
}

double Objective::gain(const State& state, int candidate) const {
  if (!state.incremental_) {
    std::vector<int> sel = state.selection_;
    sel.push_back(candidate);
    return value(sel) - state.value_;
  }
  const Impl& im = *impl_;
  const auto [first, count] = im.span[candidate];
  if (count == 0) return 0.0;
  const int slots = static_cast<int>(im.base.size());
  const InfoConfig& info = spec_.info;
  std::vector<double> avail(im.avail.begin() + first, im.avail.begin() + first + count);
  double total = 0.0;
  std::vector<int> alive;
  for (const auto& sc : state.scenarios_) {
    if (info.failure_mode == FailureMode::MonteCarlo) {
      alive.clear();
      for (int k = 0; k < count; ++k) {
        if (row_alive(avail[k], info.seed, sc.sample, im.labels[first + k])) alive.push_back(k);
      }
      if (alive.empty()) continue;
    }
    double v = 0.0;
    for (int t = 0; t < slots; ++t) {
      Eigen::MatrixXd g = im.candidate_gram(candidate, sc.cov[t]);
      if (info.failure_mode == FailureMode::Exact) {
        g.diagonal().array() += im.shift[t];
        v += expected_half_logdet(g, avail, 0.0, info.pattern_cap);
      } else {
        v += half_logdet_alive(g, alive, im.shift[t]);
      }
    }
    total += sc.weight * v / slots;
  }
  return total;
}

void Objective::extend(State& state, int candidate) const {
  const Impl& im = *impl_;
  if (!state.incremental_) {
    state.selection_.push_back(candidate);
    state.value_ = value(state.selection_);
    return;
  }
  const double g = gain(state, candidate);
  state.selection_.push_back(candidate);
  state.value_ += g;

  const auto [first, count] = im.span[candidate];
  const InfoConfig& info = spec_.info;
  if (info.failure_mode == FailureMode::MonteCarlo) {
    std::vector<int> alive;
    for (auto& sc : state.scenarios_) {
      alive.clear();
      for (int k = 0; k < count; ++k) {
        if (row_alive(im.avail[first + k], info.seed, sc.sample, im.labels[first + k])) alive.push_back(k);
      }
      for (std::size_t t = 0; t < sc.cov.size(); ++t) im.condition(sc.cov[t], candidate, alive, im.shift[t]);
    }
    return;
  }

  std::vector<int> certain, uncertain;
  for (int k = 0; k < count; ++k) {
    const double a = im.avail[first + k];
    if (a >= 1.0) certain.push_back(k);
    else if (a > 0.0) uncertain.push_back(k);
  }
  const std::size_t branches = std::size_t{1} << uncertain.size();
  const std::size_t per = im.base.size() * static_cast<std::size_t>(im.num_states) * im.num_states;
  if (uncertain.size() >= 40 || state.scenarios_.size() * branches * per > kStateBudgetDoubles) {
    // Too many failure patterns to carry; later gains are computed from scratch.
    state.scenarios_.clear();
    state.incremental_ = false;
    state.value_ = value(state.selection_);
    return;
  }
  std::vector<State::Scenario> next;
  next.reserve(state.scenarios_.size() * branches);
  for (const auto& sc : state.scenarios_) {
    for (std::size_t mask = 0; mask < branches; ++mask) {
      State::Scenario child{sc.weight, 0, sc.cov};
      std::vector<int> alive = certain;
      for (std::size_t u = 0; u < uncertain.size(); ++u) {
        const double a = im.avail[first + uncertain[u]];
        if ((mask >> u) & 1U) {
          alive.push_back(uncertain[u]);
          child.weight *= a;
        } else {
          child.weight *= 1.0 - a;
        }
      }
      std::sort(alive.begin(), alive.end());
      for (std::size_t t = 0; t < child.cov.size(); ++t) {
        im.condition(child.cov[t], candidate, alive, im.shift[t]);
      }
      next.push_back(std::move(child));
    }
  }
  state.scenarios_ = std::move(next);
}

double objective_value(const SusceptanceModel& model, const ObjectiveSpec& spec,
                       std::span<const PmuCandidate> candidates, std::span<const int> selected_ids) {
  Objective obj(model, spec, {candidates.begin(), candidates.end()});
  std::vector<int> sel;
  for (int id : selected_ids) {
    const int k = obj.index_of(id);
    if (k < 0) throw Error(ErrorKind::UnknownCandidate, "candidate " + std::to_string(id));
    sel.push_back(k);
  }
  return obj.value(sel);
}

}  // namespace pmu
