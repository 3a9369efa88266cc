#include "pmuplace/measurements.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "pmuplace/error.hpp"

namespace pmu {

namespace {

void apply_noise_and_availability(PmuCandidate& c, const CandidateOptions& opt) {
  double std_deg = opt.defaults.pmu_noise_std_deg;
  double avail = opt.defaults.availability;
  if (auto it = opt.overrides.find(c.bus); it != opt.overrides.end()) {
    std_deg = it->second.noise_std_deg.value_or(std_deg);
    avail = it->second.availability.value_or(avail);
  }
  const double var = deg_to_rad(std_deg) * deg_to_rad(std_deg);
  c.voltage_noise_var = var;
  c.voltage_availability = avail;
  c.current_noise_vars.assign(c.channels.size(), var);
  c.channel_availabilities.assign(c.channels.size(), avail);
}

// Next k-subset of {0..n-1} in lexicographic order.
bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

}  // namespace

std::vector<PmuCandidate> enumerate_candidates(const NetworkCase& net,
                                               const SusceptanceModel& model,
                                               std::span<const StatePrior> priors,
                                               const CandidateOptions& opt) {
  if (opt.channel_limit && *opt.channel_limit < 0) {
    throw Error(ErrorKind::InvalidArgument, "channel limit must be non-negative");
  }
  auto variance = [&](int bus) {
    const int k = model.state_index(bus);
    if (k < 0 || priors.empty()) return 0.0;
    double v = 0.0;
    for (const auto& p : priors) v += p.covariance(k, k);
    return v / static_cast<double>(priors.size());
  };

  std::vector<PmuCandidate> out;
  int next_id = 1;
  for (const auto& bus : net.buses) {
    std::vector<int> nbrs = net.neighbors(bus.id);
    if (bus.id == net.slack_bus && nbrs.empty()) continue;

    if (!opt.channel_limit || *opt.channel_limit >= static_cast<int>(nbrs.size())) {
      PmuCandidate c;
      c.candidate_id = opt.enumerate_channel_subsets ? next_id++ : bus.id;
      c.bus = bus.id;
      c.channels = nbrs;
      apply_noise_and_availability(c, opt);
      out.push_back(std::move(c));
      continue;
    }

    const int limit = *opt.channel_limit;
    if (!opt.enumerate_channel_subsets) {
      std::stable_sort(nbrs.begin(), nbrs.end(), [&](int a, int b) {
        const double va = variance(a), vb = variance(b);
        if (va != vb) return va > vb;
        return a < b;
      });
      nbrs.resize(limit);
      std::sort(nbrs.begin(), nbrs.end());
      PmuCandidate c;
      c.candidate_id = bus.id;
      c.bus = bus.id;
      c.channels = nbrs;
      apply_noise_and_availability(c, opt);
      out.push_back(std::move(c));
      continue;
    }

    std::vector<int> idx(limit);
    std::iota(idx.begin(), idx.end(), 0);
    do {
      if (out.size() >= opt.max_candidates) {
        throw Error(ErrorKind::SearchSpaceTooLarge,
                    "channel subset enumeration exceeds " + std::to_string(opt.max_candidates) +
                        " candidates");
      }
      PmuCandidate c;
      c.candidate_id = next_id++;
      c.bus = bus.id;
      for (int i : idx) c.channels.push_back(nbrs[i]);
      apply_noise_and_availability(c, opt);
      out.push_back(std::move(c));
    } while (limit > 0 && next_combination(idx, static_cast<int>(nbrs.size())));
  }
  return out;
}

ConventionalPlan full_conventional_plan(const NetworkCase& net, double noise_var) {
  ConventionalPlan plan;
  for (const auto& b : net.buses) plan.injection_meters.push_back({b.id, noise_var});
  for (const auto& br : net.branches) plan.flow_meters.push_back({br.from, br.to, noise_var});
  return plan;
}

std::string RowLabel::str() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::PmuVoltage: os << "pmu" << source << ":V" << bus; break;
    case Kind::PmuCurrent: os << "pmu" << source << ":I" << bus << "-" << other; break;
    case Kind::Injection: os << "conv:P" << bus; break;
    case Kind::Flow: os << "conv:F" << bus << "-" << other; break;
    case Kind::Synthetic: os << "row" << source << "." << channel; break;
  }
  return os.str();
}

LinearObservation LinearObservation::empty(int num_states) {
  LinearObservation obs;
  obs.h = Eigen::MatrixXd::Zero(0, num_states);
  obs.noise_var = Eigen::VectorXd(0);
  return obs;
}

LinearObservation LinearObservation::select_rows(std::span<const int> rows) const {
  LinearObservation out = empty(cols());
  const int m = static_cast<int>(rows.size());
  out.h.resize(m, cols());
  out.noise_var.resize(m);
  for (int r = 0; r < m; ++r) {
    out.h.row(r) = h.row(rows[r]);
    out.noise_var(r) = noise_var(rows[r]);
    out.labels.push_back(labels[rows[r]]);
    out.availability.push_back(availability[rows[r]]);
  }
  return out;
}

LinearObservation LinearObservation::append(const LinearObservation& other) const {
  if (other.cols() != cols()) {
    throw Error(ErrorKind::InvalidArgument, "observation column counts differ");
  }
  LinearObservation out;
  out.h.resize(rows() + other.rows(), cols());
  out.h << h, other.h;
  out.noise_var.resize(rows() + other.rows());
  out.noise_var << noise_var, other.noise_var;
  out.labels = labels;
  out.labels.insert(out.labels.end(), other.labels.begin(), other.labels.end());
  out.availability = availability;
  out.availability.insert(out.availability.end(), other.availability.begin(),
                          other.availability.end());
  return out;
}

LinearObservation candidate_observation(const PmuCandidate& cand, const SusceptanceModel& model) {
  if (model.full_index(cand.bus) < 0) {
    throw Error(ErrorKind::UnknownBus, "PMU bus " + std::to_string(cand.bus));
  }
  const int fi = model.full_index(cand.bus);
  for (int j : cand.channels) {
    const int fj = model.full_index(j);
    if (fj < 0) throw Error(ErrorKind::UnknownBus, "channel bus " + std::to_string(j));
    if (model.b_full(fi, fj) == 0.0) {
      throw Error(ErrorKind::UnknownBranch, "no branch " + std::to_string(cand.bus) + "-" +
                                                std::to_string(j) + " for PMU channel");
    }
  }
  if (cand.current_noise_vars.size() != cand.channels.size() ||
      cand.channel_availabilities.size() != cand.channels.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "candidate " + std::to_string(cand.candidate_id) + " channel data sizes differ");
  }

  const int n = model.num_states();
  const int si = model.state_index(cand.bus);
  LinearObservation obs = LinearObservation::empty(n);
  std::vector<Eigen::VectorXd> rows;
  auto add = [&](const Eigen::VectorXd& row, double var, double avail, RowLabel label) {
    rows.push_back(row);
    obs.noise_var.conservativeResize(obs.noise_var.size() + 1);
    obs.noise_var(obs.noise_var.size() - 1) = var;
    obs.availability.push_back(avail);
    obs.labels.push_back(label);
  };

  if (si >= 0) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    row(si) = 1.0;
    add(row, cand.voltage_noise_var, cand.voltage_availability,
        {RowLabel::Kind::PmuVoltage, cand.candidate_id, 0, cand.bus, cand.bus});
  }
  for (std::size_t k = 0; k < cand.channels.size(); ++k) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
    if (si >= 0) row(si) += 1.0;
    const int sj = model.state_index(cand.channels[k]);
    if (sj >= 0) row(sj) -= 1.0;
    add(row, cand.current_noise_vars[k], cand.channel_availabilities[k],
        {RowLabel::Kind::PmuCurrent, cand.candidate_id, static_cast<int>(k) + 1, cand.bus,
         cand.channels[k]});
  }
  obs.h.resize(static_cast<int>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) obs.h.row(static_cast<int>(r)) = rows[r];
  return obs;
}

LinearObservation stack_candidates(std::span<const PmuCandidate> cands,
                                   const SusceptanceModel& model) {
  LinearObservation obs = LinearObservation::empty(model.num_states());
  for (const auto& c : cands) obs = obs.append(candidate_observation(c, model));
  return obs;
}

LinearObservation conventional_observation(const ConventionalPlan& plan,
                                           const SusceptanceModel& model) {
  const int n = model.num_states();
  const int m = static_cast<int>(plan.injection_meters.size() + plan.flow_meters.size());
  LinearObservation obs = LinearObservation::empty(n);
  obs.h = Eigen::MatrixXd::Zero(m, n);
  obs.noise_var.resize(m);
  int r = 0;
  for (std::size_t k = 0; k < plan.injection_meters.size(); ++k, ++r) {
    const auto& meter = plan.injection_meters[k];
    const int fi = model.full_index(meter.bus);
    if (fi < 0) throw Error(ErrorKind::UnknownBus, "injection meter at bus " + std::to_string(meter.bus));
    if (!(meter.noise_var > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "injection meter variance must be positive");
    }
    for (int c = 0; c < n; ++c) obs.h(r, c) = model.b_full(fi, model.full_index(model.state_ids[c]));
    obs.noise_var(r) = meter.noise_var;
    obs.availability.push_back(1.0);
    obs.labels.push_back({RowLabel::Kind::Injection, static_cast<int>(k), 0, meter.bus, meter.bus});
  }
  for (std::size_t k = 0; k < plan.flow_meters.size(); ++k, ++r) {
    const auto& meter = plan.flow_meters[k];
    const int fi = model.full_index(meter.from);
    const int fj = model.full_index(meter.to);
    if (fi < 0 || fj < 0 || fi == fj || model.b_full(fi, fj) == 0.0) {
      throw Error(ErrorKind::UnknownBranch, "flow meter on " + std::to_string(meter.from) + "-" +
                                                std::to_string(meter.to));
    }
    if (!(meter.noise_var > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "flow meter variance must be positive");
    }
    const double bij = model.b_full(fi, fj);  // -1/x summed over parallel lines
    if (int si = model.state_index(meter.from); si >= 0) obs.h(r, si) -= bij;
    if (int sj = model.state_index(meter.to); sj >= 0) obs.h(r, sj) += bij;
    obs.noise_var(r) = meter.noise_var;
    obs.availability.push_back(1.0);
    obs.labels.push_back(
        {RowLabel::Kind::Flow, static_cast<int>(k), 0, meter.from, meter.to});
  }
  return obs;
}

std::vector<FailurePattern> failure_patterns(std::span<const PmuCandidate> cands,
                                             std::size_t cap) {
  std::vector<double> avail;
  for (const auto& c : cands) {
    for (int k = 0; k < c.num_channels(); ++k) {
      const double a = c.availability(k);
      if (a < 0.0 || a > 1.0) {
        throw Error(ErrorKind::InvalidArgument,
                    "availability outside [0,1] on candidate " + std::to_string(c.candidate_id));
      }
      avail.push_back(a);
    }
  }
  std::vector<int> uncertain;
  for (std::size_t k = 0; k < avail.size(); ++k) {
    if (avail[k] > 0.0 && avail[k] < 1.0) uncertain.push_back(static_cast<int>(k));
  }
  if (uncertain.size() >= 63 || (std::size_t{1} << uncertain.size()) > cap) {
    throw Error(ErrorKind::PatternExplosion,
                std::to_string(uncertain.size()) + " uncertain channels exceed the enumeration cap");
  }
  const std::size_t count = std::size_t{1} << uncertain.size();
  std::vector<FailurePattern> out(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    FailurePattern& p = out[mask];
    p.alive.resize(avail.size());
    for (std::size_t k = 0; k < avail.size(); ++k) p.alive[k] = avail[k] >= 1.0;
    for (std::size_t u = 0; u < uncertain.size(); ++u) {
      const bool up = (mask >> u) & 1U;
      p.alive[uncertain[u]] = up;
      p.probability *= up ? avail[uncertain[u]] : 1.0 - avail[uncertain[u]];
    }
  }
  return out;
}

}  // namespace pmu
