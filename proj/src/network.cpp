#include "pmuplace/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pmuplace/error.hpp"

namespace pmu {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedCase: return "MalformedCase";
    case ErrorKind::MissingSlack: return "MissingSlack";
    case ErrorKind::DuplicateBusId: return "DuplicateBusId";
    case ErrorKind::DanglingBranch: return "DanglingBranch";
    case ErrorKind::DisconnectedNetwork: return "DisconnectedNetwork";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::UnknownBus: return "UnknownBus";
    case ErrorKind::UnknownBranch: return "UnknownBranch";
    case ErrorKind::UnknownCandidate: return "UnknownCandidate";
    case ErrorKind::PatternExplosion: return "PatternExplosion";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorKind::EquivalenceViolation: return "EquivalenceViolation";
    case ErrorKind::DegenerateSampleCovariance: return "DegenerateSampleCovariance";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

const Bus* NetworkCase::find_bus(int id) const {
  auto it = std::lower_bound(buses.begin(), buses.end(), id,
                             [](const Bus& b, int v) { return b.id < v; });
  return (it != buses.end() && it->id == id) ? &*it : nullptr;
}

bool NetworkCase::has_branch(int a, int b) const {
  return std::any_of(branches.begin(), branches.end(), [&](const Branch& br) {
    return (br.from == a && br.to == b) || (br.from == b && br.to == a);
  });
}

std::vector<int> NetworkCase::neighbors(int id) const {
  std::set<int> out;
  for (const auto& br : branches) {
    if (br.from == id && br.to != id) out.insert(br.to);
    if (br.to == id && br.from != id) out.insert(br.from);
  }
  return {out.begin(), out.end()};
}

std::optional<CaseFormat> parse_case_format(std::string_view tag) {
  if (tag == "json") return CaseFormat::Json;
  if (tag == "matpower" || tag == "matpower_subset" || tag == "m") return CaseFormat::Matpower;
  return std::nullopt;
}

namespace {

struct RawBus {
  int id;
  double p_mw;
  std::optional<double> std_mw;
};

// Shared validation for both readers. Injections arrive in MW and are scaled
// by baseMVA here.
NetworkCase finalize_case(double base_mva, std::optional<int> slack, std::vector<RawBus> raw,
                          std::vector<Branch> branches, const InjectionStdRule& rule) {
  if (!(base_mva > 0.0)) {
    throw Error(ErrorKind::MalformedCase, "baseMVA must be positive");
  }
  std::set<int> seen;
  for (const auto& b : raw) {
    if (!seen.insert(b.id).second) {
      throw Error(ErrorKind::DuplicateBusId, "bus " + std::to_string(b.id) + " appears twice");
    }
  }
  if (!slack) throw Error(ErrorKind::MissingSlack, "no slack bus designated");
  if (!seen.count(*slack)) {
    throw Error(ErrorKind::MissingSlack, "slack bus " + std::to_string(*slack) + " does not exist");
  }
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    for (int end : {br.from, br.to}) {
      if (!seen.count(end)) {
        throw Error(ErrorKind::DanglingBranch, "branch #" + std::to_string(k) + " (" +
                                                   std::to_string(br.from) + "-" +
                                                   std::to_string(br.to) + ") references bus " +
                                                   std::to_string(end));
      }
    }
    if (!(br.reactance > 0.0)) {
      throw Error(ErrorKind::MalformedCase, "branch #" + std::to_string(k) + " (" +
                                                std::to_string(br.from) + "-" +
                                                std::to_string(br.to) +
                                                ") has non-positive reactance");
    }
    if (br.from == br.to) {
      throw Error(ErrorKind::MalformedCase,
                  "branch #" + std::to_string(k) + " is a self-loop at bus " +
                      std::to_string(br.from));
    }
  }

  NetworkCase net;
  net.base_mva = base_mva;
  net.slack_bus = *slack;
  net.branches = std::move(branches);
  std::sort(raw.begin(), raw.end(), [](const RawBus& a, const RawBus& b) { return a.id < b.id; });
  const double floor_pu = rule.floor_mw / base_mva;
  for (const auto& b : raw) {
    Bus bus;
    bus.id = b.id;
    bus.injection_mean = b.p_mw / base_mva;
    bus.injection_std = b.std_mw ? *b.std_mw / base_mva
                                 : std::max(rule.fraction_of_mean * std::abs(bus.injection_mean),
                                            floor_pu);
    if (bus.injection_std < 0.0) {
      throw Error(ErrorKind::MalformedCase,
                  "bus " + std::to_string(b.id) + " has negative injection std");
    }
    net.buses.push_back(bus);
  }
  return net;
}

NetworkCase parse_json_case(std::string_view text, const InjectionStdRule& rule) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedCase, std::string("JSON syntax: ") + e.what());
  }
  try {
    const double base = doc.value("base_mva", 100.0);
    std::optional<int> slack;
    if (doc.contains("slack") && !doc["slack"].is_null()) slack = doc["slack"].get<int>();
    std::vector<RawBus> raw;
    for (const auto& b : doc.at("buses")) {
      RawBus rb{b.at("id").get<int>(), b.value("p_inj_mw", 0.0), std::nullopt};
      if (b.contains("p_std_mw")) rb.std_mw = b["p_std_mw"].get<double>();
      raw.push_back(rb);
    }
    std::vector<Branch> branches;
    for (const auto& br : doc.at("branches")) {
      branches.push_back(
          {br.at("from").get<int>(), br.at("to").get<int>(), br.at("x_pu").get<double>()});
    }
    return finalize_case(base, slack, std::move(raw), std::move(branches), rule);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedCase, std::string("JSON schema: ") + e.what());
  }
}

// Extracts the numeric rows of `mpc.<name> = [ ... ];`, comments stripped.
std::optional<std::vector<std::vector<double>>> matpower_table(const std::string& text,
                                                               const std::string& name) {
  const std::string key = "mpc." + name;
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t after = pos + key.size();
    std::size_t k = after;
    while (k < text.size() && (text[k] == ' ' || text[k] == '\t')) ++k;
    if (k < text.size() && text[k] == '=') break;
    pos = after;
  }
  if (pos == std::string::npos) return std::nullopt;
  const std::size_t open = text.find('[', pos);
  const std::size_t close = text.find(']', open);
  if (open == std::string::npos || close == std::string::npos) {
    throw Error(ErrorKind::MalformedCase, "table " + name + " is not bracketed");
  }
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::istringstream body(text.substr(open + 1, close - open - 1));
  std::string line;
  auto flush = [&] {
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  while (std::getline(body, line)) {
    if (auto c = line.find('%'); c != std::string::npos) line.erase(c);
    std::string token;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      const char ch = i < line.size() ? line[i] : ' ';
      if (ch == ';' || std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
        if (!token.empty()) {
          try {
            std::size_t used = 0;
            row.push_back(std::stod(token, &used));
            if (used != token.size()) throw std::invalid_argument(token);
          } catch (const std::exception&) {
            throw Error(ErrorKind::MalformedCase,
                        "table " + name + ": bad number '" + token + "'");
          }
          token.clear();
        }
        if (ch == ';') flush();
      } else {
        token.push_back(ch);
      }
    }
    flush();
  }
  return rows;
}

NetworkCase parse_matpower_case(std::string_view view, const InjectionStdRule& rule) {
  const std::string text(view);
  double base = 100.0;
  if (auto p = text.find("mpc.baseMVA"); p != std::string::npos) {
    const auto eq = text.find('=', p);
    const auto semi = text.find(';', eq);
    if (eq == std::string::npos || semi == std::string::npos) {
      throw Error(ErrorKind::MalformedCase, "baseMVA assignment is malformed");
    }
    try {
      base = std::stod(text.substr(eq + 1, semi - eq - 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedCase, "baseMVA is not a number");
    }
  }
  auto bus_rows = matpower_table(text, "bus");
  auto branch_rows = matpower_table(text, "branch");
  if (!bus_rows) throw Error(ErrorKind::MalformedCase, "missing mpc.bus table");
  if (!branch_rows) throw Error(ErrorKind::MalformedCase, "missing mpc.branch table");
  auto gen_rows = matpower_table(text, "gen").value_or(std::vector<std::vector<double>>{});

  std::vector<RawBus> raw;
  std::optional<int> slack;
  for (std::size_t r = 0; r < bus_rows->size(); ++r) {
    const auto& row = (*bus_rows)[r];
    if (row.size() < 3) {
      throw Error(ErrorKind::MalformedCase, "bus row " + std::to_string(r + 1) + " is too short");
    }
    const int id = static_cast<int>(row[0]);
    // BUS_TYPE 3 marks the reference bus.
    if (static_cast<int>(row[1]) == 3) {
      if (slack) throw Error(ErrorKind::MalformedCase, "more than one reference bus");
      slack = id;
    }
    raw.push_back({id, -row[2], std::nullopt});
  }
  for (std::size_t r = 0; r < gen_rows.size(); ++r) {
    const auto& row = gen_rows[r];
    if (row.size() < 2) {
      throw Error(ErrorKind::MalformedCase, "gen row " + std::to_string(r + 1) + " is too short");
    }
    const int id = static_cast<int>(row[0]);
    auto it = std::find_if(raw.begin(), raw.end(), [&](const RawBus& b) { return b.id == id; });
    if (it == raw.end()) {
      throw Error(ErrorKind::MalformedCase,
                  "gen row " + std::to_string(r + 1) + " references bus " + std::to_string(id));
    }
    it->p_mw += row[1];
  }
  std::vector<Branch> branches;
  for (std::size_t r = 0; r < branch_rows->size(); ++r) {
    const auto& row = (*branch_rows)[r];
    if (row.size() < 4) {
      throw Error(ErrorKind::MalformedCase,
                  "branch row " + std::to_string(r + 1) + " is too short");
    }
    branches.push_back({static_cast<int>(row[0]), static_cast<int>(row[1]), row[3]});
  }
  return finalize_case(base, slack, std::move(raw), std::move(branches), rule);
}

}  // namespace

NetworkCase parse_case(std::string_view text, CaseFormat format, const InjectionStdRule& rule) {
  return format == CaseFormat::Json ? parse_json_case(text, rule)
                                    : parse_matpower_case(text, rule);
}

NetworkCase load_case(const std::filesystem::path& path, std::optional<CaseFormat> format,
                      const InjectionStdRule& rule) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open case file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (!format) format = path.extension() == ".json" ? CaseFormat::Json : CaseFormat::Matpower;
  return parse_case(buf.str(), *format, rule);
}

int SusceptanceModel::state_index(int bus_id) const {
  auto it = state_lookup.find(bus_id);
  return it == state_lookup.end() ? -1 : it->second;
}

int SusceptanceModel::full_index(int bus_id) const {
  auto it = full_lookup.find(bus_id);
  return it == full_lookup.end() ? -1 : it->second;
}

SusceptanceModel build_susceptance(const NetworkCase& net) {
  SusceptanceModel model;
  model.slack_bus = net.slack_bus;
  const int n = static_cast<int>(net.buses.size());
  for (int k = 0; k < n; ++k) {
    model.bus_ids.push_back(net.buses[k].id);
    model.full_lookup[net.buses[k].id] = k;
  }

  // Connectivity over the branch graph.
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : net.branches) {
    const int a = model.full_lookup.at(br.from);
    const int b = model.full_lookup.at(br.to);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  if (n > 0) {
    std::vector<bool> reached(n, false);
    std::queue<int> frontier;
    frontier.push(0);
    reached[0] = true;
    int count = 1;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int v : adj[u]) {
        if (!reached[v]) {
          reached[v] = true;
          ++count;
          frontier.push(v);
        }
      }
    }
    if (count != n) {
      const int missing =
          static_cast<int>(std::find(reached.begin(), reached.end(), false) - reached.begin());
      throw Error(ErrorKind::DisconnectedNetwork,
                  "bus " + std::to_string(model.bus_ids[missing]) +
                      " is not reachable from bus " + std::to_string(model.bus_ids[0]));
    }
  }

  model.b_full = Eigen::MatrixXd::Zero(n, n);
  for (const auto& br : net.branches) {
    const int a = model.full_lookup.at(br.from);
    const int b = model.full_lookup.at(br.to);
    const double y = 1.0 / br.reactance;
    model.b_full(a, b) -= y;
    model.b_full(b, a) -= y;
    model.b_full(a, a) += y;
    model.b_full(b, b) += y;
  }

  std::vector<int> keep;
  for (int k = 0; k < n; ++k) {
    if (model.bus_ids[k] == net.slack_bus) continue;
    model.state_lookup[model.bus_ids[k]] = static_cast<int>(keep.size());
    model.state_ids.push_back(model.bus_ids[k]);
    keep.push_back(k);
  }
  const int m = static_cast<int>(keep.size());
  model.b_reduced.resize(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) model.b_reduced(r, c) = model.b_full(keep[r], keep[c]);
  }
  return model;
}

InjectionProfile nominal_profile(const NetworkCase& net, const SusceptanceModel& model) {
  return scaled_profile(net, model, {1.0});
}

InjectionProfile scaled_profile(const NetworkCase& net, const SusceptanceModel& model,
                                const std::vector<double>& scales) {
  const int n = static_cast<int>(model.bus_ids.size());
  InjectionProfile profile;
  for (double s : scales) {
    InjectionProfile::Slot slot;
    slot.mean.resize(n);
    slot.covariance = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
      const Bus* bus = net.find_bus(model.bus_ids[k]);
      slot.mean(k) = s * bus->injection_mean;
      const double sd = std::abs(s) * bus->injection_std;
      slot.covariance(k, k) = sd * sd;
    }
    profile.slots.push_back(std::move(slot));
  }
  return profile;
}

StatePrior build_prior(const SusceptanceModel& model, const InjectionProfile::Slot& slot,
                       int slot_index) {
  const int full = static_cast<int>(model.bus_ids.size());
  const int n = model.num_states();
  if (slot.mean.size() != full || slot.covariance.rows() != full ||
      slot.covariance.cols() != full) {
    throw Error(ErrorKind::InvalidArgument, "injection slot dimension does not match the network");
  }
  std::vector<int> keep;
  for (int id : model.state_ids) keep.push_back(model.full_index(id));
  Eigen::VectorXd mu(n);
  Eigen::MatrixXd sigma(n, n);
  for (int r = 0; r < n; ++r) {
    mu(r) = slot.mean(keep[r]);
    for (int c = 0; c < n; ++c) sigma(r, c) = slot.covariance(keep[r], keep[c]);
  }

  StatePrior prior;
  prior.slot_index = slot_index;
  if (n == 0) {
    prior.mean = Eigen::VectorXd(0);
    prior.covariance = Eigen::MatrixXd(0, 0);
    return prior;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(model.b_reduced);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    throw Error(ErrorKind::SingularMatrix, "reduced susceptance matrix is ill-conditioned");
  }
  prior.mean = llt.solve(mu);
  const Eigen::MatrixXd left = llt.solve(sigma);                     // B^-1 Sigma
  const Eigen::MatrixXd both = llt.solve(left.transpose()).transpose();  // (B^-1 (B^-1 Sigma)^T)^T
  prior.covariance = 0.5 * (both + both.transpose());
  return prior;
}

std::vector<StatePrior> build_priors(const SusceptanceModel& model,
                                     const InjectionProfile& profile) {
  std::vector<StatePrior> out;
  for (int t = 0; t < profile.num_slots(); ++t) out.push_back(build_prior(model, profile.slots[t], t));
  return out;
}

}  // namespace pmu
