#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "pmuplace/cli.hpp"
#include "support.hpp"

using namespace pmu;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("pmuplace_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "pmuplace");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  // reports go to files; keep stdout quiet
  std::streambuf* old = std::cout.rdbuf();
  std::ostringstream sink;
  std::cout.rdbuf(sink.rdbuf());
  const int code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const std::string kCase14 = fixture::data("case14.m");

}  // namespace

TEST_CASE("place writes consistent JSON and CSV") {
  const auto js = scratch() / "place.json", cs = scratch() / "place.csv";
  REQUIRE(run({"place", "--case", kCase14, "--k", "4", "--out-json", js, "--out-csv", cs}) == 0);
  const auto j = load(js);
  CHECK(j["order"] == json({4, 13, 9, 6}));
  CHECK(j["sets"][3] == json({4, 6, 9, 13}));
  CHECK(j.contains("wall_time_s"));
  const auto rows = csv(cs);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"k", "objective_nats", "objective_bits", "normalized_gain"});
  CHECK(rows[1] == std::vector<std::string>{"0", "0", "0", "0"});
  const double denom = j["normalization_denominator_nats"];
  for (int k = 1; k <= 4; ++k) {
    const double nats = std::stod(rows[k + 1][1]);
    CHECK(nats == j["values_nats"][k - 1].get<double>());
    CHECK(std::stod(rows[k + 1][2]) == j["values_bits"][k - 1].get<double>());
    CHECK(std::stod(rows[k + 1][3]) == nats / denom);
    CHECK(std::stod(rows[k + 1][3]) == j["normalized_gain"][k].get<double>());
  }
}

TEST_CASE("place with K=0") {
  const auto js = scratch() / "k0.json", cs = scratch() / "k0.csv";
  REQUIRE(run({"place", "--case", kCase14, "--k", "0", "--out-json", js, "--out-csv", cs}) == 0);
  const auto j = load(js);
  CHECK(j["order"].empty());
  CHECK(j["normalized_gain"] == json({0.0}));
  CHECK(csv(cs).size() == 2);
}

TEST_CASE("eval reports") {
  const auto place = scratch() / "p4.json", ev = scratch() / "e4.json", empty = scratch() / "e0.json";
  REQUIRE(run({"place", "--case", kCase14, "--k", "4", "--out-json", place}) == 0);
  REQUIRE(run({"eval", "--case", kCase14, "--set", "4,6,9,13", "--out-json", ev}) == 0);
  CHECK(load(ev)["value_nats"].get<double>() == load(place)["values_nats"][3].get<double>());

  REQUIRE(run({"eval", "--case", kCase14, "--out-json", empty}) == 0);
  const auto j = load(empty);
  CHECK(j["value_nats"] == 0.0);
  int argmax = 0;
  double best = -1.0;
  for (const auto& b : j["buses"]) {
    CHECK(b["prior_std_deg"] == b["posterior_std_deg"]);
    if (b["prior_std_deg"].get<double>() > best) {
      best = b["prior_std_deg"];
      argmax = b["bus"];
    }
  }
  CHECK(argmax == 3);

  // all candidates, no failures: the normalization denominator
  const auto all = scratch() / "eall.json";
  REQUIRE(run({"eval", "--case", kCase14, "--availability", "1", "--set", "1,2,3,4,5,6,7,8,9,10,11,12,13,14",
               "--out-json", all}) == 0);
  const auto a = load(all);
  CHECK(a["value_nats"].get<double>() == doctest::Approx(a["normalization_denominator_nats"].get<double>()).epsilon(1e-12));
  CHECK(a["normalized_gain"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exit codes") {
  CHECK(run({"eval", "--case", kCase14, "--set", "99"}) == 1);
  CHECK(run({"place", "--case", "/nonexistent/case.m"}) == 1);
  CHECK(run({"place", "--case", kCase14, "--objective", "f3"}) == 1);
  CHECK(run({"place", "--case", kCase14, "--k", "-1"}) == 1);
  CHECK(run({"place", "--bogus-flag"}) == 1);
  CHECK(run({"place", "--case", fixture::data("case57.m"), "--k", "10"}) == 2);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("config file overrides flags") {
  const auto cfg = scratch() / "cfg.json", out = scratch() / "cfg_out.json";
  {
    std::ofstream f(cfg);
    f << json{{"case", kCase14}, {"k", 2}, {"unit", "bits"}, {"out_json", out.string()}}.dump();
  }
  REQUIRE(run({"place", "--k", "4", "--config", cfg}) == 0);
  const auto j = load(out);
  CHECK(j["order"] == json({4, 13}));
  CHECK(j["unit"] == "bits");
  CHECK(j["objective"].get<double>() == doctest::Approx(j["values_bits"][1].get<double>()));

  {
    std::ofstream f(cfg);
    f << json{{"case", kCase14}, {"kk", 2}}.dump();
  }
  CHECK(run({"place", "--config", cfg}) == 1);
  {
    std::ofstream f(cfg);
    f << "{broken";
  }
  CHECK(run({"place", "--config", cfg}) == 1);
}

TEST_CASE("explicit candidates and conventional plan from config") {
  const auto cfg = scratch() / "cands.json", out = scratch() / "cands_out.json";
  {
    std::ofstream f(cfg);
    f << json{{"case", kCase14},
              {"k", 1},
              {"objective", "f2"},
              {"candidates", {{{"id", 7}, {"bus", 4}, {"channels", {2, 3}}}, {{"id", 8}, {"bus", 9}}}},
              {"conventional", {{"injections", {{{"bus", 3}}}}, {"flows", {{{"from", 1}, {"to", 2}}}}}},
              {"out_json", out.string()}}
             .dump();
  }
  REQUIRE(run({"place", "--config", cfg}) == 0);
  const auto j = load(out);
  CHECK(j["candidates"] == 2);
  CHECK(j["order"].size() == 1);
  {
    std::ofstream f(cfg);
    f << json{{"case", kCase14}, {"candidates", {{{"bus", 4}, {"channels", {14}}}}}}.dump();
  }
  CHECK(run({"place", "--config", cfg}) == 1);
}

TEST_CASE("repeated runs are byte-identical") {
  const auto a = scratch() / "det_a.json", b = scratch() / "det_b.json";
  const auto ca = scratch() / "det_a.csv", cb = scratch() / "det_b.csv";
  for (const auto& [js, cs] : {std::pair{a, ca}, std::pair{b, cb}}) {
    REQUIRE(run({"place", "--case", kCase14, "--k", "6", "--failure-mode", "mc", "--mc-samples", "300", "--seed", "5",
                 "--omit-timing", "--out-json", js, "--out-csv", cs}) == 0);
  }
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(ca) == slurp(cb));
  CHECK(load(a)["final_std_error_nats"].get<double>() > 0.0);
}

TEST_CASE("sweep with exhaustive comparison") {
  const auto js = scratch() / "sweep.json", cs = scratch() / "sweep.csv";
  REQUIRE(run({"sweep", "--case", kCase14, "--k-max", "3", "--solver", "exhaustive", "--out-json", js, "--out-csv",
               cs}) == 0);
  const auto j = load(js);
  CHECK(j["approximation_ok"] == true);
  CHECK(j["optimal"][2]["set"] == json({4, 6, 9}));
  CHECK(csv(cs).size() == 5);
}

TEST_CASE("verify passes and the negated fixture fails") {
  const auto js = scratch() / "verify.json";
  CHECK(run({"verify", "--case", kCase14, "--trials", "200", "--out-json", js}) == 0);
  const auto j = load(js);
  CHECK(j["passed"] == true);
  CHECK(j["cover"]["passed"] == true);
  CHECK(j["lazy_greedy"]["identical"] == true);
  CHECK(run({"verify", "--case", kCase14, "--trials", "50", "--negate-fixture", "--out-json", js}) != 0);
  CHECK(load(js)["passed"] == false);
}
