#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "snpd/trace.hpp"

using namespace snpd;
namespace fs = std::filesystem;

namespace {

// Injected by the build; points at the command line binary.
constexpr const char* kCli = SNPD_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("snpd_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CsvRow {
  std::vector<std::string> cells;
  double num(std::size_t i) const { return std::stod(cells.at(i)); }
};

// Column indices in results.csv, matching the documented header.
enum : std::size_t {
  kColStrategy = 2,
  kColRatio = 3,
  kColRange = 6,
  kColRounds = 12,
  kColFn = 15,
  kColFp = 16,
  kColUnvAdv = 17,
  kColUnvCorr = 18,
};

std::vector<CsvRow> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<CsvRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    CsvRow row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.cells.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* kBaseScenario = R"({
  // Small scenario shared by the command line checks.
  "synthetic": { "model": "random-waypoint", "node_count": 150,
                 "snapshot_count": 40, "area_width": 3500, "area_height": 3500 },
  "seed": 40,
  "adversary": { "strategy": "knowledgeable-independent", "ratio": 0.2 },
  "verifier_ratio": 0.1
)";

}  // namespace

TEST_CASE("an empty sweep runs a single point", "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "cfg.json", std::string(kBaseScenario) + "}");
  REQUIRE(run_cli("run --config " + (tmp.path / "cfg.json").string() +
                  " --out " + (tmp.path / "out").string()) == 0);

  const auto rows = read_csv(tmp.path / "out" / "results.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].cells[0] == "point");
  CHECK(rows[0].cells[kColFn] == "fn_rate");
  CHECK(rows[0].cells.size() == 21);
  CHECK(rows[1].cells[kColStrategy] == "knowledgeable-independent");
  CHECK(rows[1].num(kColRounds) > 0);
  CHECK(fs::exists(tmp.path / "out" / "summary.json"));
  CHECK(fs::exists(tmp.path / "out" / "report.txt"));
}

TEST_CASE("false positives grow along an adversary ratio sweep", "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "cfg.json",
             std::string(kBaseScenario) +
                 R"(, "sweep": [ { "parameter": "adversary.ratio",
                                  "values": [0.05, 0.2, 0.4] } ] })");
  REQUIRE(run_cli("run --config " + (tmp.path / "cfg.json").string() +
                  " --out " + (tmp.path / "out").string()) == 0);

  const auto rows = read_csv(tmp.path / "out" / "results.csv");
  REQUIRE(rows.size() == 4);
  const double fp_lo = rows[1].num(kColFp);
  const double fp_hi = rows[3].num(kColFp);
  CHECK(fp_hi > fp_lo);
  // The false negative rate stays flat and low while false positives climb.
  for (std::size_t r = 1; r < rows.size(); ++r)
    CHECK(rows[r].num(kColFn) < 0.08);
}

TEST_CASE("a wider range drains the unverifiable fraction", "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "cfg.json",
             std::string(kBaseScenario) +
                 R"(, "sweep": [ { "parameter": "params.range",
                                  "values": [50, 250] } ] })");
  REQUIRE(run_cli("run --config " + (tmp.path / "cfg.json").string() +
                  " --out " + (tmp.path / "out").string()) == 0);

  const auto rows = read_csv(tmp.path / "out" / "results.csv");
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[1].num(kColRange) == 50.0);
  CHECK(rows[1].num(kColUnvCorr) > rows[2].num(kColUnvCorr));
  CHECK(rows[1].num(kColUnvAdv) > rows[2].num(kColUnvAdv));
}

TEST_CASE("equal seeds produce byte-identical outputs", "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "cfg.json",
             std::string(kBaseScenario) +
                 R"(, "sweep": [ { "parameter": "adversary.ratio",
                                  "values": [0.1, 0.3] } ] })");
  const std::string cfg = (tmp.path / "cfg.json").string();
  REQUIRE(run_cli("run --config " + cfg + " --out " +
                  (tmp.path / "a").string() + " --jobs 1") == 0);
  REQUIRE(run_cli("run --config " + cfg + " --out " +
                  (tmp.path / "b").string() + " --jobs 3") == 0);
  CHECK(read_file(tmp.path / "a" / "results.csv") ==
        read_file(tmp.path / "b" / "results.csv"));
  CHECK(read_file(tmp.path / "a" / "summary.json") ==
        read_file(tmp.path / "b" / "summary.json"));
  CHECK(read_file(tmp.path / "a" / "results.csv").find("fn_rate") !=
        std::string::npos);
}

TEST_CASE("seed override changes the outputs", "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "cfg.json", std::string(kBaseScenario) + "}");
  const std::string cfg = (tmp.path / "cfg.json").string();
  REQUIRE(run_cli("run --config " + cfg + " --out " +
                  (tmp.path / "a").string()) == 0);
  REQUIRE(run_cli("run --config " + cfg + " --out " +
                  (tmp.path / "b").string() + " --seed 41") == 0);
  CHECK(read_file(tmp.path / "a" / "results.csv") !=
        read_file(tmp.path / "b" / "results.csv"));
}

TEST_CASE("invalid configs are rejected with a nonzero exit", "[cli]") {
  TempDir tmp;
  const auto rejects = [&](const std::string& body) {
    write_file(tmp.path / "bad.json", body);
    return run_cli("run --config " + (tmp.path / "bad.json").string() +
                   " --out " + (tmp.path / "x").string()) != 0;
  };
  CHECK(run_cli("run --config " + (tmp.path / "missing.json").string() +
                " --out " + (tmp.path / "x").string()) != 0);
  CHECK(rejects(R"({ "seed": 1 })"));  // no trace source
  CHECK(rejects(R"({ "trace_file": "t", "synthetic": {}, "seed": 1 })"));
  CHECK(rejects(R"({ "synthetic": {}, "adversary": { "strategy": "nope" } })"));
  CHECK(rejects(R"({ "synthetic": {}, "adversary": { "ratio": 1.5 } })"));
  CHECK(rejects(R"({ "synthetic": {},
                     "sweep": [ { "parameter": "bogus", "values": [1] } ] })"));
  CHECK(rejects(R"({ "synthetic": { "node_count": 0 } })"));
}

TEST_CASE("generated traces load and drive file-based runs", "[cli]") {
  TempDir tmp;
  write_file(tmp.path / "spec.json",
             R"({ "model": "grid-roads", "node_count": 50, "snapshot_count": 8,
                  "area_width": 1200, "area_height": 1200,
                  "road_spacing": 300, "seed": 5 })");
  const std::string trace = (tmp.path / "t.trace").string();
  REQUIRE(run_cli("trace-gen --spec " + (tmp.path / "spec.json").string() +
                  " --out " + trace) == 0);

  const MobilityTrace loaded = load_trace_file(trace);
  CHECK(loaded.node_count() == 50);
  CHECK(loaded.snapshots.size() == 8);

  write_file(tmp.path / "cfg.json",
             R"({ "trace_file": ")" + trace +
                 R"(", "seed": 3, "verifier_ratio": 0.1 })");
  REQUIRE(run_cli("run --config " + (tmp.path / "cfg.json").string() +
                  " --out " + (tmp.path / "out").string()) == 0);
  const auto rows = read_csv(tmp.path / "out" / "results.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].num(kColFp) == 0.0);  // all honest
}

TEST_CASE("fixture dumps reproduce the frozen wire bytes", "[cli]") {
  TempDir tmp;
  REQUIRE(run_cli("fixtures --out " + (tmp.path / "fx").string()) == 0);

  const std::string wire = read_file(tmp.path / "fx" / "wire_messages.hex");
  CHECK(wire.find("poll 26 "
                  "0111223344026b0685ada595bf98caf6d17e7c5d832c585ab317") !=
        std::string::npos);
  CHECK(wire.find("reply 71 ") != std::string::npos);
  CHECK(wire.find("reveal 67 ") != std::string::npos);
  CHECK(wire.find("report(5) 295 ") != std::string::npos);

  for (const char* name : {"scenario_independent-liars.txt",
                           "scenario_colluding-clique.txt",
                           "scenario_silenced-witness.txt"}) {
    const std::string body = read_file(tmp.path / "fx" / name);
    INFO(name);
    CHECK(body.find("expected verdicts match") != std::string::npos);
  }
}
