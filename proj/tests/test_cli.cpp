#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <random>

#include <json.hpp>

#ifndef PREEMPT_CLI_PATH
#define PREEMPT_CLI_PATH "preempt"
#endif
#ifndef PREEMPT_DATA_DIR
#define PREEMPT_DATA_DIR "data"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run_cli(const std::string& args, bool capture_stderr = false) {
  const std::string cmd = std::string(PREEMPT_CLI_PATH) + " " + args +
                          (capture_stderr ? " 2>&1" : " 2>/dev/null");
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "preempt_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_scratch(const std::string& name, const std::string& content) {
  const auto path = scratch_dir() / name;
  std::ofstream(path) << content;
  return path.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kDataset = std::string(PREEMPT_DATA_DIR) + "/gcp_preemptions.csv";
const char* kBathtubModel =
    R"({"family":"bathtub","A":0.4,"tau1":1.0,"tau2":0.8,"b":23.68,"L":24.0})";

}  // namespace

TEST_CASE("cli: help exits cleanly") {
  REQUIRE(run_cli("--help").exit_code == 0);
  REQUIRE(run_cli("fit --help").exit_code == 0);
}

TEST_CASE("cli: fit ranks the bathtub family first on the sample cohort") {
  const auto filter = write_scratch("filter16.json",
                                    R"({"vm_type":"n1-highcpu-16","zone":"us-east1-b"})");
  const auto out = (scratch_dir() / "fit_all.json").string();
  const auto r = run_cli("fit --input " + kDataset + " --filter " + filter +
                         " --family all --out " + out);
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(slurp(out));
  REQUIRE(doc.at("cohort_size").get<int>() >= 100);
  double bathtub_r2 = -1.0;
  double best_other = -1.0;
  for (const auto& fit : doc.at("fits")) {
    const double r2 = fit.at("r2").get<double>();
    if (fit.at("family") == "bathtub") bathtub_r2 = r2;
    else best_other = std::max(best_other, r2);
  }
  REQUIRE(bathtub_r2 > best_other);
}

TEST_CASE("cli: fit adapts foreign headers and reports bad rows by line") {
  std::string csv = "machine,where,when,hours,tag,batch\n";
  csv += "n1-highcpu-2,us-east1-b,2019-02-14T08:30:00Z,26.0,idle,\n";  // out of range
  std::mt19937_64 rng(5);
  for (int i = 0; i < 24; ++i) {
    csv += "n1-highcpu-2,us-east1-b,2019-02-14T08:30:00Z," +
           std::to_string(0.5 + 0.9 * (i + (rng() % 7) / 8.0)) + ",idle,\n";
  }
  const auto input = write_scratch("foreign.csv", csv);
  const auto mapping = write_scratch("mapping.json",
                                     R"({"vm_type":"machine","zone":"where",
                                         "launch_timestamp":"when","lifetime_hours":"hours",
                                         "workload_tag":"tag","cohort_size":"batch"})");
  // Capture stderr as well: the bad row must be reported with its line number.
  const auto r = run_cli("fit --input " + input + " --column-mapping " + mapping +
                         " --family exponential",
                         /*capture_stderr=*/true);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find(":2: ") != std::string::npos);
  REQUIRE(r.out.find("exponential fit over 24 lifetimes") != std::string::npos);
}

TEST_CASE("cli: fit with a missing input exits 1 and writes nothing") {
  const auto out = (scratch_dir() / "never.json").string();
  std::error_code ec;
  fs::remove(out, ec);
  const auto r = run_cli("fit --input /nonexistent.csv --out " + out);
  REQUIRE(r.exit_code == 1);
  REQUIRE_FALSE(fs::exists(out));
}

TEST_CASE("cli: schedule emits monotone intervals for a fresh VM") {
  const auto params = write_scratch("model.json", kBathtubModel);
  const auto out = (scratch_dir() / "sched.json").string();
  const auto r = run_cli("schedule --params " + params +
                         " --job-length 5 --delta-minutes 1 --step-minutes 1 --out " + out);
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(slurp(out));
  const auto intervals = doc.at("intervals_minutes").get<std::vector<double>>();
  REQUIRE(intervals.size() >= 3);
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i) {
    REQUIRE(intervals[i + 1] >= intervals[i]);
  }
  REQUIRE(doc.at("expected_makespan_hours").get<double>() >= 5.0);

  SECTION("a memoryless model gets near-uniform intervals") {
    const auto expo = write_scratch("expo.json", R"({"family":"exponential","lambda":1.0})");
    const auto r2 = run_cli("schedule --params " + expo +
                            " --job-length 2 --delta-minutes 1 --step-minutes 1 --out " + out);
    REQUIRE(r2.exit_code == 0);
    const auto ints = json::parse(slurp(out)).at("intervals_minutes").get<std::vector<double>>();
    double lo = 1e30, hi = 0.0;
    for (std::size_t i = 0; i + 1 < ints.size(); ++i) {
      lo = std::min(lo, ints[i]);
      hi = std::max(hi, ints[i]);
    }
    REQUIRE(hi - lo <= 1.0 + 1e-9);
  }

  SECTION("a zero step is a user error") {
    REQUIRE(run_cli("schedule --params " + params + " --job-length 5 --step 0").exit_code == 1);
  }
}

TEST_CASE("cli: analyze reproduces the uniform closed forms") {
  const auto params = write_scratch("model.json", kBathtubModel);

  SECTION("wasted work is half the job length under uniform failures") {
    const auto r = run_cli("analyze --params " + params +
                           " --mode waste --sweep-min 1 --sweep-max 20 --points 20");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
      double j, uniform, model;
      REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &j, &uniform, &model) == 3);
      REQUIRE(uniform == Catch::Approx(j / 2.0).margin(1e-12));
    }
  }

  SECTION("runtime increase is J^2/48 under uniform failures, with a crossover") {
    const auto r = run_cli("analyze --params " + params +
                           " --mode runtime --sweep-min 1 --sweep-max 9 --points 9");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    double cross = -1.0, prev_j = 0.0;
    bool model_was_above = true;
    while (std::getline(lines, line)) {
      double j, uniform, model;
      REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &j, &uniform, &model) == 3);
      REQUIRE(uniform == Catch::Approx(j * j / 48.0).margin(1e-12));
      if (model_was_above && model < uniform) {
        cross = 0.5 * (prev_j + j);
        model_was_above = false;
      }
      prev_j = j;
    }
    // Short jobs suffer more under the bathtub's infant phase; long jobs less.
    REQUIRE(cross > 3.0);
    REQUIRE(cross < 7.0);
  }

  SECTION("bad sweep bounds are a user error") {
    REQUIRE(run_cli("analyze --params " + params + " --mode waste --sweep-min 9 --sweep-max 1")
                .exit_code == 1);
  }
}

TEST_CASE("cli: simulate is byte-deterministic for a fixed seed") {
  const auto config = write_scratch("sim.json", std::string(R"({
    "vm_count": 8, "failure_model": )") + kBathtubModel + R"(,
    "policy": "model-reuse", "hot_spare_ttl": 1.0, "price_ratio": 0.2, "rng_seed": 9,
    "bag": {"job_count": 40, "job_length": 2.0, "checkpoint_cost": 0.0}
  })");
  const auto out1 = (scratch_dir() / "sim1").string();
  const auto out2 = (scratch_dir() / "sim2").string();
  REQUIRE(run_cli("simulate --config " + config + " --replications 4 --out " + out1).exit_code == 0);
  REQUIRE(run_cli("simulate --config " + config + " --replications 4 --out " + out2).exit_code == 0);
  REQUIRE(slurp(out1 + ".json") == slurp(out2 + ".json"));
  REQUIRE(slurp(out1 + ".csv") == slurp(out2 + ".csv"));
  REQUIRE_FALSE(slurp(out1 + ".csv").empty());

  SECTION("policy comparison favors the model-aware scheduler") {
    const auto always = write_scratch("sim_always.json", std::string(R"({
      "vm_count": 8, "failure_model": )") + kBathtubModel + R"(,
      "policy": "always-reuse", "hot_spare_ttl": 1.0, "price_ratio": 0.2, "rng_seed": 9,
      "bag": {"job_count": 40, "job_length": 6.0, "checkpoint_cost": 0.0}
    })");
    const auto model = write_scratch("sim_model.json", std::string(R"({
      "vm_count": 8, "failure_model": )") + kBathtubModel + R"(,
      "policy": "model-reuse", "hot_spare_ttl": 1.0, "price_ratio": 0.2, "rng_seed": 9,
      "bag": {"job_count": 40, "job_length": 6.0, "checkpoint_cost": 0.0}
    })");
    const auto ra = run_cli("simulate --config " + always + " --replications 6 --out " +
                            (scratch_dir() / "sa").string());
    const auto rm = run_cli("simulate --config " + model + " --replications 6 --out " +
                            (scratch_dir() / "sm").string());
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rm.exit_code == 0);
    const json a = json::parse(slurp((scratch_dir() / "sa").string() + ".json"));
    const json m = json::parse(slurp((scratch_dir() / "sm").string() + ".json"));
    REQUIRE(m.at("mean_failure_prob").get<double>() < a.at("mean_failure_prob").get<double>());
  }

  SECTION("a missing config is a user error") {
    REQUIRE(run_cli("simulate --config /nonexistent.json").exit_code == 1);
  }
}
