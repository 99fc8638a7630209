// Command-line front end: fit models to preemption traces, analyze policies,
// emit checkpoint schedules, and run cluster simulations.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "preempt/json_io.hpp"

using namespace preempt;

namespace {

double default_deadline() {
  if (const char* env = std::getenv("PREEMPT_DEADLINE_HOURS")) {
    try {
      const double l = std::stod(env);
      if (l > 0.0) return l;
    } catch (...) {
    }
    std::cerr << "warning: ignoring unparseable PREEMPT_DEADLINE_HOURS\n";
  }
  return 24.0;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return j;
}

// Output files are written whole, after the computation succeeded, so a user
// error never leaves a partial file behind.
void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << content;
}

struct FitArgs {
  std::string input, filter_path, mapping_path, family = "bathtub", out;
  double deadline = default_deadline();
};

int cmd_fit(const FitArgs& args) {
  std::optional<ColumnMapping> mapping;
  if (!args.mapping_path.empty()) {
    mapping.emplace();
    const json names = read_json_file(args.mapping_path);
    for (const auto& [ours, theirs] : names.items()) {
      (*mapping)[ours] = theirs.get<std::string>();
    }
  }
  const auto parsed = parse_dataset_file(args.input, mapping ? &*mapping : nullptr);
  for (const auto& err : parsed.errors) {
    std::cerr << args.input << ":" << err.line << ": " << err.message << "\n";
  }
  if (parsed.records.empty()) throw std::invalid_argument("no valid records in " + args.input);

  CohortFilter filter;
  if (!args.filter_path.empty()) filter = cohort_filter_from_json(read_json_file(args.filter_path));
  const EmpiricalCdf ecdf = group_and_build(parsed.records, filter);

  const auto fit_one = [&](const std::string& family) {
    if (family == "bathtub") return fit_bathtub(ecdf, args.deadline);
    if (family == "exponential") return fit_baseline(ecdf, BaselineFamily::exponential);
    if (family == "weibull") return fit_baseline(ecdf, BaselineFamily::weibull);
    if (family == "gompertz-makeham") {
      return fit_baseline(ecdf, BaselineFamily::gompertz_makeham);
    }
    throw std::invalid_argument("unknown family '" + family + "'");
  };

  json out;
  if (args.family == "all") {
    json fits = json::array();
    std::printf("%-17s %10s %12s %s\n", "family", "r2", "residual", "converged");
    for (const char* fam : {"bathtub", "exponential", "weibull", "gompertz-makeham"}) {
      const FitResult fit = fit_one(fam);
      std::printf("%-17s %10.6f %12.6f %s\n", fit.family.c_str(), fit.r_squared,
                  fit.residual_norm, fit.converged ? "yes" : "no");
      fits.push_back(to_json(fit));
    }
    out = json{{"cohort_size", ecdf.size()}, {"fits", fits}};
  } else {
    const FitResult fit = fit_one(args.family);
    std::printf("%s fit over %zu lifetimes: r2=%.6f converged=%s\n", fit.family.c_str(),
                ecdf.size(), fit.r_squared, fit.converged ? "yes" : "no");
    out = to_json(fit);
  }
  if (!args.out.empty()) write_file(args.out, out.dump(2) + "\n");
  return 0;
}

struct ScheduleArgs {
  std::string params, out, restart = "new-vm";
  double job_length = 0.0, start_age = 0.0;
  double delta = 1.0 / 60.0, step = 1.0 / 60.0;
  double delta_minutes = 0.0, step_minutes = 0.0;  // override the hour flags
};

int cmd_schedule(const ScheduleArgs& args) {
  const FailureModel model = failure_model_from_json(read_json_file(args.params));
  const double delta = args.delta_minutes > 0.0 ? args.delta_minutes / 60.0 : args.delta;
  const double step = args.step_minutes > 0.0 ? args.step_minutes / 60.0 : args.step;
  const RestartPolicy restart = [&] {
    if (args.restart == "new-vm") return RestartPolicy::new_vm;
    if (args.restart == "same-vm") return RestartPolicy::same_vm;
    throw std::invalid_argument("--restart must be new-vm or same-vm");
  }();

  const CheckpointSchedule schedule =
      optimal_checkpoint_schedule(model, args.job_length, args.start_age, delta, step, restart);
  std::printf("intervals (minutes):");
  for (double w : schedule.intervals) std::printf(" %.6g", w * 60.0);
  std::printf("\nexpected makespan: %.6f hours\n", schedule.expected_makespan);
  if (!args.out.empty()) write_file(args.out, to_json(schedule).dump(2) + "\n");
  return 0;
}

struct AnalyzeArgs {
  std::string params, mode = "waste", sweep = "job-length", out;
  double job_length = 6.0;
  double sweep_min = -1.0, sweep_max = -1.0;
  int points = 97;
};

int cmd_analyze(const AnalyzeArgs& args) {
  const FailureModel model = failure_model_from_json(read_json_file(args.params));
  const double l = deadline(model).value_or(default_deadline());
  const FailureModel uniform{UniformDeadline(l)};
  if (args.points < 2) throw std::invalid_argument("--points must be at least 2");

  double lo = args.sweep_min, hi = args.sweep_max;
  const bool over_length = args.sweep == "job-length";
  if (args.sweep != "job-length" && args.sweep != "start-age") {
    throw std::invalid_argument("--sweep must be job-length or start-age");
  }
  if (lo < 0.0) lo = over_length ? 0.25 : 0.0;
  if (hi < 0.0) hi = over_length ? l : l - (args.mode == "waste" ? 0.0 : args.job_length);
  if (!(lo < hi) || hi > l + 1e-9) throw std::invalid_argument("invalid sweep bounds");

  std::ostringstream csv;
  const char* var = over_length ? "job_length_hours" : "start_age_hours";
  if (args.mode == "waste") {
    if (!over_length) throw std::invalid_argument("waste mode sweeps job-length");
    csv << var << ",uniform_wasted_hours,model_wasted_hours\n";
    for (int i = 0; i < args.points; ++i) {
      const double j = lo + (hi - lo) * i / (args.points - 1);
      csv << j << ',' << expected_wasted_work(uniform, j) << ','
          << expected_wasted_work(model, j) << '\n';
    }
  } else if (args.mode == "runtime") {
    csv << var << ",uniform_increase_hours,model_increase_hours\n";
    for (int i = 0; i < args.points; ++i) {
      const double x = lo + (hi - lo) * i / (args.points - 1);
      const double j = over_length ? x : args.job_length;
      const double s = over_length ? 0.0 : x;
      csv << x << ',' << expected_running_time(uniform, j, s) - j << ','
          << expected_running_time(model, j, s) - j << '\n';
    }
  } else if (args.mode == "reuse-threshold") {
    if (over_length) throw std::invalid_argument("reuse-threshold mode sweeps start-age");
    csv << var << ",uniform_threshold_hours,model_threshold_hours\n";
    for (int i = 0; i < args.points; ++i) {
      const double s = lo + (hi - lo) * i / (args.points - 1);
      csv << s << ',' << reuse_threshold(uniform, s) << ',' << reuse_threshold(model, s) << '\n';
    }
  } else {
    throw std::invalid_argument("--mode must be waste, runtime, or reuse-threshold");
  }
  if (!args.out.empty()) write_file(args.out, csv.str());
  else std::cout << csv.str();
  return 0;
}

struct SimulateArgs {
  std::string config, out;
  int replications = 10;
  long long seed = -1;
};

int cmd_simulate(const SimulateArgs& args) {
  const json cfg = read_json_file(args.config);
  ClusterConfig cluster = cluster_config_from_json(cfg);
  const BagOfJobs bag = bag_from_json(cfg);
  if (args.seed >= 0) cluster.rng_seed = static_cast<std::uint64_t>(args.seed);

  const SimulationReport report = run_simulation(cluster, bag, args.replications);
  std::printf(
      "replications=%zu failure_prob=%.4f+-%.4f inflation=%.4f+-%.4f cost_ratio=%.4f "
      "preemptions=%.1f\n",
      report.replications.size(), report.mean_failure_prob, report.std_failure_prob,
      report.mean_inflation, report.std_inflation, report.mean_cost_ratio,
      report.mean_preemptions);
  if (!args.out.empty()) {
    write_file(args.out + ".json", to_json(report).dump(2) + "\n");
    write_file(args.out + ".csv", report_to_csv(report));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained-preemption modeling toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit lifetime distributions to a preemption trace");
  fit->add_option("--input", fit_args.input, "CSV of preemption records")->required();
  fit->add_option("--filter", fit_args.filter_path, "cohort filter JSON");
  fit->add_option("--column-mapping", fit_args.mapping_path, "column-name mapping JSON");
  fit->add_option("--family", fit_args.family,
                  "bathtub|exponential|weibull|gompertz-makeham|all");
  fit->add_option("--deadline", fit_args.deadline, "maximum lifetime in hours");
  fit->add_option("--out", fit_args.out, "output JSON path");

  ScheduleArgs sched_args;
  auto* sched = app.add_subcommand("schedule", "Compute an optimal checkpoint schedule");
  sched->add_option("--params", sched_args.params, "failure model JSON")->required();
  sched->add_option("--job-length", sched_args.job_length, "hours")->required();
  sched->add_option("--start-age", sched_args.start_age, "VM age at job start, hours");
  sched->add_option("--delta", sched_args.delta, "checkpoint cost, hours");
  sched->add_option("--delta-minutes", sched_args.delta_minutes, "checkpoint cost, minutes");
  sched->add_option("--step", sched_args.step, "discretization step, hours");
  sched->add_option("--step-minutes", sched_args.step_minutes, "discretization step, minutes");
  sched->add_option("--restart", sched_args.restart, "failure branch: new-vm|same-vm");
  sched->add_option("--out", sched_args.out, "output JSON path");

  AnalyzeArgs an_args;
  auto* an = app.add_subcommand("analyze", "Sweep policy quantities against the uniform model");
  an->add_option("--params", an_args.params, "failure model JSON")->required();
  an->add_option("--mode", an_args.mode, "waste|runtime|reuse-threshold");
  an->add_option("--sweep", an_args.sweep, "job-length|start-age");
  an->add_option("--job-length", an_args.job_length, "fixed job length for start-age sweeps");
  an->add_option("--sweep-min", an_args.sweep_min, "sweep lower bound, hours");
  an->add_option("--sweep-max", an_args.sweep_max, "sweep upper bound, hours");
  an->add_option("--points", an_args.points, "grid points");
  an->add_option("--out", an_args.out, "output CSV path (stdout if omitted)");

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run the cluster simulator");
  sim->add_option("--config", sim_args.config, "cluster+bag config JSON")->required();
  sim->add_option("--replications", sim_args.replications, "independent replications");
  sim->add_option("--seed", sim_args.seed, "override the config rng_seed");
  sim->add_option("--out", sim_args.out, "output prefix (.json and .csv)");

  try {
    app.parse(argc, argv);
    if (fit->parsed()) return cmd_fit(fit_args);
    if (sched->parsed()) return cmd_schedule(sched_args);
    if (an->parsed()) return cmd_analyze(an_args);
    if (sim->parsed()) return cmd_simulate(sim_args);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
