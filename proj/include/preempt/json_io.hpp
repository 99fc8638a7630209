#pragma once

#include <string>

#include <json.hpp>

#include "preempt/fitting.hpp"
#include "preempt/ingest.hpp"
#include "preempt/model.hpp"
#include "preempt/policy.hpp"
#include "preempt/simulate.hpp"

namespace preempt {

using json = nlohmann::json;

// Models carry a "family" discriminator next to their parameter fields; the
// bathtub parameter names are part of the file contract: A, tau1, tau2, b, L.

inline json to_json(const FailureModel& m) {
  return std::visit(
      detail::overloaded{
          [](const BathtubParams& p) {
            return json{{"family", "bathtub"}, {"A", p.scale_a},        {"tau1", p.tau1},
                        {"tau2", p.tau2},      {"b", p.activation_b},   {"L", p.deadline_l}};
          },
          [](const Exponential& p) {
            return json{{"family", "exponential"}, {"lambda", p.rate}};
          },
          [](const Weibull& p) {
            return json{{"family", "weibull"}, {"lambda", p.rate}, {"k", p.shape}};
          },
          [](const GompertzMakeham& p) {
            return json{{"family", "gompertz-makeham"},
                        {"lambda", p.rate},
                        {"alpha", p.alpha},
                        {"beta", p.beta}};
          },
          [](const UniformDeadline& p) {
            return json{{"family", "uniform"}, {"L", p.deadline_l}};
          },
      },
      m.dist());
}

inline FailureModel failure_model_from_json(const json& j) {
  const json& node = j.contains("model") ? j.at("model") : j;
  std::string family = node.value("family", "");
  if (family.empty()) {
    // Sniff by fields so bare parameter objects load too.
    if (node.contains("tau1")) family = "bathtub";
    else if (node.contains("k")) family = "weibull";
    else if (node.contains("alpha")) family = "gompertz-makeham";
    else if (node.contains("lambda")) family = "exponential";
    else if (node.contains("L")) family = "uniform";
  }
  if (family == "bathtub") {
    return FailureModel(BathtubParams(node.at("A").get<double>(), node.at("tau1").get<double>(),
                                      node.at("tau2").get<double>(), node.at("b").get<double>(),
                                      node.at("L").get<double>()));
  }
  if (family == "exponential") return FailureModel(Exponential(node.at("lambda").get<double>()));
  if (family == "weibull") {
    return FailureModel(Weibull(node.at("lambda").get<double>(), node.at("k").get<double>()));
  }
  if (family == "gompertz-makeham") {
    return FailureModel(GompertzMakeham(node.at("lambda").get<double>(),
                                        node.at("alpha").get<double>(),
                                        node.at("beta").get<double>()));
  }
  if (family == "uniform") return FailureModel(UniformDeadline(node.at("L").get<double>()));
  throw std::invalid_argument("unknown failure model family '" + family + "'");
}

inline json to_json(const FitResult& fit) {
  return json{{"model", to_json(fit.model)}, {"family", fit.family},
              {"r2", fit.r_squared},         {"residual_norm", fit.residual_norm},
              {"iterations", fit.iterations}, {"converged", fit.converged}};
}

inline json to_json(const CheckpointSchedule& s) {
  json intervals = json::array();
  for (double w : s.intervals) intervals.push_back(w * 60.0);
  return json{{"intervals_minutes", intervals},
              {"expected_makespan_hours", s.expected_makespan},
              {"step_minutes", s.step * 60.0},
              {"delta_minutes", s.checkpoint_cost * 60.0}};
}

inline json to_json(const CohortFilter& f) {
  json j = json::object();
  if (f.vm_type) j["vm_type"] = *f.vm_type;
  if (f.zone) j["zone"] = *f.zone;
  if (f.workload_tag) j["workload_tag"] = *f.workload_tag;
  if (f.time_of_day) j["time_of_day"] = *f.time_of_day == TimeOfDay::day ? "day" : "night";
  if (f.days_of_week) j["days_of_week"] = *f.days_of_week;
  return j;
}

inline CohortFilter cohort_filter_from_json(const json& j) {
  CohortFilter f;
  if (j.contains("vm_type")) f.vm_type = j.at("vm_type").get<std::string>();
  if (j.contains("zone")) f.zone = j.at("zone").get<std::string>();
  if (j.contains("workload_tag")) f.workload_tag = j.at("workload_tag").get<std::string>();
  if (j.contains("time_of_day")) {
    const auto s = j.at("time_of_day").get<std::string>();
    if (s == "day") f.time_of_day = TimeOfDay::day;
    else if (s == "night") f.time_of_day = TimeOfDay::night;
    else throw std::invalid_argument("time_of_day must be 'day' or 'night'");
  }
  if (j.contains("days_of_week")) {
    f.days_of_week = std::set<int>();
    for (int d : j.at("days_of_week")) {
      if (d < 0 || d > 6) throw std::invalid_argument("days_of_week entries must be 0..6");
      f.days_of_week->insert(d);
    }
  }
  return f;
}

inline ClusterConfig cluster_config_from_json(const json& j) {
  ClusterConfig c{1, failure_model_from_json(j.at("failure_model")),
                  SchedulingPolicy::model_reuse, {}, 1.0, 0.2, 0};
  c.vm_count = j.at("vm_count").get<int>();
  const auto policy = j.value("policy", "model-reuse");
  if (policy == "model-reuse") c.policy = SchedulingPolicy::model_reuse;
  else if (policy == "always-reuse") c.policy = SchedulingPolicy::always_reuse;
  else throw std::invalid_argument("policy must be 'model-reuse' or 'always-reuse'");
  if (j.contains("checkpoint_policy")) {
    const auto& cp = j.at("checkpoint_policy");
    const auto kind = cp.value("kind", "none");
    if (kind == "none") c.checkpoint_policy.kind = CheckpointKind::none;
    else if (kind == "model-dp") c.checkpoint_policy.kind = CheckpointKind::model_dp;
    else if (kind == "young-daly") c.checkpoint_policy.kind = CheckpointKind::young_daly;
    else throw std::invalid_argument("checkpoint kind must be none|model-dp|young-daly");
    c.checkpoint_policy.young_daly_mttf = cp.value("mttf_hours", 1.0);
    c.checkpoint_policy.dp_step = cp.value("dp_step_minutes", 6.0) / 60.0;
    c.checkpoint_policy.dp_age_grid = cp.value("dp_age_grid_hours", 0.25);
  }
  c.hot_spare_ttl = j.value("hot_spare_ttl", 1.0);
  c.price_ratio = j.value("price_ratio", 0.2);
  c.rng_seed = j.value("rng_seed", std::uint64_t{0});
  return c;
}

inline BagOfJobs bag_from_json(const json& j) {
  const json& node = j.contains("bag") ? j.at("bag") : j;
  BagOfJobs bag;
  bag.job_count = node.at("job_count").get<int>();
  bag.job_length = node.at("job_length").get<double>();
  bag.checkpoint_cost = node.value("checkpoint_cost", 0.0);
  return bag;
}

inline json to_json(const ReplicationResult& r) {
  return json{{"completed", r.completed},     {"attempts", r.attempts},
              {"preemptions", r.preemptions}, {"vm_launches", r.vm_launches},
              {"failure_prob", r.failure_prob}, {"makespan_hours", r.makespan},
              {"inflation", r.inflation},     {"vm_hours", r.vm_hours},
              {"cost", r.cost},               {"cost_ratio", r.cost_ratio}};
}

inline json to_json(const SimulationReport& report) {
  json reps = json::array();
  for (const auto& r : report.replications) reps.push_back(to_json(r));
  return json{{"replications", reps},
              {"mean_failure_prob", report.mean_failure_prob},
              {"std_failure_prob", report.std_failure_prob},
              {"mean_inflation", report.mean_inflation},
              {"std_inflation", report.std_inflation},
              {"mean_makespan_hours", report.mean_makespan},
              {"std_makespan_hours", report.std_makespan},
              {"mean_cost_ratio", report.mean_cost_ratio},
              {"mean_preemptions", report.mean_preemptions},
              {"ideal_makespan_hours", report.ideal_makespan}};
}

/// One row per replication, for plotting.
inline std::string report_to_csv(const SimulationReport& report) {
  std::string out =
      "replication,completed,attempts,preemptions,vm_launches,failure_prob,"
      "makespan_hours,inflation,vm_hours,cost,cost_ratio\n";
  char buf[256];
  for (std::size_t i = 0; i < report.replications.size(); ++i) {
    const auto& r = report.replications[i];
    std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", i,
                  r.completed, r.attempts, r.preemptions, r.vm_launches, r.failure_prob,
                  r.makespan, r.inflation, r.vm_hours, r.cost, r.cost_ratio);
    out += buf;
  }
  return out;
}

}  // namespace preempt
