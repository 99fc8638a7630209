#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

#include "preempt/model.hpp"
#include "preempt/policy.hpp"

namespace preempt {

/// Homogeneous batch: every job runs the same application for the same time.
struct BagOfJobs {
  int job_count = 1;
  double job_length = 1.0;      // hours
  double checkpoint_cost = 0.0; // hours per checkpoint
};

enum class SchedulingPolicy { model_reuse, always_reuse };
enum class CheckpointKind { none, model_dp, young_daly };

struct CheckpointPolicy {
  CheckpointKind kind = CheckpointKind::none;
  double young_daly_mttf = 1.0;  // hours
  double dp_step = 0.1;          // hours; job lengths round up to this grid
  double dp_age_grid = 0.25;     // hours; schedule cache granularity
};

struct ClusterConfig {
  int vm_count = 1;
  FailureModel failure_model;
  SchedulingPolicy policy = SchedulingPolicy::model_reuse;
  CheckpointPolicy checkpoint_policy;
  double hot_spare_ttl = 1.0;  // hours an idle VM is retained
  double price_ratio = 0.2;    // preemptible price / on-demand price
  std::uint64_t rng_seed = 0;
};

struct ReplicationResult {
  int completed = 0;
  int attempts = 0;     // job placements, including resumes
  int preemptions = 0;  // preemptions that killed a running job
  int vm_launches = 0;
  double failure_prob = 0.0;  // preemptions / attempts
  double makespan = 0.0;      // hours until the last job completed
  double inflation = 0.0;     // vs. the preemption- and checkpoint-free run
  double vm_hours = 0.0;
  double cost = 0.0;        // vm_hours * price_ratio
  double cost_ratio = 0.0;  // cost / on-demand preemption-free cost
};

struct SimulationReport {
  std::vector<ReplicationResult> replications;
  double mean_failure_prob = 0.0, std_failure_prob = 0.0;
  double mean_inflation = 0.0, std_inflation = 0.0;
  double mean_makespan = 0.0, std_makespan = 0.0;
  double mean_cost_ratio = 0.0;
  double mean_preemptions = 0.0;
  double ideal_makespan = 0.0;  // hours
};

namespace detail {

constexpr std::int64_t kTick = 1;  // second; all event times are whole seconds

inline std::int64_t to_seconds(double hours) {
  return std::max<std::int64_t>(kTick, std::llround(hours * 3600.0));
}

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One cluster replication. Event-ordered and strictly sequential, so a fixed
// seed reproduces the run bit for bit.
class Replication {
 public:
  Replication(const ClusterConfig& cluster, const BagOfJobs& bag, std::uint64_t seed,
              std::map<std::pair<long long, long long>, std::vector<double>>* plan_cache)
      : cluster_(cluster), bag_(bag), rng_(seed), plan_cache_(plan_cache) {
    const auto l = deadline(cluster.failure_model);
    if (l && bag.job_length > *l + kTimeSlack) {
      throw std::invalid_argument("jobs longer than the VM deadline can never finish");
    }
    effective_job_ = bag.job_length;
    if (cluster.checkpoint_policy.kind == CheckpointKind::model_dp) {
      const double step = cluster.checkpoint_policy.dp_step;
      effective_job_ = std::ceil(bag.job_length / step - 1e-9) * step;  // round up to the grid
    }
  }

  ReplicationResult run() {
    queued_ = bag_.job_count;
    jobs_.assign(bag_.job_count, Job{effective_job_, 0});
    for (int i = 0; i < std::min(cluster_.vm_count, bag_.job_count); ++i) launch_vm();
    place_queued_jobs();

    while (!events_.empty() && result_.completed < bag_.job_count) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case Event::vm_death: on_vm_death(ev.vm); break;
        case Event::job_finish: on_job_finish(ev.vm, ev.stamp); break;
        case Event::spare_expiry: on_spare_expiry(ev.vm, ev.stamp); break;
      }
      check_conservation();
    }
    if (result_.completed != bag_.job_count) {
      throw SimError("simulation drained its event queue with jobs outstanding");
    }

    for (auto& vm : vms_) {
      if (vm.alive) terminate_vm(vm);
    }
    finalize();
    return result_;
  }

 private:
  struct Job {
    double remaining;  // hours of work still to do
    int failures;
  };

  struct Vm {
    std::int64_t launch = 0, death = 0, idle_since = 0;
    int job = -1;  // queue index, -1 when idle
    bool alive = true;
    int stamp = 0;  // invalidates stale finish/expiry events
    std::vector<double> plan;
    std::int64_t job_start = 0;
  };

  struct Event {
    std::int64_t time;
    std::uint64_t seq;
    enum Kind { vm_death, job_finish, spare_expiry } kind;
    int vm;
    int stamp;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  double vm_age_hours(const Vm& vm) const { return double(now_ - vm.launch) / 3600.0; }

  void push_event(std::int64_t t, Event::Kind kind, int vm, int stamp) {
    events_.push(Event{t, seq_++, kind, vm, stamp});
  }

  int launch_vm() {
    Vm vm;
    vm.launch = now_;
    vm.death = now_ + detail::to_seconds(sample_lifetime(cluster_.failure_model, rng_));
    vm.idle_since = now_;
    vms_.push_back(vm);
    const int id = static_cast<int>(vms_.size()) - 1;
    push_event(vms_[id].death, Event::vm_death, id, 0);
    ++result_.vm_launches;
    return id;
  }

  void terminate_vm(Vm& vm) {
    vm.alive = false;
    result_.vm_hours += double(now_ - vm.launch) / 3600.0;
  }

  std::vector<double> plan_for(double remaining, double age_hours) {
    const auto& cp = cluster_.checkpoint_policy;
    switch (cp.kind) {
      case CheckpointKind::none:
        return {remaining};
      case CheckpointKind::young_daly:
        return young_daly_schedule(
            remaining, young_daly_interval(cp.young_daly_mttf, bag_.checkpoint_cost));
      case CheckpointKind::model_dp: {
        const long long steps = std::llround(remaining / cp.dp_step);
        const auto l = deadline(cluster_.failure_model);
        // Plans are cached on a coarse age grid; a placement the model policy
        // would never make (possible under always_reuse) clamps to the latest
        // start age that still fits the job plus one checkpoint, since the
        // plan is moot on a doomed VM anyway.
        double start = std::floor(age_hours / cp.dp_age_grid) * cp.dp_age_grid;
        if (l) {
          const double latest = *l - steps * cp.dp_step - bag_.checkpoint_cost;
          start = std::clamp(start, 0.0, std::max(latest, 0.0));
        }
        const auto key = std::make_pair(steps, static_cast<long long>(std::llround(start * 3600.0)));
        if (plan_cache_) {
          if (const auto it = plan_cache_->find(key); it != plan_cache_->end()) return it->second;
        }
        auto schedule = optimal_checkpoint_schedule(cluster_.failure_model, steps * cp.dp_step,
                                                    start, bag_.checkpoint_cost, cp.dp_step);
        if (plan_cache_) (*plan_cache_)[key] = schedule.intervals;
        return schedule.intervals;
      }
    }
    throw std::logic_error("unknown checkpoint kind");
  }

  bool policy_allows(const Vm& vm, double remaining) {
    if (cluster_.policy == SchedulingPolicy::always_reuse) return true;
    return decide_reuse(cluster_.failure_model, remaining, vm_age_hours(vm)).reuse;
  }

  void place_on(int vm_id, int job_id) {
    Vm& vm = vms_[vm_id];
    Job& job = jobs_[job_id];
    if (cluster_.policy == SchedulingPolicy::model_reuse &&
        !decide_reuse(cluster_.failure_model, job.remaining, vm_age_hours(vm)).reuse) {
      throw std::logic_error("model policy placed a job on a VM it should have rejected");
    }
    vm.job = job_id;
    vm.stamp += 1;
    vm.job_start = now_;
    vm.plan = plan_for(job.remaining, vm_age_hours(vm));
    ++result_.attempts;

    const bool checkpointing = cluster_.checkpoint_policy.kind != CheckpointKind::none;
    std::int64_t finish = now_;
    for (double w : vm.plan) {
      finish += detail::to_seconds(w);
      if (checkpointing && bag_.checkpoint_cost > 0.0) {
        finish += detail::to_seconds(bag_.checkpoint_cost);
      }
    }
    push_event(finish, Event::job_finish, vm_id, vm.stamp);
  }

  void place_queued_jobs() {
    // The cluster runs at most vm_count jobs at once; the rest of the bag waits.
    while (queued_ > 0 && in_flight_ < cluster_.vm_count) {
      const double remaining = jobs_[next_job_].remaining;

      int best = -1;
      double best_risk = 0.0;
      for (int id = 0; id < static_cast<int>(vms_.size()); ++id) {
        const Vm& vm = vms_[id];
        if (!vm.alive || vm.job >= 0) continue;
        if (!policy_allows(vm, remaining)) continue;
        if (cluster_.policy == SchedulingPolicy::always_reuse) {
          if (best < 0) best = id;
          continue;
        }
        const double risk =
            conditional_failure_prob(cluster_.failure_model, vm_age_hours(vm),
                                     std::min(remaining, horizon_for(vm)));
        if (best < 0 || risk < best_risk) {
          best = id;
          best_risk = risk;
        }
      }
      if (best < 0) best = launch_vm();
      --queued_;
      ++in_flight_;
      place_on(best, next_job_);
      ++next_job_;
    }
  }

  double horizon_for(const Vm& vm) const {
    const auto l = deadline(cluster_.failure_model);
    if (!l) return std::numeric_limits<double>::max();
    return std::max(*l - vm_age_hours(vm), 0.0);
  }

  void on_vm_death(int vm_id) {
    Vm& vm = vms_[vm_id];
    if (!vm.alive) return;
    const int job_id = vm.job;
    terminate_vm(vm);
    if (job_id < 0) return;

    // Preemption killed a running job: roll back to the last completed
    // checkpoint and resume on a brand-new VM.
    Job& job = jobs_[job_id];
    ++result_.preemptions;
    ++job.failures;
    if (job.failures > 1000) {
      throw SimError("job " + std::to_string(job_id) + " failed more than 1000 times");
    }
    if (cluster_.checkpoint_policy.kind != CheckpointKind::none) {
      std::int64_t t = vm.job_start;
      double done = 0.0;
      for (double w : vm.plan) {
        t += detail::to_seconds(w);
        if (bag_.checkpoint_cost > 0.0) t += detail::to_seconds(bag_.checkpoint_cost);
        if (t <= now_) done += w;
        else break;
      }
      job.remaining = std::max(job.remaining - done, 0.0);
      if (job.remaining <= 0.0) job.remaining = cluster_.checkpoint_policy.dp_step;
    }
    const int fresh = launch_vm();  // may reallocate vms_; vm is dead either way
    place_on(fresh, job_id);
  }

  void on_job_finish(int vm_id, int stamp) {
    Vm& vm = vms_[vm_id];
    if (!vm.alive || vm.stamp != stamp || vm.job < 0) return;
    jobs_[vm.job].remaining = 0.0;
    vm.job = -1;
    vm.stamp += 1;
    vm.idle_since = now_;
    ++result_.completed;
    --in_flight_;
    if (result_.completed == bag_.job_count) {
      makespan_end_ = now_;
      terminate_vm(vm);
      return;
    }
    if (queued_ > 0) {
      place_queued_jobs();  // may reallocate vms_
      if (vms_[vm_id].job < 0) retire_or_keep(vm_id);
    } else {
      // The bag is drained; resumes always go to fresh VMs, so spares are useless.
      terminate_vm(vms_[vm_id]);
    }
  }

  void retire_or_keep(int vm_id) {
    Vm& vm = vms_[vm_id];
    if (cluster_.hot_spare_ttl <= 0.0) {
      terminate_vm(vm);
      return;
    }
    push_event(now_ + detail::to_seconds(cluster_.hot_spare_ttl), Event::spare_expiry, vm_id,
               vm.stamp);
    enforce_spare_cap();
  }

  void enforce_spare_cap() {
    // Keep at most vm_count idle spares; shed the oldest beyond that.
    std::vector<int> idle;
    for (int id = 0; id < static_cast<int>(vms_.size()); ++id) {
      if (vms_[id].alive && vms_[id].job < 0) idle.push_back(id);
    }
    if (static_cast<int>(idle.size()) <= cluster_.vm_count) return;
    std::sort(idle.begin(), idle.end(),
              [&](int a, int b) { return vms_[a].launch < vms_[b].launch; });
    for (std::size_t i = 0; i + cluster_.vm_count < idle.size(); ++i) {
      terminate_vm(vms_[idle[i]]);
    }
  }

  void on_spare_expiry(int vm_id, int stamp) {
    Vm& vm = vms_[vm_id];
    if (!vm.alive || vm.stamp != stamp || vm.job >= 0) return;
    terminate_vm(vm);
  }

  void check_conservation() const {
    if (queued_ + in_flight_ + result_.completed != bag_.job_count) {
      throw std::logic_error("job conservation violated");
    }
  }

  void finalize() {
    result_.failure_prob =
        result_.attempts > 0 ? double(result_.preemptions) / double(result_.attempts) : 0.0;
    result_.makespan = double(makespan_end_) / 3600.0;
    const double ideal =
        std::ceil(double(bag_.job_count) / double(cluster_.vm_count)) * effective_job_;
    result_.inflation = (result_.makespan - ideal) / ideal;
    result_.cost = result_.vm_hours * cluster_.price_ratio;
    result_.cost_ratio = result_.cost / (bag_.job_count * effective_job_);
  }

  const ClusterConfig& cluster_;
  const BagOfJobs& bag_;
  std::mt19937_64 rng_;
  std::map<std::pair<long long, long long>, std::vector<double>>* plan_cache_;

  double effective_job_ = 0.0;
  std::vector<Vm> vms_;
  std::vector<Job> jobs_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;
  std::int64_t now_ = 0;
  std::int64_t makespan_end_ = 0;
  int queued_ = 0;
  int in_flight_ = 0;
  int next_job_ = 0;
  ReplicationResult result_;
};

}  // namespace detail

/// Simulate the cluster over the bag, `replications` times. Replication r uses
/// an RNG stream derived from (rng_seed, r), so reports are reproducible and
/// independent of how many replications run.
inline SimulationReport run_simulation(const ClusterConfig& cluster, const BagOfJobs& bag,
                                       int replications) {
  if (cluster.vm_count < 1) throw std::invalid_argument("vm_count must be >= 1");
  if (bag.job_count < 1) throw std::invalid_argument("job_count must be >= 1");
  if (!(bag.job_length > 0.0)) throw std::invalid_argument("job_length must be positive");
  if (!(bag.checkpoint_cost >= 0.0)) throw std::invalid_argument("checkpoint_cost must be >= 0");
  if (!(cluster.price_ratio > 0.0) || cluster.price_ratio > 1.0) {
    throw std::invalid_argument("price_ratio must be in (0, 1]");
  }
  if (!(cluster.hot_spare_ttl >= 0.0)) throw std::invalid_argument("hot_spare_ttl must be >= 0");
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (cluster.checkpoint_policy.kind == CheckpointKind::young_daly &&
      !(bag.checkpoint_cost > 0.0)) {
    throw std::invalid_argument("young-daly checkpointing needs a positive checkpoint cost");
  }
  if (cluster.checkpoint_policy.kind == CheckpointKind::model_dp) {
    const double step = cluster.checkpoint_policy.dp_step;
    const double q = bag.checkpoint_cost / step;
    if (std::abs(q - std::round(q)) > 1e-6 * std::max(1.0, q)) {
      throw std::invalid_argument("checkpoint_cost must be a whole multiple of dp_step");
    }
    const double job_eff = std::ceil(bag.job_length / step - 1e-9) * step;
    if (const auto l = deadline(cluster.failure_model);
        l && job_eff + bag.checkpoint_cost > *l + detail::kTimeSlack) {
      throw std::invalid_argument("job plus one checkpoint cannot fit before the deadline");
    }
  }

  SimulationReport report;
  std::map<std::pair<long long, long long>, std::vector<double>> plan_cache;
  for (int r = 0; r < replications; ++r) {
    std::seed_seq seq{cluster.rng_seed, static_cast<std::uint64_t>(r)};
    std::mt19937_64 stream(seq);
    detail::Replication rep(cluster, bag, stream(), &plan_cache);
    report.replications.push_back(rep.run());
  }

  const auto mean_of = [&](auto proj) {
    double s = 0.0;
    for (const auto& r : report.replications) s += proj(r);
    return s / double(report.replications.size());
  };
  const auto std_of = [&](auto proj, double mean) {
    if (report.replications.size() < 2) return 0.0;
    double s = 0.0;
    for (const auto& r : report.replications) s += (proj(r) - mean) * (proj(r) - mean);
    return std::sqrt(s / double(report.replications.size() - 1));
  };
  const auto fp = [](const ReplicationResult& r) { return r.failure_prob; };
  const auto infl = [](const ReplicationResult& r) { return r.inflation; };
  const auto mk = [](const ReplicationResult& r) { return r.makespan; };
  report.mean_failure_prob = mean_of(fp);
  report.std_failure_prob = std_of(fp, report.mean_failure_prob);
  report.mean_inflation = mean_of(infl);
  report.std_inflation = std_of(infl, report.mean_inflation);
  report.mean_makespan = mean_of(mk);
  report.std_makespan = std_of(mk, report.mean_makespan);
  report.mean_cost_ratio = mean_of([](const ReplicationResult& r) { return r.cost_ratio; });
  report.mean_preemptions = mean_of([](const ReplicationResult& r) { return double(r.preemptions); });
  report.ideal_makespan =
      std::ceil(double(bag.job_count) / double(cluster.vm_count)) * bag.job_length;
  return report;
}

/// Max deviation between the empirical CDF of n sampled lifetimes and the
/// normalized model CDF: the sampler correctness gate.
inline double sampled_lifetime_validation(const FailureModel& m, int n, std::uint64_t seed) {
  if (n < 1000) throw std::invalid_argument("need at least 1000 draws");
  std::mt19937_64 rng(seed);
  std::vector<double> draws(n);
  for (auto& d : draws) d = sample_lifetime(m, rng);
  std::sort(draws.begin(), draws.end());
  double worst = 0.0;
  const auto l = deadline(m);
  for (int i = 0; i < n; ++i) {
    const double t = l ? std::min(draws[i], *l) : draws[i];
    const double model = normalized_cdf(m, t);
    worst = std::max(worst, std::abs(double(i + 1) / n - model));
    worst = std::max(worst, std::abs(model - double(i) / n));
  }
  return worst;
}

}  // namespace preempt
