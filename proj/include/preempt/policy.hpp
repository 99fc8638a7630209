#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "preempt/model.hpp"

namespace preempt {

/// Expected work lost to a single preemption that strikes a job of length T
/// started on a fresh VM: (1/F(T)) * integral of t f(t) over [0, T].
inline double expected_wasted_work(const FailureModel& m, double job_length) {
  if (!(job_length > 0.0)) throw std::domain_error("job length must be positive");
  const double mass = cdf(m, job_length);
  if (!(mass > 0.0)) throw std::domain_error("no failure mass before the job completes");
  return partial_loss_integral(m, 0.0, job_length) / mass;
}

/// First-order expected running time of a job of length T started at VM age s:
/// T plus the loss integral over the occupied age window.
inline double expected_running_time(const FailureModel& m, double job_length,
                                    double start_age = 0.0) {
  if (!(job_length >= 0.0) || !(start_age >= 0.0)) {
    throw std::domain_error("job length and start age must be non-negative");
  }
  if (auto l = deadline(m); l && start_age + job_length > *l + detail::kTimeSlack) {
    throw std::domain_error("job does not fit before the VM deadline");
  }
  return job_length + partial_loss_integral(m, start_age, start_age + job_length);
}

struct ReuseDecision {
  bool reuse;
  double expected_time_on_existing;  // E[T_s]
  double expected_time_on_new;       // E[T_0]
  double failure_prob_existing;      // job failure probability if placed at age s
  double failure_prob_new;           // job failure probability on a fresh VM
};

/// Place a job of length T on a VM of age s, or launch a fresh VM?
///
/// The decision compares the job's conditional failure probability on the aged
/// VM against a fresh one (ties reuse). The first-order expected running
/// times are reported alongside; when the job cannot finish before the
/// deadline, the existing-VM branch is costed as certain preemption: the
/// conditionally expected work lost on the doomed VM plus a full rerun on a
/// fresh VM.
inline ReuseDecision decide_reuse(const FailureModel& m, double job_length, double vm_age) {
  if (!(job_length > 0.0)) throw std::domain_error("job length must be positive");
  if (!(vm_age >= 0.0)) throw std::domain_error("VM age must be non-negative");
  const auto l = deadline(m);
  if (l) {
    if (job_length > *l + detail::kTimeSlack) {
      throw std::domain_error("job cannot fit in any single VM lifetime");
    }
    if (vm_age >= *l) throw std::domain_error("VM age must be below the deadline");
  }

  const double expected_new = expected_running_time(m, job_length, 0.0);
  const double p_new = conditional_failure_prob(m, 0.0, job_length);

  double expected_existing;
  double p_existing;
  if (l && vm_age + job_length > *l + detail::kTimeSlack) {
    p_existing = 1.0;
    const double fs = detail::raw_cdf(m, vm_age);
    const double fl = detail::raw_cdf(m, *l);
    const double mass = fl - fs;
    const double lost =
        mass > 0.0 ? (partial_loss_integral(m, vm_age, *l) - vm_age * mass) / mass : 0.0;
    expected_existing = lost + expected_new;
  } else {
    p_existing = conditional_failure_prob(m, vm_age, job_length);
    expected_existing = expected_running_time(m, job_length, vm_age);
  }

  // Ties go to reuse with enough slack that memoryless models, whose two
  // probabilities are equal up to rounding, do not churn VMs.
  const bool reuse = p_existing <= p_new + 1e-12 + 1e-9 * p_new;
  return ReuseDecision{reuse, expected_existing, expected_new, p_existing, p_new};
}

/// Smallest job length at which decide_reuse flips from reuse to a fresh VM at
/// the given age. Returns the scan horizon when it never flips: the deadline
/// L, or four mean lifetimes for unbounded models.
inline double reuse_threshold(const FailureModel& m, double vm_age) {
  const auto l = deadline(m);
  const double horizon = l ? *l : 4.0 * expected_lifetime(m);
  if (l && !(vm_age < *l)) throw std::domain_error("VM age must be below the deadline");

  constexpr int kScan = 256;
  double prev = horizon / kScan;
  if (!decide_reuse(m, prev, vm_age).reuse) return prev;
  for (int i = 2; i <= kScan; ++i) {
    const double t = horizon * i / kScan;
    if (!decide_reuse(m, t, vm_age).reuse) {
      double lo = prev, hi = t;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (decide_reuse(m, mid, vm_age).reuse ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = t;
  }
  return horizon;
}

/// Periodic checkpoint interval sqrt(2 * delta * MTTF) for memoryless failures.
inline double young_daly_interval(double mttf, double delta) {
  if (!(mttf > 0.0) || !(delta > 0.0)) {
    throw std::domain_error("MTTF and checkpoint cost must be positive");
  }
  return std::sqrt(2.0 * delta * mttf);
}

/// What happens to the failure branch of the makespan recurrence: resume on a
/// fresh VM (age clock restarts) or keep the age clock running.
enum class RestartPolicy { new_vm, same_vm };

struct CheckpointSchedule {
  std::vector<double> intervals;  // hours of work between successive checkpoints
  double expected_makespan;       // hours, relative to job start
  double step;                    // discretization step, hours
  double checkpoint_cost;         // delta, hours per checkpoint
};

namespace detail {

// Conditional segment statistics shared by the DP and the fixed-schedule
// evaluator, computed from the raw CDF and the loss integral. Ages at or past
// the deadline fail with certainty; integration never crosses L.
struct SegmentModel {
  const FailureModel& model;
  std::optional<double> bound;
  double total_mass;  // raw F(L) for bounded families, 1 otherwise

  explicit SegmentModel(const FailureModel& m)
      : model(m), bound(deadline(m)),
        total_mass(bound ? raw_cdf(m, *bound) : 1.0) {}

  double fail_prob(double t, double dt) const {
    double end = t + dt;
    if (bound) {
      if (t >= *bound) return 1.0;
      end = std::min(end, *bound);
    }
    const double fs = raw_cdf(model, t);
    const double den = total_mass - fs;
    if (!(den > 0.0)) return 1.0;
    return std::clamp((raw_cdf(model, end) - fs) / den, 0.0, 1.0);
  }

  // Expected elapsed time from t until the preemption, given one occurs in
  // (t, t+dt]. Invariant under truncation normalization.
  double loss(double t, double dt) const {
    double end = t + dt;
    if (bound) {
      if (t >= *bound) return 0.0;
      end = std::min(end, *bound);
    }
    const double mass = raw_cdf(model, end) - raw_cdf(model, t);
    if (!(mass > 0.0)) return 0.0;
    const double raw = (partial_loss_integral(model, t, end) - t * mass) / mass;
    return std::clamp(raw, 0.0, dt);
  }
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// One DP table over (remaining steps, VM age in steps). Ages on the grid are
// offset + a*step; the failure branch is supplied by the caller.
struct DpTable {
  std::vector<std::vector<double>> value;
  std::vector<std::vector<int>> choice;
};

}  // namespace detail

/// Minimum-expected-makespan checkpoint schedule by dynamic programming over
/// (remaining work, VM age), both discretized to `step`.
///
/// Each decision runs i steps and then checkpoints (cost delta, charged on
/// every segment). A segment either completes, advancing the age clock by
/// i*step + delta, or the VM is preempted first: the conditionally expected
/// partial progress is lost and the same remaining work restarts, on a fresh
/// VM under RestartPolicy::new_vm (the default), or at the continued age under
/// RestartPolicy::same_vm. Ties in the argmin go to the shorter segment, and
/// the reported schedule is the success-path extraction from the root state.
///
/// Deadline-bounded models admit no finite value under same_vm (every failure
/// path eventually strands the job past the deadline), which reports as a
/// domain error.
inline CheckpointSchedule optimal_checkpoint_schedule(const FailureModel& m, double job_length,
                                                      double start_age, double checkpoint_cost,
                                                      double step,
                                                      RestartPolicy restart = RestartPolicy::new_vm) {
  if (!(job_length > 0.0)) throw std::invalid_argument("job length must be positive");
  if (!(checkpoint_cost >= 0.0)) throw std::invalid_argument("checkpoint cost must be non-negative");
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (!(start_age >= 0.0)) throw std::invalid_argument("start age must be non-negative");

  const auto whole_steps = [&](double hours, const char* what) {
    const double q = hours / step;
    const long long n = std::llround(q);
    if (std::abs(q - static_cast<double>(n)) > 1e-6 * std::max(1.0, q)) {
      throw std::invalid_argument(std::string(what) + " must be a whole multiple of the step");
    }
    return n;
  };
  const long long n_work = whole_steps(job_length, "job length");
  const long long n_delta = whole_steps(checkpoint_cost, "checkpoint cost");
  if (n_work < 1) throw std::invalid_argument("job shorter than one step");
  if (n_work > 10000) throw std::invalid_argument("state space too large: > 1e4 work steps");

  const detail::SegmentModel seg(m);
  if (seg.bound && start_age + job_length > *seg.bound + detail::kTimeSlack) {
    throw std::domain_error("job does not fit before the VM deadline");
  }

  const int nj = static_cast<int>(n_work);
  const int nd = static_cast<int>(n_delta);
  const auto age_cap = [&](double offset) {
    long long reach = static_cast<long long>(nj) * (1 + nd);
    if (restart == RestartPolicy::same_vm && !seg.bound) reach *= 8;
    if (seg.bound) {
      const long long by_deadline =
          static_cast<long long>(std::floor((*seg.bound - offset) / step + 1e-9));
      reach = std::min(reach, std::max(by_deadline, 0LL));
    }
    if (reach > 20000) throw std::invalid_argument("state space too large: > 1e4 age steps");
    return static_cast<int>(reach);
  };

  // Raw CDF and loss-integral caches along an age grid.
  struct Grid {
    double offset;
    std::vector<double> f, pl;
  };
  const auto make_grid = [&](double offset, int cap) {
    Grid g{offset, {}, {}};
    g.f.resize(cap + 1);
    g.pl.resize(cap + 1);
    for (int a = 0; a <= cap; ++a) {
      double t = offset + a * step;
      if (seg.bound) t = std::min(t, *seg.bound);
      g.f[a] = detail::raw_cdf(m, t);
      g.pl[a] = partial_loss_integral(m, 0.0, t);
    }
    return g;
  };

  const double delta_h = checkpoint_cost;
  // Age saturation point for the unbounded same_vm variant: past it the age
  // index is clamped, which is exact for memoryless hazards.
  const bool saturate_ages = restart == RestartPolicy::same_vm && !seg.bound;

  const auto solve = [&](const Grid& g, int cap,
                         const std::vector<std::vector<double>>* fresh_value) {
    // fresh_value == nullptr: this is the fresh-VM table and failures feed
    // back into it; otherwise failures jump to (*fresh_value)[j][0] under
    // new_vm, or continue on this grid under same_vm.
    detail::DpTable table;
    table.value.assign(nj + 1, std::vector<double>(cap + 1, detail::kInf));
    table.choice.assign(nj + 1, std::vector<int>(cap + 1, -1));
    for (int a = 0; a <= cap; ++a) table.value[0][a] = 0.0;

    const auto pf_at = [&](int a, int end) {
      const double fs = g.f[a];
      const double den = seg.total_mass - fs;
      if (!(den > 0.0)) return 1.0;
      return std::clamp((g.f[end] - fs) / den, 0.0, 1.0);
    };
    const auto loss_at = [&](int a, int end, double dt) {
      const double mass = g.f[end] - g.f[a];
      if (!(mass > 0.0)) return 0.0;
      const double t = g.offset + a * step;
      return std::clamp((g.pl[end] - g.pl[a] - t * mass) / mass, 0.0, dt);
    };

    // decide(j, a, fail_value): best segment choice when the failure branch is
    // a known constant. decide_self(j, a): the state feeds its own failure
    // branch, closed by the renewal fix-point v = dt + succ + pf/ps * loss
    // (the minimum over the per-choice fix-points is the fix-point of the min).
    const auto decide = [&](int j, int a, double fail_value) {
      double best = detail::kInf;
      int best_i = -1;
      for (int i = 1; i <= j; ++i) {
        int end = a + i + nd;
        if (end > cap) {
          if (!saturate_ages) break;
          end = cap;
        }
        const double pf = pf_at(a, end);
        const double dt = i * step + delta_h;
        const double succ = (j - i == 0) ? 0.0 : table.value[j - i][end];
        const double lost = pf > 0.0 ? loss_at(a, end, dt) : 0.0;
        if (pf > 0.0 && std::isinf(fail_value)) continue;
        const double candidate = (1.0 - pf) * (dt + succ) + pf * (lost + fail_value);
        if (candidate < best) {
          best = candidate;
          best_i = i;
        }
      }
      table.value[j][a] = best;
      table.choice[j][a] = best_i;
    };
    const auto decide_self = [&](int j, int a) {
      double best = detail::kInf;
      int best_i = -1;
      for (int i = 1; i <= j; ++i) {
        int end = a + i + nd;
        if (end > cap) {
          if (!saturate_ages) break;
          end = cap;
        }
        const double pf = pf_at(a, end);
        const double ps = 1.0 - pf;
        if (!(ps > 0.0)) continue;
        const double dt = i * step + delta_h;
        const double succ = (j - i == 0) ? 0.0 : table.value[j - i][end];
        const double lost = pf > 0.0 ? loss_at(a, end, dt) : 0.0;
        const double candidate = dt + succ + pf / ps * lost;
        if (candidate < best) {
          best = candidate;
          best_i = i;
        }
      }
      table.value[j][a] = best;
      table.choice[j][a] = best_i;
    };

    for (int j = 1; j <= nj; ++j) {
      if (restart == RestartPolicy::new_vm) {
        if (fresh_value == nullptr) {
          decide_self(j, 0);
          for (int a = 1; a <= cap; ++a) decide(j, a, table.value[j][0]);
        } else {
          for (int a = 0; a <= cap; ++a) decide(j, a, (*fresh_value)[j][0]);
        }
      } else {
        // same_vm: failure continuations sit at strictly larger ages, so fill
        // ages descending; a state whose (possibly saturated) continuation is
        // itself closes with the fix-point.
        for (int a = cap; a >= 0; --a) {
          if (saturate_ages && a == cap) {
            decide_self(j, a);
          } else {
            // The failure target depends on i; evaluate choices inline.
            double best = detail::kInf;
            int best_i = -1;
            for (int i = 1; i <= j; ++i) {
              int end = a + i + nd;
              if (end > cap) {
                if (!saturate_ages) break;
                end = cap;
              }
              const double pf = pf_at(a, end);
              const double ps = 1.0 - pf;
              const double dt = i * step + delta_h;
              const double succ = (j - i == 0) ? 0.0 : table.value[j - i][end];
              const double lost = pf > 0.0 ? loss_at(a, end, dt) : 0.0;
              double candidate;
              if (end == a) {
                if (!(ps > 0.0)) continue;
                candidate = dt + succ + pf / ps * lost;
              } else {
                const double fail_v = table.value[j][end];
                if (pf > 0.0 && std::isinf(fail_v)) continue;
                candidate = ps * (dt + succ) + pf * (lost + fail_v);
              }
              if (candidate < best) {
                best = candidate;
                best_i = i;
              }
            }
            table.value[j][a] = best;
            table.choice[j][a] = best_i;
          }
        }
      }
    }
    return table;
  };

  const int fresh_cap = age_cap(0.0);
  const Grid fresh_grid = make_grid(0.0, fresh_cap);
  const detail::DpTable fresh = solve(fresh_grid, fresh_cap, nullptr);

  const bool offset_root = start_age > detail::kTimeSlack;
  detail::DpTable root;
  int root_cap = fresh_cap;
  if (offset_root) {
    root_cap = age_cap(start_age);
    const Grid root_grid = make_grid(start_age, root_cap);
    root = solve(root_grid, root_cap, &fresh.value);
  }
  const detail::DpTable& top = offset_root ? root : fresh;

  if (std::isinf(top.value[nj][0])) {
    throw std::domain_error("no finite-makespan schedule exists for this configuration");
  }

  CheckpointSchedule out;
  out.step = step;
  out.checkpoint_cost = checkpoint_cost;
  out.expected_makespan = top.value[nj][0];
  int j = nj, a = 0;
  while (j > 0) {
    const int i = top.choice[j][a];
    if (i <= 0) throw std::logic_error("schedule extraction hit an unsolved state");
    out.intervals.push_back(i * step);
    j -= i;
    a += i + nd;
  }
  return out;
}

/// Expected makespan of a job under a fixed checkpoint plan, by the same
/// success/failure recurrence as the DP (failures resume from the last
/// checkpoint on a fresh VM). For the DP-optimal schedule this reproduces the
/// DP's expected makespan.
inline double expected_makespan_with_schedule(const FailureModel& m,
                                              const std::vector<double>& intervals,
                                              double checkpoint_cost, double job_length,
                                              double start_age = 0.0) {
  if (intervals.empty()) throw std::invalid_argument("schedule has no intervals");
  double covered = 0.0;
  for (double w : intervals) {
    if (!(w > 0.0)) throw std::invalid_argument("intervals must be positive");
    covered += w;
  }
  if (std::abs(covered - job_length) > 1e-6 * std::max(1.0, job_length)) {
    throw std::invalid_argument("schedule does not cover the job length");
  }
  if (!(checkpoint_cost >= 0.0) || !(start_age >= 0.0)) {
    throw std::invalid_argument("negative checkpoint cost or start age");
  }

  const detail::SegmentModel seg(m);
  const int n = static_cast<int>(intervals.size());
  std::vector<double> prefix(n + 1, 0.0);  // elapsed work+checkpoint time before segment k
  for (int k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + intervals[k] + checkpoint_cost;

  // value[k][j]: remaining expected makespan at segment k on a VM that was
  // fresh at segment j; j == n marks the root VM (age start_age at segment 0).
  std::vector<std::vector<double>> value(n + 1, std::vector<double>(n + 1, 0.0));
  for (int k = n - 1; k >= 0; --k) {
    {
      const double dt = intervals[k] + checkpoint_cost;
      const double pf = seg.fail_prob(0.0, dt);
      const double ps = 1.0 - pf;
      if (!(ps > 0.0)) {
        throw std::domain_error("a schedule segment cannot complete even on a fresh VM");
      }
      const double lost = pf > 0.0 ? seg.loss(0.0, dt) : 0.0;
      value[k][k] = dt + value[k + 1][k] + pf / ps * lost;
    }
    for (int j = 0; j <= n; ++j) {
      if (j == k) continue;
      if (j > k && j != n) continue;  // VM cannot be launched after the segment
      const double age = (j == n ? start_age + prefix[k] : prefix[k] - prefix[j]);
      const double dt = intervals[k] + checkpoint_cost;
      const double pf = seg.fail_prob(age, dt);
      const double lost = pf > 0.0 ? seg.loss(age, dt) : 0.0;
      value[k][j] = (1.0 - pf) * (dt + value[k + 1][j]) + pf * (lost + value[k][k]);
    }
  }
  return value[0][n];
}

inline double expected_makespan_with_schedule(const FailureModel& m,
                                              const CheckpointSchedule& schedule,
                                              double job_length, double start_age = 0.0) {
  return expected_makespan_with_schedule(m, schedule.intervals, schedule.checkpoint_cost,
                                         job_length, start_age);
}

/// Uniform Young-Daly plan covering the job (the last interval may be short).
inline std::vector<double> young_daly_schedule(double job_length, double interval) {
  if (!(interval > 0.0) || !(job_length > 0.0)) {
    throw std::domain_error("job length and interval must be positive");
  }
  std::vector<double> out;
  double remaining = job_length;
  while (remaining > 1e-12) {
    const double w = std::min(interval, remaining);
    out.push_back(w);
    remaining -= w;
  }
  return out;
}

}  // namespace preempt
