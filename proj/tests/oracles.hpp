// Test-only reference implementations. These deliberately avoid the library's
// closed-form code paths so that analytic results can be cross-checked against
// an independent numeric route.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracles {

namespace detail {

inline double simpson_rule(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(F&& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_rule(a, m, fa, flm, fm);
  const double right = simpson_rule(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature with Richardson correction.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-10, int max_depth = 48) {
  if (b <= a) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = detail::simpson_rule(a, b, fa, fm, fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double model = cdf(samples[i]);
    worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - model));
    worst = std::max(worst, std::abs(model - static_cast<double>(i) / n));
  }
  return worst;
}

// Expected-makespan evaluator for a fixed checkpoint partition, written
// directly from the renewal recurrence: a segment of work w plus checkpoint
// cost d either completes (probability drawn from the survival of the VM's
// conditional lifetime) or fails, losing the conditionally expected partial
// progress and restarting the segment sequence from the last checkpoint on a
// fresh VM.
//
// `cond_fail(t, dt)` must return the probability that a VM alive at age t dies
// within (t, t+dt], and `cond_loss(t, dt)` the conditionally expected elapsed
// time until that death, measured from t.
struct SegmentCosts {
  std::function<double(double, double)> cond_fail;
  std::function<double(double, double)> cond_loss;
};

inline double fixed_schedule_makespan(const std::vector<double>& segments, double delta,
                                      double start_age, const SegmentCosts& costs) {
  const std::size_t n = segments.size();
  // value[k][j]: expected remaining makespan before segment k, running on a VM
  // whose age equals start-of-segment-j (j == n means the root VM at start_age).
  std::vector<std::vector<double>> value(n + 1, std::vector<double>(n + 2, 0.0));
  // elapsed[j][k]: VM age at segment k when the VM was fresh at segment j.
  auto age_at = [&](std::size_t vm_start, std::size_t k) {
    double t = vm_start == n + 1 ? start_age : 0.0;
    const std::size_t from = vm_start == n + 1 ? 0 : vm_start;
    for (std::size_t s = from; s < k; ++s) t += segments[s] + delta;
    return t;
  };
  for (std::size_t k = n; k-- > 0;) {
    // Fresh-VM value first: it is self-referential through the failure branch.
    {
      const double dt = segments[k] + delta;
      const double pf = costs.cond_fail(0.0, dt);
      const double ps = 1.0 - pf;
      if (ps <= 0.0) throw std::runtime_error("segment cannot complete on a fresh VM");
      const double loss = pf > 0.0 ? costs.cond_loss(0.0, dt) : 0.0;
      value[k][k] = dt + value[k + 1][k] + pf / ps * loss;
    }
    for (std::size_t j = 0; j <= n + 1; ++j) {
      if (j == k) continue;
      if (j < k || j == n + 1) {
        const double t = age_at(j, k);
        const double dt = segments[k] + delta;
        const double pf = costs.cond_fail(t, dt);
        const double loss = pf > 0.0 ? costs.cond_loss(t, dt) : 0.0;
        value[k][j] = (1.0 - pf) * (dt + value[k + 1][j]) + pf * (loss + value[k][k]);
      }
    }
  }
  return value[0][n + 1];
}

// Exhaustive minimum over every checkpoint partition of `steps` unit steps.
// Returns the best expected makespan; `best` receives the winning segment
// lengths in steps.
inline double enumerate_min_makespan(int steps, int delta_steps, double step_hours,
                                     double start_age, const SegmentCosts& costs,
                                     std::vector<int>* best = nullptr) {
  if (steps <= 0) throw std::invalid_argument("steps must be positive");
  double best_value = std::numeric_limits<double>::infinity();
  const std::uint32_t masks = 1u << (steps - 1);
  for (std::uint32_t mask = 0; mask < masks; ++mask) {
    std::vector<double> segments;
    std::vector<int> lengths;
    int run = 0;
    for (int s = 0; s < steps; ++s) {
      ++run;
      const bool cut = s == steps - 1 || (mask >> s) & 1u;
      if (cut) {
        segments.push_back(run * step_hours);
        lengths.push_back(run);
        run = 0;
      }
    }
    double value;
    try {
      value = fixed_schedule_makespan(segments, delta_steps * step_hours, start_age, costs);
    } catch (const std::runtime_error&) {
      continue;  // partition not completable
    }
    if (value < best_value) {
      best_value = value;
      if (best) *best = lengths;
    }
  }
  return best_value;
}

}  // namespace oracles
