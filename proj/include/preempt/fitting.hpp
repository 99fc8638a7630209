#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "preempt/ecdf.hpp"
#include "preempt/model.hpp"

namespace preempt {

struct FitResult {
  FailureModel model;
  std::string family;    // "bathtub" | "exponential" | "weibull" | "gompertz-makeham"
  double r_squared;
  double residual_norm;  // sqrt of the minimized sum of squared CDF residuals
  int iterations;
  bool converged;
};

enum class BaselineFamily { exponential, weibull, gompertz_makeham };

inline const char* family_name(BaselineFamily f) {
  switch (f) {
    case BaselineFamily::exponential: return "exponential";
    case BaselineFamily::weibull: return "weibull";
    case BaselineFamily::gompertz_makeham: return "gompertz-makeham";
  }
  return "?";
}

namespace detail {

struct SimplexResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Downhill simplex with standard reflection/expansion/contraction/shrink
// coefficients. Stops when the relative spread of the simplex values drops
// below `tol` or after `max_iter` iterations.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& x0, const std::vector<double>& scale,
                                 int max_iter = 500, double tol = 1e-10) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += scale[i];
  std::vector<double> vals(n + 1);
  for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

  SimplexResult out;
  auto order = [&] {
    std::vector<std::size_t> idx(n + 1);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<std::vector<double>> p2(n + 1);
    std::vector<double> v2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      p2[i] = pts[idx[i]];
      v2[i] = vals[idx[i]];
    }
    pts.swap(p2);
    vals.swap(v2);
  };

  int iter = 0;
  int stalled = 0;
  double last_best = std::numeric_limits<double>::infinity();
  for (; iter < max_iter; ++iter) {
    order();
    // Converged once the best residual stops moving (relative change below
    // tol for a stretch of iterations) or the simplex has collapsed.
    stalled = (last_best - vals[0] <= tol * (std::abs(vals[0]) + 1e-30)) ? stalled + 1 : 0;
    last_best = vals[0];
    if (stalled >= 20 || std::abs(vals[n] - vals[0]) <= tol * (std::abs(vals[0]) + 1e-30)) {
      out.converged = true;
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d) x[d] = centroid[d] + coef * (pts[n][d] - centroid[d]);
      return x;
    };

    const auto reflected = blend(-1.0);
    const double fr = f(reflected);
    if (fr < vals[0]) {
      const auto expanded = blend(-2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        pts[n] = expanded;
        vals[n] = fe;
      } else {
        pts[n] = reflected;
        vals[n] = fr;
      }
    } else if (fr < vals[n - 1]) {
      pts[n] = reflected;
      vals[n] = fr;
    } else {
      const auto contracted = blend(fr < vals[n] ? -0.5 : 0.5);
      const double fc = f(contracted);
      if (fc < std::min(fr, vals[n])) {
        pts[n] = contracted;
        vals[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t d = 0; d < n; ++d) pts[i][d] = pts[0][d] + 0.5 * (pts[i][d] - pts[0][d]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  order();
  out.x = pts[0];
  out.value = vals[0];
  out.iterations = iter;
  return out;
}

// Rounds of downhill simplex, each restarted from the previous optimum with a
// tighter simplex. Converged when a round no longer improves the residual by
// more than `tol` relative, within a total budget of `max_total` iterations.
inline SimplexResult nelder_mead_restarts(const std::function<double(const std::vector<double>&)>& f,
                                          std::vector<double> x0, std::vector<double> scale,
                                          int max_total = 500, double tol = 1e-10) {
  SimplexResult out;
  out.x = std::move(x0);
  out.value = f(out.x);
  double last = std::numeric_limits<double>::infinity();
  while (out.iterations < max_total) {
    auto round = nelder_mead(f, out.x, scale, std::min(100, max_total - out.iterations), tol);
    out.iterations += std::max(round.iterations, 1);
    if (round.value <= out.value) {
      out.x = round.x;
      out.value = round.value;
    }
    if (last - out.value <= tol * (std::abs(out.value) + 1e-30)) {
      out.converged = true;
      break;
    }
    last = out.value;
    for (double& s : scale) s *= 0.3;
  }
  return out;
}

struct Bounds {
  std::vector<double> lo, hi;
  std::vector<double> clamp(const std::vector<double>& x) const {
    std::vector<double> c(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) c[i] = std::clamp(x[i], lo[i], hi[i]);
    return c;
  }
  double violation(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double range = hi[i] - lo[i];
      const double d = std::max({0.0, lo[i] - x[i], x[i] - hi[i]}) / range;
      v += d * d;
    }
    return v;
  }
};

inline double sum_squared_residuals(const std::function<double(double)>& model_cdf,
                                    const std::vector<double>& grid,
                                    const std::vector<double>& targets) {
  double ss = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = model_cdf(grid[i]) - targets[i];
    ss += r * r;
  }
  return ss;
}

inline void require_fittable(const EmpiricalCdf& ecdf) {
  if (ecdf.jump_points().size() < 8) {
    throw std::invalid_argument("degenerate input: need at least 8 distinct lifetimes to fit");
  }
}

}  // namespace detail

/// Coefficient of determination of a model CDF against the empirical step
/// function, evaluated at the jump points. Evaluation times are clamped to the
/// model deadline so cohorts with slight clock skew remain scoreable.
inline double r_squared(const FailureModel& model, const EmpiricalCdf& ecdf) {
  const auto grid = ecdf.jump_points();
  const auto cap = deadline(model);
  double mean = 0.0;
  std::vector<double> targets(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    targets[i] = ecdf(grid[i]);
    mean += targets[i];
  }
  mean /= static_cast<double>(grid.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = cap ? std::min(grid[i], *cap) : grid[i];
    const double r = cdf(model, t) - targets[i];
    ss_res += r * r;
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (ss_tot <= 0.0) return ss_res <= 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

/// Least-squares fit of the bathtub CDF to an empirical CDF over [0, L].
/// Multi-start downhill simplex under box bounds with a soft F(0) penalty;
/// candidates that still violate F(0) <= 0.01 or push the CDF past 1 are
/// rejected. Deterministic: start points come from a fixed-seed stream.
inline FitResult fit_bathtub(const EmpiricalCdf& ecdf, double deadline_l) {
  detail::require_positive(deadline_l, "deadline L");
  detail::require_fittable(ecdf);
  const auto grid = ecdf.jump_points();
  std::vector<double> targets(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) targets[i] = ecdf(grid[i]);

  const double l = deadline_l;
  const detail::Bounds bounds{{1e-6, 0.01, 0.01, l / 2.0}, {1.0, l, l, 1.5 * l}};

  auto raw_cdf_at = [&](const std::vector<double>& x, double t) {
    return x[0] * (-std::expm1(-t / x[1]) + std::exp((t - x[3]) / x[2]));
  };
  auto objective = [&](const std::vector<double>& x) {
    const auto c = bounds.clamp(x);
    auto f = [&](double t) { return raw_cdf_at(c, std::min(t, l)); };
    double ss = detail::sum_squared_residuals(f, grid, targets);
    const double f0 = raw_cdf_at(c, 0.0);
    ss += 100.0 * f0 * f0;
    const double overshoot = std::max(0.0, raw_cdf_at(c, l) - 1.0);
    ss += 1000.0 * overshoot * overshoot;
    return ss + 10.0 * bounds.violation(x);
  };

  // Median lifetime of the early samples seeds the infant time constant.
  std::vector<double> early;
  for (double v : ecdf.sorted_lifetimes()) {
    if (v < l / 2.0) early.push_back(v);
  }
  const double tau1_init =
      early.empty() ? l / 4.0 : std::clamp(early[early.size() / 2], 0.01, l);

  std::vector<std::vector<double>> starts;
  starts.push_back({0.45, tau1_init, 0.8, l});
  std::mt19937_64 rng(0x5eed5eedULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 15; ++i) {
    std::vector<double> s(4);
    for (int d = 0; d < 4; ++d) s[d] = bounds.lo[d] + unit(rng) * (bounds.hi[d] - bounds.lo[d]);
    starts.push_back(s);
  }

  detail::SimplexResult best;
  bool have_valid = false;
  std::vector<double> best_raw;
  double best_raw_value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    std::vector<double> scale(4);
    for (int d = 0; d < 4; ++d) scale[d] = 0.1 * (bounds.hi[d] - bounds.lo[d]);
    auto res = detail::nelder_mead_restarts(objective, s, scale);
    res.x = bounds.clamp(res.x);
    // Fits of truncated data want the CDF to end exactly at 1; rescale away a
    // small numerical overshoot instead of rejecting the candidate.
    const double top = raw_cdf_at(res.x, l);
    if (top > 1.0 && top < 1.01) {
      res.x[0] /= top;
      res.value = objective(res.x);
    }
    if (res.value < best_raw_value) {
      best_raw_value = res.value;
      best_raw = res.x;
    }
    const bool feasible =
        raw_cdf_at(res.x, 0.0) <= 0.01 && raw_cdf_at(res.x, l) <= 1.0 + 1e-6;
    if (feasible && (!have_valid || res.value < best.value)) {
      best = res;
      have_valid = true;
    }
  }

  std::vector<double> x = have_valid ? best.x : best_raw;
  if (!have_valid) {
    // Repair into the feasible region so a constructible model is always
    // reported; the result is flagged as not converged.
    x[3] = std::max(x[3], x[2] * std::log(100.0 * x[0]));
    x[3] = std::min(x[3], 1.5 * l);
    const double top = x[0] * (-std::expm1(-l / x[1]) + std::exp((l - x[3]) / x[2]));
    if (top > 1.0) x[0] /= top;
  }

  const BathtubParams params(x[0], x[1], x[2], x[3], l);
  const FailureModel model(params);
  auto f = [&](double t) { return params.raw_cdf(std::min(t, l)); };
  const double ss = detail::sum_squared_residuals(f, grid, targets);
  return FitResult{model,
                   "bathtub",
                   r_squared(model, ecdf),
                   std::sqrt(ss),
                   have_valid ? best.iterations : 0,
                   have_valid && best.converged};
}

/// Least-squares fit of a baseline family, with rate parameters bound to
/// [1e-4, 1e3] (shape to [1e-2, 1e2] for Weibull).
inline FitResult fit_baseline(const EmpiricalCdf& ecdf, BaselineFamily family) {
  detail::require_fittable(ecdf);
  const auto grid = ecdf.jump_points();
  std::vector<double> targets(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) targets[i] = ecdf(grid[i]);

  const double mean_lifetime =
      std::accumulate(grid.begin(), grid.end(), 0.0) / static_cast<double>(grid.size());
  const double rate_guess = 1.0 / std::max(mean_lifetime, 1e-3);

  detail::Bounds bounds;
  std::vector<double> init;
  std::function<double(const std::vector<double>&, double)> cdf_at;
  switch (family) {
    case BaselineFamily::exponential:
      bounds = {{1e-4}, {1e3}};
      init = {rate_guess};
      cdf_at = [](const std::vector<double>& x, double t) { return -std::expm1(-x[0] * t); };
      break;
    case BaselineFamily::weibull:
      bounds = {{1e-4, 1e-2}, {1e3, 1e2}};
      init = {rate_guess, 1.0};
      cdf_at = [](const std::vector<double>& x, double t) {
        return -std::expm1(-std::pow(x[0] * t, x[1]));
      };
      break;
    case BaselineFamily::gompertz_makeham:
      bounds = {{1e-4, 1e-4, 1e-4}, {1e3, 1e3, 1e3}};
      init = {0.5 * rate_guess, 0.1 * rate_guess, rate_guess};
      cdf_at = [](const std::vector<double>& x, double t) {
        return -std::expm1(-(x[0] * t + x[1] / x[2] * std::expm1(x[2] * t)));
      };
      break;
  }

  auto objective = [&](const std::vector<double>& x) {
    const auto c = bounds.clamp(x);
    auto f = [&](double t) { return cdf_at(c, t); };
    return detail::sum_squared_residuals(f, grid, targets) + 10.0 * bounds.violation(x);
  };

  std::vector<std::vector<double>> starts{init};
  std::mt19937_64 rng(0xba5e11e5ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 7; ++i) {
    std::vector<double> s(init.size());
    for (std::size_t d = 0; d < init.size(); ++d) {
      // Log-uniform over the bound range keeps the rate scales reachable.
      s[d] = bounds.lo[d] * std::pow(bounds.hi[d] / bounds.lo[d], unit(rng));
    }
    starts.push_back(s);
  }

  detail::SimplexResult best;
  for (const auto& s : starts) {
    std::vector<double> scale(s.size());
    for (std::size_t d = 0; d < s.size(); ++d) scale[d] = std::max(0.25 * s[d], 1e-4);
    auto res = detail::nelder_mead_restarts(objective, s, scale);
    res.x = bounds.clamp(res.x);
    if (best.x.empty() || res.value < best.value) best = res;
  }

  FailureModel model = [&]() -> FailureModel {
    switch (family) {
      case BaselineFamily::exponential: return FailureModel(Exponential(best.x[0]));
      case BaselineFamily::weibull: return FailureModel(Weibull(best.x[0], best.x[1]));
      case BaselineFamily::gompertz_makeham:
        return FailureModel(GompertzMakeham(best.x[0], best.x[1], best.x[2]));
    }
    throw std::logic_error("unreachable");
  }();

  auto f = [&](double t) { return cdf_at(best.x, t); };
  const double ss = detail::sum_squared_residuals(f, grid, targets);
  return FitResult{model,        family_name(family), r_squared(model, ecdf),
                   std::sqrt(ss), best.iterations,     best.converged};
}

}  // namespace preempt
