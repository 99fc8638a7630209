#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace preempt {

// All times are in hours throughout the library; convert at the boundaries.

namespace detail {
constexpr double kTimeSlack = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}
}  // namespace detail

/// Deadline-bounded lifetime distribution with a bathtub-shaped failure rate:
/// a decaying infant-failure process at rate 1/tau1 superposed with an
/// end-of-life reclamation process at rate 1/tau2 that activates near age b.
///
///   F(t) = A * (1 - exp(-t/tau1) + exp((t - b)/tau2)),   0 <= t <= L
///
/// Construction enforces F(0) <= 0.01 and that the raw CDF stays within [0, 1]
/// on the whole interval, so downstream clamping only ever absorbs rounding.
struct BathtubParams {
  double scale_a;
  double tau1;
  double tau2;
  double activation_b;
  double deadline_l;

  BathtubParams(double a, double tau1_, double tau2_, double b, double l)
      : scale_a(a), tau1(tau1_), tau2(tau2_), activation_b(b), deadline_l(l) {
    detail::require_positive(a, "scale A");
    detail::require_positive(tau1_, "tau1");
    detail::require_positive(tau2_, "tau2");
    detail::require_positive(b, "activation b");
    detail::require_positive(l, "deadline L");
    if (raw_cdf(0.0) > 0.01) {
      throw std::invalid_argument("bathtub parameters violate F(0) <= 0.01");
    }
    if (raw_cdf(l) > 1.0 + 1e-6) {
      throw std::invalid_argument("bathtub CDF exceeds 1 before the deadline");
    }
    double prev = raw_cdf(0.0);
    for (int i = 1; i <= 64; ++i) {
      const double val = raw_cdf(l * i / 64.0);
      if (val + 1e-12 < prev) {
        throw std::invalid_argument("bathtub CDF is not non-decreasing");
      }
      prev = val;
    }
  }

  double raw_cdf(double t) const {
    return scale_a * (-std::expm1(-t / tau1) + std::exp((t - activation_b) / tau2));
  }
  double raw_pdf(double t) const {
    return scale_a *
           (std::exp(-t / tau1) / tau1 + std::exp((t - activation_b) / tau2) / tau2);
  }
  /// Antiderivative of t * f(t).
  double loss_antiderivative(double t) const {
    return -scale_a * (t + tau1) * std::exp(-t / tau1) +
           scale_a * (t - tau2) * std::exp((t - activation_b) / tau2);
  }
};

struct Exponential {
  double rate;  // 1/hours
  explicit Exponential(double lambda) : rate(lambda) {
    detail::require_positive(lambda, "rate lambda");
  }
  double raw_cdf(double t) const { return -std::expm1(-rate * t); }
  double raw_pdf(double t) const { return rate * std::exp(-rate * t); }
  double loss_antiderivative(double t) const {
    return -(t + 1.0 / rate) * std::exp(-rate * t);
  }
  double mean() const { return 1.0 / rate; }
};

struct Weibull {
  double rate;   // 1/hours
  double shape;  // dimensionless k
  Weibull(double lambda, double k) : rate(lambda), shape(k) {
    detail::require_positive(lambda, "rate lambda");
    detail::require_positive(k, "shape k");
  }
  double raw_cdf(double t) const { return -std::expm1(-std::pow(rate * t, shape)); }
  double raw_pdf(double t) const {
    if (t == 0.0) {
      if (shape > 1.0) return 0.0;
      if (shape == 1.0) return rate;
      return std::numeric_limits<double>::infinity();
    }
    const double z = std::pow(rate * t, shape);
    return shape / t * z * std::exp(-z);
  }
  double loss_antiderivative(double t) const {
    // integral of x f(x) from 0 to t via the lower incomplete gamma function
    return boost::math::tgamma_lower(1.0 + 1.0 / shape, std::pow(rate * t, shape)) / rate;
  }
  double mean() const { return boost::math::tgamma(1.0 + 1.0 / shape) / rate; }
};

struct GompertzMakeham {
  double rate;   // age-independent hazard, 1/hours
  double alpha;  // aging hazard scale, 1/hours
  double beta;   // aging acceleration, 1/hours
  GompertzMakeham(double lambda, double a, double b) : rate(lambda), alpha(a), beta(b) {
    detail::require_positive(lambda, "rate lambda");
    detail::require_positive(a, "alpha");
    detail::require_positive(b, "beta");
  }
  double cumulative_hazard(double t) const {
    return rate * t + alpha / beta * std::expm1(beta * t);
  }
  double raw_cdf(double t) const { return -std::expm1(-cumulative_hazard(t)); }
  double raw_pdf(double t) const {
    return (rate + alpha * std::exp(beta * t)) * std::exp(-cumulative_hazard(t));
  }
  // No elementary antiderivative of t f(t); integrate numerically.
  double loss_integral(double a, double c) const {
    if (c <= a) return 0.0;
    auto integrand = [this](double t) { return t * raw_pdf(t); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, a, c, 12, 1e-12);
  }
  double effective_horizon() const {
    double hi = 1.0;
    while (raw_cdf(hi) < 1.0 - 1e-13 && hi < 1e7) hi *= 2.0;
    return hi;
  }
};

/// Degenerate-in-shape baseline: failures uniform over [0, L].
struct UniformDeadline {
  double deadline_l;
  explicit UniformDeadline(double l) : deadline_l(l) {
    detail::require_positive(l, "deadline L");
  }
  double raw_cdf(double t) const { return t / deadline_l; }
  double raw_pdf(double) const { return 1.0 / deadline_l; }
  double loss_antiderivative(double t) const { return t * t / (2.0 * deadline_l); }
};

/// Tagged union over the supported lifetime distributions. Immutable after
/// construction; every operation below is a pure function, so models can be
/// shared freely across threads.
class FailureModel {
 public:
  using Variant =
      std::variant<BathtubParams, Exponential, Weibull, GompertzMakeham, UniformDeadline>;

  FailureModel(BathtubParams p) : v_(p) {}
  FailureModel(Exponential p) : v_(p) {}
  FailureModel(Weibull p) : v_(p) {}
  FailureModel(GompertzMakeham p) : v_(p) {}
  FailureModel(UniformDeadline p) : v_(p) {}

  const Variant& dist() const { return v_; }

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&v_);
  }

 private:
  Variant v_;
};

/// Maximum lifetime for deadline-bounded families, empty otherwise.
inline std::optional<double> deadline(const FailureModel& m) {
  return std::visit(detail::overloaded{
                        [](const BathtubParams& p) { return std::optional<double>(p.deadline_l); },
                        [](const UniformDeadline& p) { return std::optional<double>(p.deadline_l); },
                        [](const auto&) { return std::optional<double>(); },
                    },
                    m.dist());
}

namespace detail {

inline void check_time(const FailureModel& m, double t) {
  if (!(t >= 0.0)) throw std::domain_error("time must be non-negative");
  if (auto l = deadline(m); l && t > *l + kTimeSlack) {
    throw std::domain_error("time exceeds the model deadline");
  }
}

inline double raw_cdf(const FailureModel& m, double t) {
  return std::visit([t](const auto& p) { return p.raw_cdf(t); }, m.dist());
}

}  // namespace detail

/// F(t), clamped to [0, 1] after evaluation.
inline double cdf(const FailureModel& m, double t) {
  detail::check_time(m, t);
  return std::clamp(detail::raw_cdf(m, t), 0.0, 1.0);
}

/// Failure density f(t) = dF/dt.
inline double pdf(const FailureModel& m, double t) {
  detail::check_time(m, t);
  return std::visit([t](const auto& p) { return p.raw_pdf(t); }, m.dist());
}

inline double survival(const FailureModel& m, double t) { return 1.0 - cdf(m, t); }

/// CDF of the truncated model in which preemption by the deadline is certain:
/// F(t) / F(L) for deadline-bounded families, the raw CDF otherwise.
inline double normalized_cdf(const FailureModel& m, double t) {
  detail::check_time(m, t);
  const double raw = detail::raw_cdf(m, t);
  if (auto l = deadline(m)) {
    const double total = detail::raw_cdf(m, *l);
    if (!(total > 0.0)) throw std::range_error("model has no failure mass before the deadline");
    return std::clamp(raw / total, 0.0, 1.0);
  }
  return std::clamp(raw, 0.0, 1.0);
}

/// Probability that a VM alive at age s is preempted within (s, s+d], under
/// the truncated model for deadline-bounded families.
inline double conditional_failure_prob(const FailureModel& m, double age_s, double horizon_d) {
  if (!(age_s >= 0.0) || !(horizon_d >= 0.0)) {
    throw std::domain_error("age and horizon must be non-negative");
  }
  detail::check_time(m, age_s);
  detail::check_time(m, age_s + horizon_d);
  const double fs = normalized_cdf(m, age_s);
  if (fs >= 1.0) throw std::range_error("VM cannot be alive at this age: F(s) >= 1");
  if (horizon_d == 0.0) return 0.0;
  const double fe = normalized_cdf(m, age_s + horizon_d);
  return std::clamp((fe - fs) / (1.0 - fs), 0.0, 1.0);
}

/// Integral of x f(x) over [a, c] with the raw (untruncated) density.
inline double partial_loss_integral(const FailureModel& m, double a, double c) {
  if (!(a >= 0.0) || !(c >= a)) throw std::domain_error("bounds must satisfy 0 <= a <= c");
  detail::check_time(m, c);
  if (a == c) return 0.0;
  return std::visit(detail::overloaded{
                        [&](const GompertzMakeham& p) { return p.loss_integral(a, c); },
                        [&](const auto& p) {
                          return p.loss_antiderivative(c) - p.loss_antiderivative(a);
                        },
                    },
                    m.dist());
}

/// Expected lifetime: the raw integral of t f(t) over [0, L] for
/// deadline-bounded families, the full distribution mean otherwise.
inline double expected_lifetime(const FailureModel& m) {
  return std::visit(
      detail::overloaded{
          [](const BathtubParams& p) {
            return p.loss_antiderivative(p.deadline_l) - p.loss_antiderivative(0.0);
          },
          [](const UniformDeadline& p) { return p.deadline_l / 2.0; },
          [](const Exponential& p) { return p.mean(); },
          [](const Weibull& p) { return p.mean(); },
          [](const GompertzMakeham& p) { return p.loss_integral(0.0, p.effective_horizon()); },
      },
      m.dist());
}

/// Inverse of the normalized CDF. For deadline-bounded families the result is
/// always within [0, L]; unbounded families invert the raw CDF.
inline double quantile(const FailureModel& m, double u) {
  if (!(u > 0.0) || !(u < 1.0)) throw std::domain_error("quantile level must be in (0, 1)");
  return std::visit(
      detail::overloaded{
          [&](const UniformDeadline& p) { return u * p.deadline_l; },
          [&](const Exponential& p) { return -std::log1p(-u) / p.rate; },
          [&](const Weibull& p) {
            return std::pow(-std::log1p(-u), 1.0 / p.shape) / p.rate;
          },
          [&](const BathtubParams& p) {
            const double target = u * p.raw_cdf(p.deadline_l);
            double lo = 0.0, hi = p.deadline_l;
            for (int i = 0; i < 200 && hi - lo > 1e-13 * p.deadline_l; ++i) {
              const double mid = 0.5 * (lo + hi);
              (p.raw_cdf(mid) < target ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
          },
          [&](const GompertzMakeham& p) {
            double hi = 1.0;
            while (p.raw_cdf(hi) < u && hi < 1e9) hi *= 2.0;
            double lo = 0.0;
            for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
              const double mid = 0.5 * (lo + hi);
              (p.raw_cdf(mid) < u ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
          },
      },
      m.dist());
}

/// Draw one lifetime by inverse-transform sampling from the normalized CDF.
/// The caller owns the RNG state, so parallel simulations can use independent
/// seeded streams.
template <class URBG>
double sample_lifetime(const FailureModel& m, URBG& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  while (u <= 0.0 || u >= 1.0) u = unit(rng);
  return quantile(m, u);
}

}  // namespace preempt
