#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace preempt {

/// Right-continuous step CDF over observed lifetimes: value at t is the
/// fraction of samples <= t.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw std::invalid_argument("empirical CDF needs at least one sample");
    for (double v : sorted_) {
      if (!(v >= 0.0)) throw std::invalid_argument("lifetime samples must be non-negative");
    }
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double t) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted_lifetimes() const { return sorted_; }
  double min_lifetime() const { return sorted_.front(); }
  double max_lifetime() const { return sorted_.back(); }

  /// Distinct sample values: the jump points of the step function.
  std::vector<double> jump_points() const {
    std::vector<double> distinct(sorted_);
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    return distinct;
  }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalCdf build_empirical_cdf(std::vector<double> samples) {
  return EmpiricalCdf(std::move(samples));
}

}  // namespace preempt
