#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "preempt/ecdf.hpp"
#include "preempt/fitting.hpp"
#include "preempt/ingest.hpp"
#include "preempt/model.hpp"
#include "oracles.hpp"

using namespace preempt;
using Catch::Approx;

namespace {

std::vector<double> draw_lifetimes(const FailureModel& m, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_lifetime(m, rng));
  return out;
}

}  // namespace

TEST_CASE("empirical cdf basics") {
  const EmpiricalCdf single = build_empirical_cdf({2.0});
  REQUIRE(single(1.9) == 0.0);
  REQUIRE(single(2.0) == 1.0);
  REQUIRE(single(5.0) == 1.0);

  const EmpiricalCdf four = build_empirical_cdf({4.0, 2.0, 1.0, 3.0});
  REQUIRE(four(2.5) == Approx(0.5));
  REQUIRE(four(0.5) == 0.0);
  REQUIRE(four(4.0) == 1.0);

  REQUIRE_THROWS_AS(build_empirical_cdf({}), std::invalid_argument);
  REQUIRE_THROWS_AS(build_empirical_cdf({1.0, -0.5}), std::invalid_argument);
}

TEST_CASE("empirical cdf of uniform draws stays near the generator") {
  const FailureModel uniform{UniformDeadline(24.0)};
  const auto samples = draw_lifetimes(uniform, 500, 99);
  const EmpiricalCdf ecdf = build_empirical_cdf(samples);
  double worst = 0.0;
  for (double t = 0.0; t <= 24.0; t += 0.01) {
    worst = std::max(worst, std::abs(ecdf(t) - t / 24.0));
  }
  // Dvoretzky-Kiefer-Wolfowitz at n=500: P(sup-dev > 0.09) < 0.1%.
  REQUIRE(worst < 0.09);
}

TEST_CASE("bathtub fit recovers synthetic parameters") {
  const BathtubParams truth(0.45, 1.0, 0.8, 24.0, 24.0);
  const auto samples = draw_lifetimes(FailureModel(truth), 5000, 42);
  const EmpiricalCdf ecdf = build_empirical_cdf(samples);

  const FitResult fit = fit_bathtub(ecdf, 24.0);
  REQUIRE(fit.family == "bathtub");
  REQUIRE(fit.converged);
  const auto* p = fit.model.get_if<BathtubParams>();
  REQUIRE(p != nullptr);
  // Samples come from the truncated model, so the scale refits to A/F(L); the
  // time constants are normalization-invariant.
  REQUIRE(p->tau1 == Approx(1.0).epsilon(0.2));
  REQUIRE(fit.r_squared >= 0.99);
  REQUIRE(fit.r_squared <= 1.0);

  SECTION("declared bounds are respected") {
    REQUIRE(p->scale_a > 0.0);
    REQUIRE(p->scale_a <= 1.0);
    REQUIRE(p->tau1 >= 0.01);
    REQUIRE(p->tau1 <= 24.0);
    REQUIRE(p->tau2 >= 0.01);
    REQUIRE(p->tau2 <= 24.0);
    REQUIRE(p->activation_b >= 12.0);
    REQUIRE(p->activation_b <= 36.0);
    REQUIRE(p->raw_cdf(0.0) <= 0.01);
  }

  SECTION("baselines trail the bathtub fit on bathtub data") {
    const FitResult exp_fit = fit_baseline(ecdf, BaselineFamily::exponential);
    const FitResult wbl_fit = fit_baseline(ecdf, BaselineFamily::weibull);
    const FitResult gm_fit = fit_baseline(ecdf, BaselineFamily::gompertz_makeham);
    REQUIRE(exp_fit.r_squared < fit.r_squared);
    REQUIRE(wbl_fit.r_squared < fit.r_squared);
    REQUIRE(gm_fit.r_squared < fit.r_squared);
  }
}

TEST_CASE("bathtub fit on exponential data degrades gracefully") {
  // No deadline spike to find: the fit should still return a constructible
  // model, typically with b pushed high or the infant term carrying the mass.
  const auto samples = draw_lifetimes(FailureModel(Exponential(0.4)), 3000, 17);
  std::vector<double> capped;
  for (double s : samples) capped.push_back(std::min(s, 24.0));
  const FitResult fit = fit_bathtub(build_empirical_cdf(capped), 24.0);
  const auto* p = fit.model.get_if<BathtubParams>();
  REQUIRE(p != nullptr);
  REQUIRE(p->raw_cdf(0.0) <= 0.01);
  REQUIRE(fit.r_squared > 0.9);  // the infant exponential term can carry an
                                 // exponential CDF on its own
}

TEST_CASE("exponential fit recovers the rate") {
  const auto samples = draw_lifetimes(FailureModel(Exponential(0.25)), 5000, 7);
  const EmpiricalCdf ecdf = build_empirical_cdf(samples);
  const FitResult fit = fit_baseline(ecdf, BaselineFamily::exponential);
  const auto* p = fit.model.get_if<Exponential>();
  REQUIRE(p != nullptr);
  REQUIRE(p->rate == Approx(0.25).epsilon(0.10));
}

TEST_CASE("degenerate inputs are rejected, not crashed on") {
  REQUIRE_THROWS_AS(fit_bathtub(build_empirical_cdf({2.0}), 24.0), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_baseline(build_empirical_cdf({2.0}), BaselineFamily::exponential),
                    std::invalid_argument);
  // Every VM surviving to the deadline leaves a single jump point.
  std::vector<double> all_at_deadline(100, 24.0);
  REQUIRE_THROWS_AS(fit_bathtub(build_empirical_cdf(all_at_deadline), 24.0),
                    std::invalid_argument);
}

TEST_CASE("r_squared definition") {
  const auto samples = draw_lifetimes(FailureModel(UniformDeadline(24.0)), 400, 3);
  const EmpiricalCdf ecdf = build_empirical_cdf(samples);
  const FailureModel uniform{UniformDeadline(24.0)};

  // Recompute 1 - SS_res/SS_tot by hand over the jump points.
  const auto grid = ecdf.jump_points();
  double mean = 0.0;
  for (double t : grid) mean += ecdf(t);
  mean /= static_cast<double>(grid.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (double t : grid) {
    ss_res += (t / 24.0 - ecdf(t)) * (t / 24.0 - ecdf(t));
    ss_tot += (ecdf(t) - mean) * (ecdf(t) - mean);
  }
  REQUIRE(r_squared(uniform, ecdf) == Approx(1.0 - ss_res / ss_tot).epsilon(1e-12));
  REQUIRE(r_squared(uniform, ecdf) > 0.99);
  REQUIRE(r_squared(uniform, ecdf) <= 1.0);

  SECTION("doubling the evaluation grid barely moves r2") {
    // Insert midpoints between consecutive jumps and recompute directly.
    std::vector<double> dense;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      dense.push_back(grid[i]);
      if (i + 1 < grid.size()) dense.push_back(0.5 * (grid[i] + grid[i + 1]));
    }
    double mean2 = 0.0;
    for (double t : dense) mean2 += ecdf(t);
    mean2 /= static_cast<double>(dense.size());
    double res2 = 0.0, tot2 = 0.0;
    for (double t : dense) {
      res2 += (t / 24.0 - ecdf(t)) * (t / 24.0 - ecdf(t));
      tot2 += (ecdf(t) - mean2) * (ecdf(t) - mean2);
    }
    const double dense_r2 = 1.0 - res2 / tot2;
    REQUIRE(std::abs(dense_r2 - r_squared(uniform, ecdf)) < 0.005);
  }
}

#ifdef PREEMPT_DATA_DIR
TEST_CASE("bathtub fits lead every VM shape in the sample data") {
  const auto data = parse_dataset_file(std::string(PREEMPT_DATA_DIR) + "/gcp_preemptions.csv");
  for (const char* type : {"n1-highcpu-2", "n1-highcpu-4", "n1-highcpu-8", "n1-highcpu-16",
                           "n1-highcpu-32"}) {
    CohortFilter f;
    f.vm_type = type;
    const EmpiricalCdf ecdf = group_and_build(data.records, f);
    const double bathtub = fit_bathtub(ecdf, 24.0).r_squared;
    INFO(type);
    REQUIRE(bathtub >= fit_baseline(ecdf, BaselineFamily::exponential).r_squared);
    REQUIRE(bathtub >= fit_baseline(ecdf, BaselineFamily::weibull).r_squared);
    REQUIRE(bathtub >= fit_baseline(ecdf, BaselineFamily::gompertz_makeham).r_squared);
  }
}
#endif

TEST_CASE("fit idempotence") {
  const BathtubParams truth(0.4, 1.2, 0.7, 23.8, 24.0);
  const auto first = draw_lifetimes(FailureModel(truth), 5000, 11);
  const FitResult fit1 = fit_bathtub(build_empirical_cdf(first), 24.0);

  const auto second = draw_lifetimes(fit1.model, 10000, 13);
  const FitResult fit2 = fit_bathtub(build_empirical_cdf(second), 24.0);
  REQUIRE(fit2.r_squared >= 0.99);
}
