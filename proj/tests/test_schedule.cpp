#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sdelab/error.hpp"
#include "sdelab/schedule.hpp"
#include "support.hpp"

using namespace sdelab;

TEST_CASE("alpha_bar endpoints and monotonicity") {
  for (auto schedule : {NoiseSchedule::cosine(), NoiseSchedule::linear()}) {
    CHECK(schedule.alpha_bar(0.0) == 1.0);
    CHECK(schedule.alpha_bar(1.0) <= 1e-3);
    CHECK(schedule.alpha_bar(0.5) < schedule.alpha_bar(0.4));
    CHECK(schedule.alpha_bar(0.5) > schedule.alpha_bar(0.6));
    const auto table = schedule.alpha_bar_table();
    REQUIRE(table.size() == schedule.grid_resolution() + 1);
    for (std::size_t i = 1; i < table.size(); ++i) CHECK(table[i] < table[i - 1]);
    CHECK_THROWS_AS((void)schedule.alpha_bar(-0.1), DomainError);
    CHECK_THROWS_AS((void)schedule.alpha_bar(1.1), DomainError);
  }
}

TEST_CASE("cosine curve follows the squared-cosine form") {
  // raw form, rescaled in time so that alpha_bar(T) = 1e-3
  const double s = 0.008;
  const auto schedule = NoiseSchedule::cosine(s, 1e-3);
  auto raw = [&](double u) {
    return std::pow(std::cos((u + s) / (1 + s) * std::numbers::pi / 2), 2) /
           std::pow(std::cos(s / (1 + s) * std::numbers::pi / 2), 2);
  };
  double lo = 0.9, hi = 1.0;
  for (int i = 0; i < 200; ++i) ((raw(0.5 * (lo + hi)) > 1e-3) ? lo : hi) = 0.5 * (lo + hi);
  const double u_end = 0.5 * (lo + hi);
  for (double t : {0.05, 0.3, 0.6, 0.9, 1.0})
    CHECK(schedule.alpha_bar(t) == doctest::Approx(raw(t * u_end)).epsilon(1e-9));
  // unscaled form vanishes at T
  CHECK(raw(1.0) < 1e-30);
}

TEST_CASE("noise_variance agrees with 1 - alpha_bar") {
  for (auto schedule : {NoiseSchedule::cosine(), NoiseSchedule::linear()})
    for (double t : {1e-4, 0.01, 0.5, 1.0})
      CHECK(schedule.noise_variance(t) == doctest::Approx(1.0 - schedule.alpha_bar(t)).epsilon(1e-8));
}

TEST_CASE("VP identity f = -g^2/2 on random times") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(1e-6, 1.0);
  for (auto schedule : {NoiseSchedule::cosine(), NoiseSchedule::linear()}) {
    for (int i = 0; i < 10000; ++i) {
      const double t = unif(gen);
      const auto c = schedule.vp_coefficients(t);
      REQUIRE(c.diffusion_sq >= 0.0);
      REQUIRE(std::abs(c.drift + 0.5 * c.diffusion_sq) <= 1e-9 * std::abs(c.drift));
    }
  }
}

TEST_CASE("log-derivative matches a centered difference") {
  for (auto schedule : {NoiseSchedule::cosine(), NoiseSchedule::linear()}) {
    for (double t : {0.1, 0.5, 0.9}) {
      const double h = 1e-6;
      const double fd = (schedule.log_alpha_bar(t + h) - schedule.log_alpha_bar(t - h)) / (2 * h);
      CHECK(schedule.log_alpha_bar_derivative(t) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("cosine diffusion near t = 0 tends to its offset-limited value") {
  // with offset s the limit of -(log alpha_bar)' at 0 is 2 tan(a0) a', a0 = s/(1+s) pi/2
  const auto schedule = NoiseSchedule::cosine();
  const double g_small = schedule.vp_coefficients(1e-9).diffusion_sq;
  CHECK(g_small > 0.0);
  CHECK(g_small < schedule.vp_coefficients(0.1).diffusion_sq);
  CHECK(g_small == doctest::Approx(schedule.vp_coefficients(0.0).diffusion_sq).epsilon(1e-6));
  CHECK(g_small < 0.05);
}

TEST_CASE("integrated diffusion matches quadrature") {
  const auto schedule = NoiseSchedule::cosine();
  const double s = 0.2, t = 0.8;
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    sum += w * schedule.vp_coefficients(s + (t - s) * i / n).diffusion_sq;
  }
  sum *= (t - s) / n;
  CHECK(schedule.integrated_diffusion(s, t) == doctest::Approx(sum).epsilon(1e-7));
}

TEST_CASE("step_sigma equals the DDPM posterior standard deviation") {
  const auto schedule = NoiseSchedule::cosine();
  const double t = test::time_of_alpha_bar(schedule, 0.8);
  const double s = test::time_of_alpha_bar(schedule, 0.5);
  REQUIRE(schedule.alpha_bar(t) == doctest::Approx(0.8).epsilon(1e-12));
  // x_t = sqrt(a_t) x0 + sqrt(1 - a_t) z and x_s = sqrt(a_s / a_t) x_t + sqrt(1 - a_s / a_t) w;
  // completing the square in x_t gives the posterior precision below.
  const double at = 0.8, as = 0.5, r = as / at;
  const double precision = 1.0 / (1.0 - at) + r / (1.0 - r);
  const double oracle = std::sqrt(1.0 / precision);
  CHECK(oracle == doctest::Approx(0.38730).epsilon(1e-5));
  CHECK(step_sigma(schedule, s, t, 1.0) == doctest::Approx(oracle).epsilon(1e-9));

  CHECK(step_sigma(schedule, s, t, 0.0) == 0.0);
  CHECK(step_sigma(schedule, 0.5 + 1e-12, 0.5, 1.0) < 1e-5);
  CHECK_THROWS_AS((void)step_sigma(schedule, t, s, 1.0), OrderingError);
  CHECK_THROWS_AS((void)step_sigma(schedule, s, s, 1.0), OrderingError);
  CHECK_THROWS_AS((void)step_sigma(schedule, s, t, 1.5), DomainError);
}

TEST_CASE("reconstruction coefficient stays real") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto schedule : {NoiseSchedule::cosine(), NoiseSchedule::linear()}) {
    for (int i = 0; i < 2000; ++i) {
      double a = unif(gen), b = unif(gen);
      if (a == b) continue;
      const double s = std::max(a, b), t = std::min(a, b);
      const double sigma = step_sigma(schedule, s, t, 1.0);
      REQUIRE(1.0 - schedule.alpha_bar(t) - sigma * sigma >= -1e-15);
    }
  }
}

TEST_CASE("time grids") {
  const auto schedule = NoiseSchedule::cosine();
  CHECK(make_time_grid(schedule, 2, 1.0).times == std::vector<double>{0.0, 0.5, 1.0});
  const auto g = make_time_grid(schedule, 120, 0.6);
  CHECK(g.times.size() == 121);
  CHECK(g.back() == 0.6);
  CHECK(g.front() == 0.0);
  CHECK(make_time_grid(schedule, 1, 0.6).times == std::vector<double>{0.0, 0.6});
  for (std::size_t i = 1; i < g.times.size(); ++i) {
    CHECK(g.times[i] > g.times[i - 1]);
    CHECK(schedule.alpha_bar(g.times[i]) < schedule.alpha_bar(g.times[i - 1]));
  }
  CHECK_THROWS_AS(make_time_grid(schedule, 0, 1.0), DomainError);
  CHECK_THROWS_AS(make_time_grid(schedule, 10, 0.0), DomainError);
  CHECK_THROWS_AS(make_time_grid(schedule, 10, 1.5), DomainError);

  const auto clamped = clamp_min_time(g);
  CHECK(clamped.front() == kMinPositiveTime);
  CHECK(clamped.times[1] == g.times[1]);
  CHECK_THROWS_AS(clamp_min_time(make_time_grid(schedule, 1, 1e-6)), DomainError);
}

TEST_CASE("schedule names") {
  CHECK(parse_schedule_kind("cosine") == ScheduleKind::cosine);
  CHECK(parse_schedule_kind(to_string(ScheduleKind::linear)) == ScheduleKind::linear);
  CHECK_THROWS(parse_schedule_kind("quadratic"));
  CHECK_THROWS_AS(NoiseSchedule::cosine(0.008, 0.01), DomainError);
}
