#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "sdelab/error.hpp"
#include "sdelab/metrics.hpp"
#include "support.hpp"

using namespace sdelab;

namespace {

constexpr double kTarget = 2.80685;  // ln(1/2) + 8/2 - 1/2

std::vector<double> normal_draws(std::uint64_t seed, std::size_t n, double mean, double var) {
  std::vector<double> x(n);
  CounterRng(seed, 0).normals(StreamKind::aux, 0, x);
  for (auto& v : x) v = mean + std::sqrt(var) * v;
  return x;
}

double log_normal(double x, double m, double v) {
  return -0.5 * std::log(2 * std::numbers::pi * v) - (x - m) * (x - m) / (2 * v);
}

}  // namespace

TEST_CASE("closed-form Gaussian KL") {
  CHECK(kl_gaussian(0.3, 2.0, 0.3, 2.0) == 0.0);
  CHECK(kl_gaussian(2, 4, 0, 1) == doctest::Approx(std::log(0.5) + 4.0 - 0.5).epsilon(1e-14));
  CHECK(kl_gaussian(2, 4, 0, 1) == doctest::Approx(kTarget).epsilon(1e-6));
  CHECK(kl_gaussian(0, 1, 2, 4) != doctest::Approx(kl_gaussian(2, 4, 0, 1)));
  CHECK_THROWS_AS(kl_gaussian(0, 0, 0, 1), DomainError);
  CHECK_THROWS_AS(kl_gaussian(0, 1, 0, -1), DomainError);
}

TEST_CASE("Monte-Carlo KL") {
  const auto same = normal_draws(1, 100000, 0, 1);
  const auto zero = kl_mc(same, [](double x) { return log_normal(x, 0, 1); },
                          [](double x) { return log_normal(x, 0, 1); });
  CHECK(std::abs(zero.value) <= 3 * zero.std_error + 1e-15);

  const auto xs = normal_draws(2, 100000, 2, 4);
  const auto e = kl_mc(xs, [](double x) { return log_normal(x, 2, 4); },
                       [](double x) { return log_normal(x, 0, 1); });
  CHECK(e.used == 100000);
  CHECK(std::abs(e.value - kl_gaussian(2, 4, 0, 1)) < 3 * e.std_error);

  // samples where a density is not finite are dropped and counted
  const auto dropped = kl_mc(xs, [](double x) { return log_normal(x, 2, 4); },
                             [](double x) { return x > 6 ? -std::numeric_limits<double>::infinity() : log_normal(x, 0, 1); });
  CHECK(dropped.excluded > 0);
  CHECK(dropped.used + dropped.excluded == xs.size());
  CHECK_THROWS_AS(kl_mc(std::vector<double>{1.0}, [](double) { return NAN; }, [](double) { return 0.0; }), DomainError);
}

TEST_CASE("Monte-Carlo KL between mixture marginals at two times") {
  const auto schedule = NoiseSchedule::cosine();
  const GaussianMixture1D gm{0.5, 0.2};
  const double t = 0.2, s = 0.4;
  const double a = schedule.alpha_bar(t);
  const std::size_t n = 100000;
  std::vector<double> z(n), u(n), xs(n);
  CounterRng(3, 0).normals(StreamKind::aux, 0, z);
  CounterRng(3, 0).uniforms(StreamKind::aux, 1, u);
  std::vector<double> z0(n);
  CounterRng(3, 0).normals(StreamKind::aux, 2, z0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = (u[i] < 0.5 ? -gm.mu : gm.mu) + gm.sigma * z0[i];
    xs[i] = std::sqrt(a) * x0 + std::sqrt(1 - a) * z[i];
  }
  auto lt = [&](double x) { return gm1d_log_density(gm, schedule, x, t); };
  auto ls = [&](double x) { return gm1d_log_density(gm, schedule, x, s); };
  const auto e = kl_mc(xs, lt, ls);
  // trapezoid quadrature of the analytic integrand
  double truth = 0.0;
  const int k = 40000;
  const double lo = -8, h = 16.0 / k;
  for (int i = 0; i <= k; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == k) ? 0.5 : 1.0;
    truth += w * h * std::exp(lt(x)) * (lt(x) - ls(x));
  }
  CHECK(truth > 0.0);
  CHECK(e.value > 0.0);
  CHECK(std::abs(e.value - truth) < 3 * e.std_error);
}

TEST_CASE("histogram KL") {
  const auto a = normal_draws(4, 100000, 2, 4);
  const auto b = normal_draws(5, 100000, 0, 1);
  CHECK(kl_histogram(a, a) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const double h = kl_histogram(a, b);
  CHECK(std::abs(h - kTarget) < 0.15 * kTarget);
  const double hd = kl_histogram_to_density(a, [](double x) { return log_normal(x, 0, 1); });
  CHECK(std::abs(hd - kTarget) < 0.15 * kTarget);
  CHECK(histogram_bias_band(a, b) > 0.0);

  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto p = normal_draws(100 + k, 50, 0.1 * static_cast<double>(k % 7), 1.0 + 0.2 * static_cast<double>(k % 5));
    const auto q = normal_draws(300 + k, 80, -0.3, 2.0);
    CHECK(kl_histogram(p, q) >= 0.0);
  }
  HistogramOptions bad;
  bad.lo = bad.hi = 1.0;
  CHECK_THROWS_AS(kl_histogram(a, b, bad), DomainError);
  CHECK_THROWS_AS(kl_histogram(std::vector<double>{}, b), DomainError);

  const auto probs = histogram_probabilities(a);
  double total = 0.0;
  for (double p : probs) total += p;
  CHECK(probs.size() == 200);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Monte-Carlo Fisher divergence") {
  const double mu = 1.0, V = 2.0, m = -0.5, v = 0.5;
  const auto xs = normal_draws(6, 100000, mu, V);
  auto s_tilde = [&](double x) { return -(x - mu) / V; };
  auto s = [&](double x) { return -(x - m) / v; };
  CHECK(fisher_mc(xs, s, s).value == 0.0);
  // (x - m)/v - (x - mu)/V is linear in y = x - mu; its second moment under N(mu, V)
  const double closed = V * std::pow(1 / v - 1 / V, 2) + (mu - m) * (mu - m) / (v * v);
  CHECK(gaussian_fisher(mu, V, m, v) == doctest::Approx(closed).epsilon(1e-13));
  const auto e = fisher_mc(xs, s_tilde, s);
  CHECK(e.value >= 0.0);
  CHECK(std::abs(e.value - closed) < 3 * e.std_error);
  const double c = 2.5;
  const auto scaled = fisher_mc(xs, [&](double x) { return s(x) + c * (s_tilde(x) - s(x)); }, s);
  CHECK(std::abs(scaled.value / e.value - c * c) < 3 * scaled.std_error / e.value);
  CHECK_THROWS_AS(gaussian_fisher(0, 0, 0, 1), DomainError);
}

TEST_CASE("moment oracle") {
  const auto schedule = NoiseSchedule::cosine();
  const GaussianData data{0.0, 0.25};
  const auto grid = make_time_grid(schedule, 500, 0.6);
  const auto top = gaussian_marginal(data, schedule, 0.6);
  const auto sde = gaussian_reverse_sde_moments(data, schedule, top.mean, top.variance, grid);
  const auto ode = gaussian_probability_flow_moments(data, schedule, top.mean, top.variance, grid);
  REQUIRE(sde.times.size() == grid.times.size());
  for (std::size_t i = 0; i < grid.times.size(); ++i) {
    const double a = schedule.alpha_bar(grid.times[i]);
    CHECK(std::abs(sde.variance[i] - (a * 0.25 + 1 - a)) < 1e-6);
    CHECK(std::abs(ode.variance[i] - (a * 0.25 + 1 - a)) < 1e-6);
    CHECK(std::abs(sde.mean[i]) < 1e-12);
  }

  const TimeGrid single{{0.6}};
  const auto same = gaussian_reverse_sde_moments(data, schedule, 1.5, 3.0, single);
  CHECK(same.mean.back() == 1.5);
  CHECK(same.variance.back() == 3.0);

  // a nearly degenerate prior spreads toward the true marginal
  const auto pt = gaussian_reverse_sde_moments(data, schedule, 0.0, 1e-8, grid);
  double last = INFINITY;
  for (std::size_t i = grid.times.size(); i-- > 0;) {
    const auto q = gaussian_marginal(data, schedule, grid.times[i]);
    const double kl = kl_gaussian(pt.mean[i], pt.variance[i], q.mean, q.variance);
    CHECK(kl <= last + 1e-12);
    last = kl;
  }
  CHECK(pt.variance.front() > 1e-4);
  CHECK_THROWS_AS(gaussian_reverse_sde_moments(data, schedule, 0.0, 0.0, grid), DomainError);
}

TEST_CASE("exact theorem checks on the Gaussian testbed") {
  const auto schedule = NoiseSchedule::cosine();
  const GaussianData data{0.5, 0.25};
  const auto grid = make_time_grid(schedule, 2000, 1.0);
  const auto t1 = theorem1_check_exact(data, schedule, 2.0, 4.0, grid);
  CHECK(t1.passed);
  CHECK(t1.residual < 1e-3);
  for (std::size_t i = 1; i < t1.report.kl.size(); ++i) CHECK(t1.report.kl[i] < t1.report.kl[i - 1]);
  const auto fine = theorem1_check_exact(data, schedule, 2.0, 4.0, make_time_grid(schedule, 4000, 1.0));
  CHECK(t1.residual / fine.residual >= 3.0);

  const auto top = gaussian_marginal(data, schedule, 1.0);
  const auto matched = theorem1_check_exact(data, schedule, top.mean, top.variance, grid);
  CHECK(matched.trivial_zero);
  for (double kl : matched.report.kl) CHECK(std::abs(kl) < 1e-10);

  const auto t2 = theorem2_check_exact(data, schedule, 2.0, 4.0, grid);
  CHECK(t2.passed);
  for (double kl : t2.report.kl) CHECK(std::abs(kl - t2.report.kl.front()) < 1e-6);

  const GaussianData unit{0.0, 1.0};
  CHECK(lsi_rate_check(unit, schedule, 2.0, 4.0, grid).passed);
  CHECK(lsi_rate_check(unit, schedule, 2.0, 4.0, grid, 5.0).passed);
  CHECK_THROWS_AS(lsi_rate_check(unit, schedule, 2.0, 4.0, grid, 0.5), DomainError);
}

TEST_CASE("divergence report csv") {
  DivergenceReport r;
  r.times = {1.0, 0.5};
  r.kl = {2.0, 1.0};
  r.kl_stderr = {0.0, 0.0};
  const auto csv = r.to_csv();
  CHECK(csv.rfind("time,kl,kl_stderr,fisher\n", 0) == 0);
  CHECK(csv.find("0.5,1,0,") != std::string::npos);
}

TEST_CASE("nearest dataset point") {
  const EmpiricalDataset ds(2, {0, 0, 2, 0, 1, 5});
  const std::vector<double> exact{2, 0};
  CHECK(nearest_dataset_distance(exact, ds).index == 1);
  CHECK(nearest_dataset_distance(exact, ds).distance == 0.0);
  const std::vector<double> mid{1, 0};
  CHECK(nearest_dataset_distance(mid, ds).index == 0);
  CHECK_THROWS_AS(nearest_dataset_distance(std::vector<double>{1.0}, ds), DomainError);

  const std::size_t d = 16, n = 100;
  auto pts = normal_draws(7, d * n, 0, 1);
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = Label{static_cast<int>(i % 2)};
  const EmpiricalDataset big(d, pts, labels);
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto x = normal_draws(1000 + k, d, 0, 1);
    for (const auto label : {std::optional<Label>{}, std::optional<Label>{Label{1}}}) {
      std::size_t best = 0;
      double bd = INFINITY;
      for (std::size_t i = 0; i < n; ++i) {
        if (label && labels[i] != *label) continue;
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += (x[j] - pts[i * d + j]) * (x[j] - pts[i * d + j]);
        if (s < bd) bd = s, best = i;
      }
      const auto r = nearest_dataset_distance(x, big, label);
      CHECK(r.index == best);
      CHECK(r.distance == doctest::Approx(std::sqrt(bd)).epsilon(1e-12));
    }
  }
}
