#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "sdelab/error.hpp"
#include "sdelab/image.hpp"
#include "sdelab/score.hpp"
#include "support.hpp"

using namespace sdelab;

namespace {

double normal_pdf(double x, double m, double v) {
  return std::exp(-(x - m) * (x - m) / (2 * v)) / std::sqrt(2 * std::numbers::pi * v);
}

// Plain (non log-sum-exp) mixture of N(c_i, var I), for moderate dimensions.
double direct_log_mixture(const std::vector<std::vector<double>>& centers, std::span<const double> x,
                          double var) {
  double sum = 0.0;
  for (const auto& c : centers) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) d2 += (x[k] - c[k]) * (x[k] - c[k]);
    sum += std::exp(-d2 / (2 * var));
  }
  const auto d = static_cast<double>(x.size());
  return std::log(sum / static_cast<double>(centers.size())) - 0.5 * d * std::log(2 * std::numbers::pi * var);
}

std::vector<double> fd_gradient(const ScoreModel& model, std::vector<double> x, double t,
                                std::optional<Label> label = std::nullopt, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = *model.log_density(x, t, label);
    x[k] = keep - h;
    const double down = *model.log_density(x, t, label);
    x[k] = keep;
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace

TEST_CASE("mixture score basics") {
  const auto schedule = NoiseSchedule::cosine();
  const GaussianMixture1D gm{0.5, 0.2};
  for (double t : {0.0, 0.3, 1.0}) CHECK(gm1d_score(gm, schedule, 0.0, t) == 0.0);

  const double t = 0.3;
  const double h = 1e-5;
  const double fd = (gm1d_log_density(gm, schedule, 0.5 + h, t) - gm1d_log_density(gm, schedule, 0.5 - h, t)) / (2 * h);
  CHECK(gm1d_score(gm, schedule, 0.5, t) == doctest::Approx(fd).epsilon(1e-5));

  const double a = schedule.alpha_bar(t);
  const double mu_t = std::sqrt(a) * gm.mu, var_t = a * gm.sigma * gm.sigma + 1 - a;
  const double x = 40.0;
  CHECK(gm1d_score(gm, schedule, x, t) == doctest::Approx(-x / var_t + mu_t / var_t).epsilon(1e-12));
  CHECK(gm1d_score_derivative(gm, schedule, 0.0, t) ==
        doctest::Approx(std::pow(mu_t / var_t, 2) - 1 / var_t).epsilon(1e-12));
  CHECK(gm1d_score_derivative(gm, schedule, 400.0, t) == doctest::Approx(-1 / var_t).epsilon(1e-12));
}

TEST_CASE("mixture log density") {
  const auto schedule = NoiseSchedule::cosine();
  const GaussianMixture1D gm{0.5, 0.2};
  const double oracle = std::log(0.5 * normal_pdf(0, -0.5, 0.04) + 0.5 * normal_pdf(0, 0.5, 0.04));
  CHECK(gm1d_log_density(gm, schedule, 0.0, 0.0) == doctest::Approx(oracle).epsilon(1e-12));
  // far tails stay finite
  CHECK(std::isfinite(gm1d_log_density(gm, schedule, 30.0, 0.0)));

  for (double t : {0.0, 0.2, 0.7, 1.0}) {
    const int n = 40000;
    const double lo = -10, hi = 10, dx = (hi - lo) / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      sum += w * std::exp(gm1d_log_density(gm, schedule, lo + i * dx, t));
    }
    CHECK(sum * dx == doctest::Approx(1.0).epsilon(1e-4));
    for (double x : {0.1, 0.7, 2.5})
      CHECK(gm1d_log_density(gm, schedule, x, t) == doctest::Approx(gm1d_log_density(gm, schedule, -x, t)).epsilon(1e-14));
  }
}

TEST_CASE("score derivative matches finite differences") {
  const auto schedule = NoiseSchedule::cosine();
  const GaussianMixture1D gm{0.5, 0.2};
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> ux(-3, 3), ut(0.01, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(gen), t = ut(gen), h = 1e-5;
    const double fd = (gm1d_score(gm, schedule, x + h, t) - gm1d_score(gm, schedule, x - h, t)) / (2 * h);
    REQUIRE(gm1d_score_derivative(gm, schedule, x, t) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("every analytic model's score is the gradient of its log density") {
  const auto schedule = NoiseSchedule::cosine();
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ux(-2.5, 2.5), ut(0.02, 1.0);

  const GaussianMixture1DModel gm({0.5, 0.2}, schedule, 3);
  const GaussianDataModel gauss({0.5, 0.25}, schedule, 3);
  std::vector<double> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(ux(gen));
  const auto ds = std::make_shared<const EmpiricalDataset>(3, pts, std::vector<Label>{{0}, {1}, {0}, {1}});
  const EmpiricalScoreModel emp(ds, schedule);

  for (const ScoreModel* model : {static_cast<const ScoreModel*>(&gm), static_cast<const ScoreModel*>(&gauss),
                                  static_cast<const ScoreModel*>(&emp)}) {
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> x{ux(gen), ux(gen), ux(gen)};
      const double t = ut(gen);
      std::vector<double> s(3);
      model->score(x, t, std::nullopt, s);
      const auto fd = fd_gradient(*model, x, t);
      REQUIRE(rel_err(s, fd) < 1e-4);
    }
  }
}

TEST_CASE("empirical score") {
  const auto schedule = NoiseSchedule::cosine();
  const double t = 0.4, a = schedule.alpha_bar(t);

  SUBCASE("single point reduces to one Gaussian") {
    const EmpiricalDataset one(2, {0.3, -1.2});
    std::vector<double> x{1.0, 2.0}, out(2);
    empirical_score(one, schedule, x, t, std::nullopt, out);
    CHECK(out[0] == doctest::Approx((std::sqrt(a) * 0.3 - 1.0) / (1 - a)).epsilon(1e-14));
    CHECK(out[1] == doctest::Approx((std::sqrt(a) * -1.2 - 2.0) / (1 - a)).epsilon(1e-14));
  }

  SUBCASE("two points match the narrow mixture") {
    const EmpiricalDataset two(1, {-0.5, 0.5});
    const GaussianMixture1D gm{0.5, 1e-4};
    for (double x : {-1.3, -0.2, 0.05, 0.9}) {
      std::vector<double> xv{x}, out(1);
      empirical_score(two, schedule, xv, t, std::nullopt, out);
      CHECK(out[0] == doctest::Approx(gm1d_score(gm, schedule, x, t)).epsilon(1e-3));
    }
  }

  SUBCASE("16-dimensional gradient against a direct mixture density") {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> pts(5, std::vector<double>(16));
    std::vector<double> flat;
    for (auto& p : pts)
      for (auto& v : p) flat.push_back(v = 0.3 * z(gen));
    const EmpiricalDataset ds(16, flat);
    std::vector<std::vector<double>> centers = pts;
    for (auto& c : centers)
      for (auto& v : c) v *= std::sqrt(a);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(16), out(16), fd(16);
      for (auto& v : x) v = 0.5 * z(gen);
      empirical_score(ds, schedule, x, t, std::nullopt, out);
      for (std::size_t k = 0; k < 16; ++k) {
        const double h = 1e-5, keep = x[k];
        x[k] = keep + h;
        const double up = direct_log_mixture(centers, x, 1 - a);
        x[k] = keep - h;
        const double down = direct_log_mixture(centers, x, 1 - a);
        x[k] = keep;
        fd[k] = (up - down) / (2 * h);
      }
      REQUIRE(rel_err(out, fd) < 1e-4);
      CHECK(empirical_log_density(ds, schedule, x, t, std::nullopt) ==
            doctest::Approx(direct_log_mixture(centers, x, 1 - a)).epsilon(1e-10));
    }
  }

  SUBCASE("nearest center dominates as the noise vanishes") {
    const EmpiricalDataset ds(2, {0, 0, 1, 0, 0, 1});
    const double tiny = test::time_of_alpha_bar(schedule, 1 - 1e-6);
    const double at = schedule.alpha_bar(tiny);
    std::vector<double> x{0.9, 0.05}, out(2);
    empirical_score(ds, schedule, x, tiny, std::nullopt, out);
    // single-component score of the nearest point (1, 0)
    CHECK(out[0] == doctest::Approx((std::sqrt(at) * 1.0 - 0.9) / (1 - at)).epsilon(1e-9));
    CHECK(out[1] == doctest::Approx((0.0 - 0.05) / (1 - at)).epsilon(1e-9));
  }

  SUBCASE("errors") {
    const EmpiricalDataset ds(1, {0.0, 1.0}, {Label{0}, Label{0}});
    std::vector<double> x{0.2}, out(1);
    CHECK_THROWS_AS(empirical_score(ds, schedule, x, 0.0, std::nullopt, out), DomainError);
    CHECK_THROWS_AS(empirical_score(ds, schedule, x, 0.3, Label{1}, out), EmptyClassError);
    CHECK_NOTHROW(empirical_score(ds, schedule, x, 0.3, Label{0}, out));
  }
}

TEST_CASE("conditioning restricts to the labelled subset") {
  const auto schedule = NoiseSchedule::cosine();
  const auto ds = std::make_shared<const EmpiricalDataset>(1, std::vector<double>{-1.0, 1.0},
                                                           std::vector<Label>{{0}, {1}});
  const EmpiricalScoreModel model(ds, schedule);
  const EmpiricalDataset only_right(1, {1.0});
  std::vector<double> x{0.1}, a(1), b(1);
  model.score(x, 0.5, Label{1}, a);
  empirical_score(only_right, schedule, x, 0.5, std::nullopt, b);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-14));
  CHECK(model.supports_conditioning());
  CHECK(model.min_time() > 0.0);
}

TEST_CASE("score and eps conversions") {
  const auto schedule = NoiseSchedule::cosine();
  std::vector<double> s{0.0, 1.5, -2.0}, e(3), back(3);
  score_to_eps(s, schedule, 0.0, e);
  CHECK(e == std::vector<double>{0.0, 0.0, 0.0});
  score_to_eps(s, schedule, 0.5, e);
  CHECK(e[0] == 0.0);
  CHECK(e[1] == doctest::Approx(-std::sqrt(schedule.noise_variance(0.5)) * 1.5));
  eps_to_score(e, schedule, 0.5, back);
  for (int i = 0; i < 3; ++i) CHECK(back[i] == doctest::Approx(s[i]).epsilon(1e-15));
}

TEST_CASE("classifier-free guidance") {
  const auto schedule = NoiseSchedule::cosine();
  const auto bumps = generate_bump_dataset();
  const EmpiricalScoreModel model(bumps.as_dataset(), schedule);
  const std::size_t d = model.dimension();
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  std::vector<double> x(d);
  for (auto& v : x) v = z(gen);
  const double t = 0.5;
  std::vector<double> cond(d), uncond(d), out(d);
  model.eps(x, t, kRight, cond);
  model.eps(x, t, std::nullopt, uncond);
  cfg_eps(model, x, t, kRight, 1.0, out);
  CHECK(out == cond);
  cfg_eps(model, x, t, kRight, 0.0, out);
  CHECK(out == uncond);
  cfg_eps(model, x, t, kRight, 3.0, out);
  for (std::size_t k = 0; k < d; ++k) REQUIRE(out[k] == doctest::Approx(3 * cond[k] - 2 * uncond[k]).epsilon(1e-12));

  const GaussianMixture1DModel gm({0.5, 0.2}, schedule);
  std::vector<double> x1{0.1}, o1(1);
  CHECK_THROWS_AS(cfg_eps(gm, x1, t, Label{0}, 3.0, o1), CapabilityError);
  CHECK_THROWS_AS(predict_eps(gm, x1, t, Conditioning{Label{0}, std::nullopt}, o1), CapabilityError);
}

TEST_CASE("guidance ramp") {
  const GuidanceSchedule ramp{1.0, 3.0, 0.6};
  CHECK(guidance_scale_at(ramp, 0.0) == 1.0);
  CHECK(guidance_scale_at(ramp, 0.6) == 3.0);
  CHECK(guidance_scale_at(ramp, 0.3) == doctest::Approx(2.0));
  CHECK_THROWS_AS((void)guidance_scale_at(ramp, 0.7), DomainError);
  const GuidanceSchedule flat{1.0, 1.0, 0.6};
  for (double t : {0.0, 0.2, 0.6}) CHECK(guidance_scale_at(flat, t) == 1.0);
}
