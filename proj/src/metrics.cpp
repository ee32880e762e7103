#include "sdelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sdelab/error.hpp"
#include "sdelab/image.hpp"
#include "sdelab/invert.hpp"
#include "sdelab/parallel.hpp"
#include "sdelab/rng.hpp"

namespace sdelab {

double kl_gaussian(double m1, double v1, double m2, double v2) {
  if (!(v1 > 0.0 && v2 > 0.0)) throw DomainError("kl_gaussian: variances must be positive");
  const double d = m1 - m2;
  // log(v2/v1)/2 + (v1 + d^2)/(2 v2) - 1/2, arranged to keep tiny KLs accurate
  const double r = v1 / v2;
  return 0.5 * ((r - 1.0) - std::log1p(r - 1.0)) + d * d / (2.0 * v2);
}

namespace {

Estimate mean_estimate(std::span<const double> values) {
  Estimate e;
  double mean = 0.0;
  double m2 = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) {
      ++e.excluded;
      continue;
    }
    ++e.used;
    const double delta = v - mean;
    mean += delta / static_cast<double>(e.used);
    m2 += delta * (v - mean);
  }
  if (e.used == 0) throw DomainError("estimator: no finite samples");
  e.value = mean;
  e.std_error = e.used > 1 ? std::sqrt(m2 / static_cast<double>(e.used - 1) /
                                       static_cast<double>(e.used))
                           : std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace

Estimate kl_mc(std::span<const double> samples, const LogDensity1D& log_p_tilde,
               const LogDensity1D& log_p) {
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    values[i] = log_p_tilde(samples[i]) - log_p(samples[i]);
  return mean_estimate(values);
}

Estimate fisher_mc(std::span<const double> samples, const Score1D& score_tilde,
                   const Score1D& score_p) {
  std::vector<double> values(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = score_tilde(samples[i]) - score_p(samples[i]);
    values[i] = d * d;
  }
  return mean_estimate(values);
}

// ---------------------------------------------------------------------------

namespace {

void check_histogram(const HistogramOptions& o) {
  if (o.bins == 0 || !(o.hi > o.lo)) throw DomainError("histogram: empty range");
  if (!(o.smoothing >= 0.0)) throw DomainError("histogram: negative smoothing");
}

std::size_t bin_of(double x, const HistogramOptions& o) {
  const double pos = (x - o.lo) / (o.hi - o.lo) * static_cast<double>(o.bins);
  if (!(pos > 0.0)) return 0;  // also catches NaN
  return std::min(o.bins - 1, static_cast<std::size_t>(pos));
}

std::vector<double> counts(std::span<const double> samples, const HistogramOptions& o) {
  std::vector<double> c(o.bins, 0.0);
  for (double x : samples) c[bin_of(x, o)] += 1.0;
  return c;
}

void smooth(std::vector<double>& p, double eps) {
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v = (v / total + eps) / (1.0 + eps * static_cast<double>(p.size()));
}

double discrete_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(kl, 0.0);
}

double simpson(const LogDensity1D& log_density, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double sum = std::exp(log_density(a)) + std::exp(log_density(b));
  for (int k = 1; k < intervals; ++k)
    sum += (k % 2 ? 4.0 : 2.0) * std::exp(log_density(a + k * h));
  return sum * h / 3.0;
}

}  // namespace

std::vector<double> histogram_probabilities(std::span<const double> samples,
                                            const HistogramOptions& options) {
  check_histogram(options);
  if (samples.empty()) throw DomainError("histogram: no samples");
  auto p = counts(samples, options);
  smooth(p, options.smoothing);
  return p;
}

double kl_histogram(std::span<const double> a, std::span<const double> b,
                    const HistogramOptions& options) {
  return discrete_kl(histogram_probabilities(a, options), histogram_probabilities(b, options));
}

double kl_histogram_to_density(std::span<const double> samples, const LogDensity1D& log_density,
                               const HistogramOptions& options) {
  const auto p = histogram_probabilities(samples, options);
  const double width = (options.hi - options.lo) / static_cast<double>(options.bins);
  std::vector<double> q(options.bins);
  for (std::size_t i = 0; i < options.bins; ++i) {
    const double a = options.lo + width * static_cast<double>(i);
    q[i] = simpson(log_density, a, a + width, 16);
  }
  const double span = options.hi - options.lo;
  q.front() += simpson(log_density, options.lo - 4.0 * span, options.lo, 4096);
  q.back() += simpson(log_density, options.hi, options.hi + 4.0 * span, 4096);
  smooth(q, options.smoothing);
  return discrete_kl(p, q);
}

double histogram_bias_band(std::span<const double> a, std::span<const double> b,
                           const HistogramOptions& options) {
  check_histogram(options);
  if (a.empty() || b.empty()) throw DomainError("histogram: no samples");
  const auto ca = counts(a, options);
  const auto cb = counts(b, options);
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < options.bins; ++i) occupied += (ca[i] > 0.0 || cb[i] > 0.0);
  const double k = static_cast<double>(std::max<std::size_t>(occupied, 1) - 1);
  return 0.5 * k * (1.0 / static_cast<double>(a.size()) + 1.0 / static_cast<double>(b.size()));
}

// ---------------------------------------------------------------------------

namespace {

struct MomentState {
  double mean;
  double var;
};

// d(mean, var)/dt along the reverse SDE (stochastic = true) or the
// probability-flow ODE, both driven by the exact Gaussian score.
MomentState moment_rate(const GaussianData& data, const NoiseSchedule& schedule, double t,
                        MomentState s, bool stochastic) {
  const auto [f, g2] = schedule.vp_coefficients(t);
  const auto [m, v] = gaussian_marginal(data, schedule, t);
  if (stochastic) return {f * s.mean + g2 * (s.mean - m) / v, g2 * (-s.var + 2.0 * s.var / v - 1.0)};
  return {f * s.mean + 0.5 * g2 * (s.mean - m) / v, s.var * (-g2 + g2 / v)};
}

GaussianMoments integrate_moments(const GaussianData& data, const NoiseSchedule& schedule,
                                  double prior_mean, double prior_var, const TimeGrid& grid,
                                  int substeps, bool stochastic) {
  if (!(prior_var > 0.0)) throw DomainError("moments: prior variance must be positive");
  if (substeps < 1) throw DomainError("moments: substeps must be positive");
  const std::size_t n = grid.steps();
  GaussianMoments out;
  out.times = grid.times;
  out.mean.assign(n + 1, 0.0);
  out.variance.assign(n + 1, 0.0);
  MomentState s{prior_mean, prior_var};
  out.mean[n] = s.mean;
  out.variance[n] = s.var;
  auto axpy = [](MomentState a, MomentState k, double h) {
    return MomentState{a.mean + h * k.mean, a.var + h * k.var};
  };
  for (std::size_t i = n; i >= 1; --i) {
    const double t_hi = grid.times[i];
    const double h = (grid.times[i - 1] - t_hi) / substeps;
    for (int k = 0; k < substeps; ++k) {
      const double t = t_hi + k * h;
      const double t_end = k + 1 == substeps ? grid.times[i - 1] : t + h;
      const auto k1 = moment_rate(data, schedule, t, s, stochastic);
      const auto k2 = moment_rate(data, schedule, t + 0.5 * h, axpy(s, k1, 0.5 * h), stochastic);
      const auto k3 = moment_rate(data, schedule, t + 0.5 * h, axpy(s, k2, 0.5 * h), stochastic);
      const auto k4 = moment_rate(data, schedule, t_end, axpy(s, k3, h), stochastic);
      s.mean += h / 6.0 * (k1.mean + 2.0 * k2.mean + 2.0 * k3.mean + k4.mean);
      s.var += h / 6.0 * (k1.var + 2.0 * k2.var + 2.0 * k3.var + k4.var);
    }
    out.mean[i - 1] = s.mean;
    out.variance[i - 1] = s.var;
  }
  return out;
}

DivergenceReport gaussian_report(const GaussianData& data, const NoiseSchedule& schedule,
                                 const GaussianMoments& mom, bool with_fisher) {
  DivergenceReport r;
  r.method = EstimateMethod::analytic_gaussian;
  if (with_fisher) r.fisher.emplace();
  for (std::size_t k = mom.times.size(); k-- > 0;) {
    const double t = mom.times[k];
    const auto [m, v] = gaussian_marginal(data, schedule, t);
    r.times.push_back(t);
    r.kl.push_back(kl_gaussian(mom.mean[k], mom.variance[k], m, v));
    r.kl_stderr.push_back(0.0);
    if (with_fisher) r.fisher->push_back(gaussian_fisher(mom.mean[k], mom.variance[k], m, v));
  }
  return r;
}

constexpr double kTrivialKl = 1e-10;

std::string fmt(double v) { return format_double(v); }

}  // namespace

GaussianMoments gaussian_reverse_sde_moments(const GaussianData& data, const NoiseSchedule& schedule,
                                             double prior_mean, double prior_var,
                                             const TimeGrid& grid, int substeps) {
  return integrate_moments(data, schedule, prior_mean, prior_var, grid, substeps, true);
}

GaussianMoments gaussian_probability_flow_moments(const GaussianData& data,
                                                  const NoiseSchedule& schedule, double prior_mean,
                                                  double prior_var, const TimeGrid& grid,
                                                  int substeps) {
  return integrate_moments(data, schedule, prior_mean, prior_var, grid, substeps, false);
}

double gaussian_fisher(double mean, double var, double m, double v) {
  if (!(var > 0.0 && v > 0.0)) throw DomainError("gaussian_fisher: variances must be positive");
  const double a = std::sqrt(var) / v - 1.0 / std::sqrt(var);
  const double b = (mean - m) / v;
  return a * a + b * b;
}

std::string to_string(EstimateMethod method) {
  switch (method) {
    case EstimateMethod::analytic_gaussian: return "analytic_gaussian";
    case EstimateMethod::mc_density: return "mc_density";
    case EstimateMethod::histogram: return "histogram";
  }
  return "unknown";
}

std::string DivergenceReport::to_csv() const {
  std::string out = "time,kl,kl_stderr,fisher\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    out += fmt(times[i]) + ',' + fmt(kl[i]) + ',' + fmt(kl_stderr[i]) + ',';
    if (fisher) out += fmt((*fisher)[i]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

CheckResult theorem1_check_exact(const GaussianData& data, const NoiseSchedule& schedule,
                                 double prior_mean, double prior_var, const TimeGrid& grid) {
  CheckResult res;
  res.name = "theorem1_exact";
  res.tolerance = 1e-3;
  const auto mom = gaussian_reverse_sde_moments(data, schedule, prior_mean, prior_var, grid);
  res.report = gaussian_report(data, schedule, mom, true);
  const auto& kl = res.report.kl;
  const auto& fisher = *res.report.fisher;
  const auto& times = res.report.times;
  const double kl_top = kl.front();
  if (kl_top < kTrivialKl) {
    res.trivial_zero = true;
    res.passed = *std::max_element(kl.begin(), kl.end()) < kTrivialKl;
    res.diagnostics = "prior matches the diffused marginal";
    return res;
  }
  std::size_t violations = 0;
  for (std::size_t k = 1; k < kl.size(); ++k)
    if (!(kl[k] < kl[k - 1])) ++violations;
  // KL_s = KL_t0 - int_s^t0 (g^2/2) D dtau
  double integral = 0.0;
  double worst = 0.0;
  auto integrand = [&](std::size_t k) { return 0.5 * schedule.vp_coefficients(times[k]).diffusion_sq * fisher[k]; };
  double prev = integrand(0);
  for (std::size_t k = 1; k < kl.size(); ++k) {
    const double cur = integrand(k);
    integral += 0.5 * (prev + cur) * (times[k - 1] - times[k]);
    prev = cur;
    worst = std::max(worst, std::abs(kl[k] - (kl_top - integral)));
  }
  res.residual = worst / kl_top;
  res.passed = violations == 0 && res.residual < res.tolerance;
  res.diagnostics = "non-decreasing steps: " + std::to_string(violations) +
                    "; KL(t0) = " + fmt(kl_top) + "; KL(0) = " + fmt(kl.back());
  return res;
}

CheckResult theorem1_check_mc(const GaussianMixture1D& mixture, const NoiseSchedule& schedule,
                              double prior_mean, double prior_var, const TimeGrid& grid,
                              const MixtureCheckOptions& options) {
  CheckResult res;
  res.name = "theorem1_mc";
  const std::size_t n = grid.steps();
  const GaussianMixture1DModel model(mixture, schedule, options.particles);
  const CounterRng rng(options.seed, 0);
  std::vector<double> x(options.particles);
  Prior::normal(prior_mean, prior_var).draw(rng, x);

  const std::size_t every = std::max<std::size_t>(1, n / std::max<std::size_t>(1, options.checkpoints));
  res.report.method = EstimateMethod::histogram;
  auto record = [&](std::size_t index, double t, std::span<double> state) {
    if (index % every != 0 && index != n) return;
    const double kl = kl_histogram_to_density(
        state, [&](double v) { return gm1d_log_density(mixture, schedule, v, t); }, options.histogram);
    res.report.times.push_back(t);
    res.report.kl.push_back(kl);
    // bias of the plug-in estimate against an exact reference
    res.report.kl_stderr.push_back(histogram_bias_band(state, state, options.histogram) / 2.0);
  };
  reverse_run(model, x, grid, 1.0, {}, rng, record);

  const auto& kl = res.report.kl;
  std::size_t violations = 0;
  for (std::size_t k = 1; k < kl.size(); ++k)
    if (kl[k] > kl[k - 1] + 3.0 * (res.report.kl_stderr[k] + res.report.kl_stderr[k - 1])) ++violations;
  res.residual = kl.back() / kl.front();
  res.tolerance = 0.1;
  res.passed = violations == 0 && res.residual <= res.tolerance;
  res.diagnostics = "KL(t0) = " + fmt(kl.front()) + "; KL(0) = " + fmt(kl.back()) +
                    "; increases beyond band: " + std::to_string(violations);
  return res;
}

CheckResult theorem2_check_exact(const GaussianData& data, const NoiseSchedule& schedule,
                                 double prior_mean, double prior_var, const TimeGrid& grid) {
  CheckResult res;
  res.name = "theorem2_exact";
  res.tolerance = 1e-6;
  const auto mom = gaussian_probability_flow_moments(data, schedule, prior_mean, prior_var, grid);
  res.report = gaussian_report(data, schedule, mom, true);
  const auto& kl = res.report.kl;
  double drift = 0.0;
  for (double v : kl) drift = std::max(drift, std::abs(v - kl.front()));
  res.residual = drift;
  if (kl.front() < kTrivialKl) {
    res.trivial_zero = true;
    res.passed = *std::max_element(kl.begin(), kl.end()) < kTrivialKl;
    res.diagnostics = "prior matches the diffused marginal";
    return res;
  }
  res.passed = drift < res.tolerance;
  res.diagnostics = "KL(t0) = " + fmt(kl.front()) + "; max drift = " + fmt(drift);
  return res;
}

CheckResult theorem2_check_transport(const GaussianMixture1D& mixture,
                                     const NoiseSchedule& schedule, double prior_mean,
                                     double prior_var, const TimeGrid& grid,
                                     std::size_t trajectories, std::uint64_t seed) {
  CheckResult res;
  res.name = "theorem2_transport";
  res.report.method = EstimateMethod::mc_density;
  const Prior prior = Prior::normal(prior_mean, prior_var);
  const CounterRng rng(seed, 0);
  std::vector<double> x(trajectories);
  prior.draw(rng, x);
  std::vector<double> log_rho(trajectories);
  for (std::size_t k = 0; k < trajectories; ++k) log_rho[k] = prior.log_density(x[k]);

  // (velocity, -divergence) of the probability-flow field at (x, t)
  auto field = [&](double xv, double t, double& vel, double& dlog) {
    const auto [f, g2] = schedule.vp_coefficients(t);
    vel = f * xv - 0.5 * g2 * gm1d_score(mixture, schedule, xv, t);
    dlog = -(f - 0.5 * g2 * gm1d_score_derivative(mixture, schedule, xv, t));
  };
  const std::size_t n = grid.steps();
  const std::size_t every = std::max<std::size_t>(1, n / 10);
  std::vector<double> diff(trajectories);
  auto checkpoint = [&](double t) {
    for (std::size_t k = 0; k < trajectories; ++k)
      diff[k] = log_rho[k] - gm1d_log_density(mixture, schedule, x[k], t);
    const auto e = mean_estimate(diff);
    res.report.times.push_back(t);
    res.report.kl.push_back(e.value);
    res.report.kl_stderr.push_back(e.std_error);
  };
  checkpoint(grid.times[n]);
  for (std::size_t i = n; i >= 1; --i) {
    const double t = grid.times[i];
    const double h = grid.times[i - 1] - t;
    for (std::size_t k = 0; k < trajectories; ++k) {
      double v1, l1, v2, l2, v3, l3, v4, l4;
      field(x[k], t, v1, l1);
      field(x[k] + 0.5 * h * v1, t + 0.5 * h, v2, l2);
      field(x[k] + 0.5 * h * v2, t + 0.5 * h, v3, l3);
      field(x[k] + h * v3, grid.times[i - 1], v4, l4);
      x[k] += h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
      log_rho[k] += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    if ((i - 1) % every == 0) checkpoint(grid.times[i - 1]);
  }
  const auto& kl = res.report.kl;
  const auto& se = res.report.kl_stderr;
  constexpr double kIntegrationTol = 1e-3;
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < kl.size(); ++k) {
    const double band = 3.0 * std::hypot(se[k], se.front()) + kIntegrationTol;
    worst_excess = std::max(worst_excess, std::abs(kl[k] - kl.front()) - band);
  }
  res.residual = std::abs(kl.back() - kl.front());
  res.tolerance = 3.0 * std::hypot(se.back(), se.front()) + kIntegrationTol;
  res.passed = worst_excess <= 0.0;
  res.diagnostics = "KL(t0) = " + fmt(kl.front()) + " +- " + fmt(se.front()) + "; KL(0) = " +
                    fmt(kl.back()) + " +- " + fmt(se.back());
  return res;
}

std::vector<CheckResult> theorem3_check(const GaussianMixture1D& mixture,
                                        const NoiseSchedule& schedule,
                                        const std::vector<Prior>& priors, const TimeGrid& grid,
                                        const Theorem3Options& options) {
  if (priors.empty()) throw DomainError("theorem3_check: no priors");
  const std::size_t reps = options.repetitions;
  const std::size_t count = priors.size();
  const std::size_t N = options.particles;
  const GaussianMixture1DModel model(mixture, schedule, N);
  // per (prior, repetition)
  std::vector<double> kl_top(count * reps), kl_zero(count * reps), band(count * reps);

  parallel_for(reps, options.workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> comp(N), x0(N), start(N);
    for (std::size_t r = begin; r < end; ++r) {
      const CounterRng rng(options.seed, r);
      rng.uniforms(StreamKind::data, 0, comp);
      rng.normals(StreamKind::data, 1, x0);
      for (std::size_t k = 0; k < N; ++k)
        x0[k] = (comp[k] < 0.5 ? -mixture.mu : mixture.mu) + mixture.sigma * x0[k];
      const auto record = cycle_record(model, x0, grid, rng);
      for (std::size_t p = 0; p < count; ++p) {
        priors[p].draw(rng.derive(p + 1), start);
        const auto y0 = cycle_replay(record, start, model);
        const std::size_t slot = p * reps + r;
        kl_top[slot] = kl_histogram(start, record.latent_at_t0, options.histogram);
        kl_zero[slot] = kl_histogram(y0, x0, options.histogram);
        band[slot] = histogram_bias_band(start, record.latent_at_t0, options.histogram) +
                     histogram_bias_band(y0, x0, options.histogram);
      }
    }
  });

  std::vector<CheckResult> results;
  for (std::size_t p = 0; p < count; ++p) {
    CheckResult res;
    res.name = "theorem3[" + priors[p].describe() + "]";
    res.report.method = EstimateMethod::histogram;
    std::size_t wins = 0;
    double mean_top = 0.0, mean_zero = 0.0, mean_band = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t slot = p * reps + r;
      wins += kl_zero[slot] + band[slot] < kl_top[slot];
      mean_top += kl_top[slot] / static_cast<double>(reps);
      mean_zero += kl_zero[slot] / static_cast<double>(reps);
      mean_band += band[slot] / static_cast<double>(reps);
    }
    res.report.times = {grid.back(), grid.front()};
    res.report.kl = {mean_top, mean_zero};
    res.report.kl_stderr = {mean_band, mean_band};
    res.residual = static_cast<double>(wins);
    res.tolerance = static_cast<double>(options.required);
    res.trivial_zero = mean_top < mean_band;
    res.passed = wins >= options.required;
    res.diagnostics = std::to_string(wins) + "/" + std::to_string(reps) +
                      " repetitions with KL_0 + band < KL_t0; mean KL_t0 = " + fmt(mean_top) +
                      ", mean KL_0 = " + fmt(mean_zero) + ", mean band = " + fmt(mean_band);
    results.push_back(std::move(res));
  }
  return results;
}

CheckResult lsi_rate_check(const GaussianData& data, const NoiseSchedule& schedule,
                           double prior_mean, double prior_var, const TimeGrid& grid,
                           std::optional<double> lsi_constant, std::size_t pairs, double slack) {
  CheckResult res;
  res.name = "lsi_rate";
  res.tolerance = slack;
  const double c = lsi_constant.value_or(std::max(data.variance, 1.0));
  if (!(c >= 1.0)) throw DomainError("lsi_rate_check: constant must be >= 1");
  const auto mom = gaussian_reverse_sde_moments(data, schedule, prior_mean, prior_var, grid);
  res.report = gaussian_report(data, schedule, mom, false);
  const std::size_t n = grid.steps();
  // kl_at[i] belongs to grid.times[i]
  std::vector<double> kl_at(n + 1);
  for (std::size_t i = 0; i <= n; ++i) kl_at[i] = res.report.kl[n - i];

  double worst = -std::numeric_limits<double>::infinity();
  std::string offending;
  auto check = [&](std::size_t s, std::size_t t) {
    const double factor =
        std::exp(-schedule.integrated_diffusion(grid.times[s], grid.times[t]) / c);
    const double excess = kl_at[s] - factor * kl_at[t];
    if (excess > worst) {
      worst = excess;
      offending = "(s, t) = (" + fmt(grid.times[s]) + ", " + fmt(grid.times[t]) + ")";
    }
  };
  for (std::size_t i = 1; i <= n; ++i) check(i - 1, i);
  const CounterRng rng(0, 0);
  for (std::size_t k = 0; k < pairs; ++k) {
    double u[2];
    rng.uniforms(StreamKind::aux, static_cast<std::uint32_t>(k % CounterRng::kMaxStep), u);
    auto a = std::min(n, static_cast<std::size_t>(u[0] * static_cast<double>(n + 1)));
    auto b = std::min(n, static_cast<std::size_t>(u[1] * static_cast<double>(n + 1)));
    if (a > b) std::swap(a, b);
    check(a, b);
  }
  res.residual = worst;
  res.passed = worst <= slack;
  res.diagnostics = "c = " + fmt(c) + "; worst excess " + fmt(worst) + " at " + offending;
  return res;
}

NearestResult nearest_dataset_distance(std::span<const double> x, const EmpiricalDataset& dataset,
                                       std::optional<Label> label) {
  if (dataset.size() == 0) throw DomainError("nearest_dataset_distance: empty dataset");
  if (x.size() != dataset.dimension()) throw DomainError("nearest_dataset_distance: dimension mismatch");
  NearestResult best{0, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i : dataset.members(label)) {
    const auto p = dataset.point(i);
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - p[k]) * (x[k] - p[k]);
    if (sq < best_sq) {
      best_sq = sq;
      best.index = i;
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

}  // namespace sdelab
