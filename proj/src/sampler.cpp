#include "sdelab/sampler.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sdelab/error.hpp"
#include "sdelab/parallel.hpp"

namespace sdelab {

Prior Prior::standard_normal() { return {Kind::standard_normal, 0.0, 1.0}; }

Prior Prior::normal(double mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("normal prior: variance must be positive");
  return {Kind::normal, mean, variance};
}

Prior Prior::uniform(double lo, double hi) {
  if (!(lo < hi)) throw DomainError("uniform prior: need lo < hi");
  return {Kind::uniform, lo, hi};
}

Prior Prior::point_mass(double value) { return {Kind::point_mass, value, 0.0}; }

namespace {

std::vector<double> parse_numbers(std::string_view text, std::string_view spec) {
  std::vector<double> values;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto field = text.substr(0, comma);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
      throw FormatError("bad number in prior spec '" + std::string(spec) + "'");
    values.push_back(v);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return values;
}

}  // namespace

Prior Prior::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto name = spec.substr(0, colon);
  const auto args =
      colon == std::string_view::npos ? std::vector<double>{} : parse_numbers(spec.substr(colon + 1), spec);
  if ((name == "std" || name == "standard_normal") && args.empty()) return standard_normal();
  if (name == "normal" && args.size() == 2) return normal(args[0], args[1]);
  if (name == "uniform" && args.size() == 2) return uniform(args[0], args[1]);
  if (name == "point" && args.size() == 1) return point_mass(args[0]);
  throw FormatError("unrecognized prior spec '" + std::string(spec) + "'");
}

std::string Prior::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::standard_normal: os << "std"; break;
    case Kind::normal: os << "normal:" << a_ << ',' << b_; break;
    case Kind::uniform: os << "uniform:" << a_ << ',' << b_; break;
    case Kind::point_mass: os << "point:" << a_; break;
  }
  return os.str();
}

void Prior::draw(const CounterRng& rng, std::span<double> out) const {
  switch (kind_) {
    case Kind::standard_normal:
      rng.normals(StreamKind::prior, 0, out);
      break;
    case Kind::normal: {
      rng.normals(StreamKind::prior, 0, out);
      const double sd = std::sqrt(b_);
      for (double& v : out) v = a_ + sd * v;
      break;
    }
    case Kind::uniform:
      rng.uniforms(StreamKind::prior, 0, out);
      for (double& v : out) v = a_ + (b_ - a_) * v;
      break;
    case Kind::point_mass:
      for (double& v : out) v = a_;
      break;
  }
}

double Prior::log_density(double x) const {
  switch (kind_) {
    case Kind::standard_normal:
    case Kind::normal: {
      const double d = x - a_;
      return -0.5 * std::log(2.0 * std::numbers::pi * b_) - d * d / (2.0 * b_);
    }
    case Kind::uniform:
      return (x >= a_ && x <= b_) ? -std::log(b_ - a_) : -std::numeric_limits<double>::infinity();
    case Kind::point_mass:
      break;
  }
  throw CapabilityError("point-mass prior has no density");
}

// ---------------------------------------------------------------------------

StepCoefficients step_coefficients(const NoiseSchedule& schedule, double s, double t, double eta) {
  const double sigma = step_sigma(schedule, s, t, eta);
  const double var_s = schedule.noise_variance(s);
  const double var_t = schedule.noise_variance(t);
  const double log_ratio = schedule.log_alpha_bar(t) - schedule.log_alpha_bar(s);
  const double ratio = std::exp(0.5 * log_ratio);  // sqrt(a_t / a_s)
  // 1 - a_t - sigma^2 rewritten without cancellation:
  //   var_t * ((1 - eta^2) var_s + eta^2 a_s var_t / a_t) / var_s
  const double a_s_over_a_t = std::exp(-log_ratio);
  const double eta2 = eta * eta;
  const double remaining = var_t * ((1.0 - eta2) * var_s + eta2 * a_s_over_a_t * var_t) / var_s;
  if (remaining < 0.0) throw DomainError("unified step: 1 - a_t - sigma^2 < 0");
  return {ratio, std::sqrt(remaining) - ratio * std::sqrt(var_s), sigma};
}

StepCoefficients inversion_coefficients(const NoiseSchedule& schedule, double s, double t) {
  if (!(t > s)) throw OrderingError("inversion step: need t > s");
  const double ratio = std::exp(0.5 * (schedule.log_alpha_bar(t) - schedule.log_alpha_bar(s)));
  return {ratio, std::sqrt(schedule.noise_variance(t)) - ratio * std::sqrt(schedule.noise_variance(s)),
          0.0};
}

void unified_step(const NoiseSchedule& schedule, std::span<const double> x_s, double s, double t,
                  std::span<const double> eps, double eta, std::span<const double> noise,
                  std::span<double> out) {
  if (eps.size() != x_s.size() || out.size() != x_s.size())
    throw DomainError("unified_step: size mismatch");
  const auto c = step_coefficients(schedule, s, t, eta);
  if (c.sigma > 0.0 && noise.size() != x_s.size())
    throw DomainError("unified_step: noise size mismatch");
  for (std::size_t i = 0; i < x_s.size(); ++i) {
    double v = c.x_coeff * x_s[i] + c.eps_coeff * eps[i];
    if (c.sigma > 0.0) v += c.sigma * noise[i];
    out[i] = v;
  }
}

void forward_perturb(const NoiseSchedule& schedule, std::span<const double> x_t, double s, double t,
                     std::span<const double> noise, std::span<double> out) {
  if (s < t) throw OrderingError("forward_perturb: need s >= t");
  if (out.size() != x_t.size()) throw DomainError("forward_perturb: size mismatch");
  if (s == t) {
    std::copy(x_t.begin(), x_t.end(), out.begin());
    return;
  }
  if (noise.size() != x_t.size()) throw DomainError("forward_perturb: noise size mismatch");
  const double log_ratio = schedule.log_alpha_bar(s) - schedule.log_alpha_bar(t);
  const double keep = std::exp(0.5 * log_ratio);
  const double add = std::sqrt(-std::expm1(log_ratio));
  for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = keep * x_t[i] + add * noise[i];
}

std::vector<double> forward_perturb(const NoiseSchedule& schedule, std::span<const double> x_t,
                                    double s, double t, const CounterRng& rng, std::uint32_t step) {
  std::vector<double> noise(x_t.size());
  if (s != t) rng.normals(StreamKind::forward, step, noise);
  std::vector<double> out(x_t.size());
  forward_perturb(schedule, x_t, s, t, noise, out);
  return out;
}

// ---------------------------------------------------------------------------

TimeGrid grid_for_model(const ScoreModel& model, TimeGrid grid) {
  if (grid.times.empty()) throw DomainError("empty time grid");
  if (grid.front() < model.min_time()) return clamp_min_time(std::move(grid), model.min_time());
  return grid;
}

namespace {

void check_grid(const TimeGrid& grid) {
  if (grid.times.size() < 1) throw DomainError("empty time grid");
  for (std::size_t i = 1; i < grid.times.size(); ++i)
    if (!(grid.times[i] > grid.times[i - 1])) throw OrderingError("time grid not increasing");
}

}  // namespace

void reverse_run(const ScoreModel& model, std::span<double> state, const TimeGrid& grid, double eta,
                 const Conditioning& conditioning, const CounterRng& rng, const StepHook& hook) {
  check_grid(grid);
  const std::size_t n = grid.steps();
  std::vector<double> eps(state.size());
  std::vector<double> noise(state.size());
  if (hook) hook(n, grid.times[n], state);
  for (std::size_t i = n; i >= 1; --i) {
    const double s = grid.times[i];
    const double t = grid.times[i - 1];
    predict_eps(model, state, s, conditioning, eps);
    const auto c = step_coefficients(model.schedule(), s, t, eta);
    if (c.sigma > 0.0) rng.normals(StreamKind::step, static_cast<std::uint32_t>(i), noise);
    for (std::size_t k = 0; k < state.size(); ++k) {
      double v = c.x_coeff * state[k] + c.eps_coeff * eps[k];
      if (c.sigma > 0.0) v += c.sigma * noise[k];
      state[k] = v;
    }
    if (hook) hook(i - 1, t, state);
  }
}

std::vector<double> ddim_sample(const ScoreModel& model, std::span<const double> start,
                                const TimeGrid& grid, const Conditioning& conditioning,
                                const StepHook& hook) {
  std::vector<double> state(start.begin(), start.end());
  reverse_run(model, state, grid, 0.0, conditioning, CounterRng(0, 0), hook);
  return state;
}

SampleResult sample(const ScoreModel& model, const SamplerConfig& config, const Prior& prior,
                    std::size_t particles, const SampleOptions& options) {
  if (particles == 0) throw DomainError("sample: need at least one particle");
  if (!(config.eta >= 0.0 && config.eta <= 1.0)) throw DomainError("sample: eta outside [0, 1]");
  SampleResult result;
  result.grid = grid_for_model(model, config.grid);
  check_grid(result.grid);
  result.dimension = model.dimension();
  result.particles = particles;
  result.states.assign(particles * result.dimension, 0.0);
  if (options.keep_trajectories) result.trajectories.resize(particles);

  const std::size_t n = result.grid.steps();
  std::vector<StepCoefficients> coeffs(n + 1);
  for (std::size_t i = 1; i <= n; ++i)
    coeffs[i] = step_coefficients(model.schedule(), result.grid.times[i], result.grid.times[i - 1],
                                  config.eta);

  parallel_for(particles, options.workers, [&](std::size_t begin, std::size_t end) {
    const std::size_t d = result.dimension;
    std::vector<double> eps(d);
    std::vector<double> noise(d);
    for (std::size_t p = begin; p < end; ++p) {
      const CounterRng rng(config.seed, p);
      std::span<double> x(result.states.data() + p * d, d);
      prior.draw(rng, x);
      Trajectory* traj = options.keep_trajectories ? &result.trajectories[p] : nullptr;
      if (traj) {
        traj->times = result.grid;
        traj->states.assign(n + 1, {});
        traj->states[n].assign(x.begin(), x.end());
      }
      for (std::size_t i = n; i >= 1; --i) {
        const auto& c = coeffs[i];
        predict_eps(model, x, result.grid.times[i], config.conditioning, eps);
        if (c.sigma > 0.0) rng.normals(StreamKind::step, static_cast<std::uint32_t>(i), noise);
        for (std::size_t k = 0; k < d; ++k) {
          double v = c.x_coeff * x[k] + c.eps_coeff * eps[k];
          if (c.sigma > 0.0) v += c.sigma * noise[k];
          x[k] = v;
        }
        if (traj) traj->states[i - 1].assign(x.begin(), x.end());
      }
    }
  });
  return result;
}

}  // namespace sdelab
