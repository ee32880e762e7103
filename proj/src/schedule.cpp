#include "sdelab/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sdelab/error.hpp"

namespace sdelab {

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::cosine ? "cosine" : "linear";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "cosine") return ScheduleKind::cosine;
  if (name == "linear") return ScheduleKind::linear;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

NoiseSchedule NoiseSchedule::cosine(double offset, double end_alpha_bar,
                                    std::size_t grid_resolution) {
  if (!(offset > 0.0)) throw DomainError("cosine schedule: offset must be positive");
  if (!(end_alpha_bar > 0.0 && end_alpha_bar <= 1e-3))
    throw DomainError("cosine schedule: end alpha_bar must lie in (0, 1e-3]");
  if (grid_resolution == 0) throw DomainError("schedule: grid resolution must be positive");
  NoiseSchedule s;
  s.kind_ = ScheduleKind::cosine;
  s.offset_ = offset;
  s.grid_resolution_ = grid_resolution;
  const double half_pi = std::numbers::pi / 2.0;
  const double angle0 = offset / (1.0 + offset) * half_pi;
  const double c0 = std::cos(angle0);
  const double angle_end = std::acos(std::sqrt(end_alpha_bar) * c0);
  s.u_end_ = angle_end / half_pi * (1.0 + offset) - offset;
  s.angle_rate_ = s.u_end_ * half_pi / (1.0 + offset);
  s.log_c0_ = 2.0 * std::log(c0);
  return s;
}

NoiseSchedule NoiseSchedule::linear(double beta_min, double beta_max,
                                    std::size_t grid_resolution) {
  if (!(beta_min > 0.0 && beta_max > beta_min))
    throw DomainError("linear schedule: need 0 < beta_min < beta_max");
  if (grid_resolution == 0) throw DomainError("schedule: grid resolution must be positive");
  NoiseSchedule s;
  s.kind_ = ScheduleKind::linear;
  s.beta_min_ = beta_min;
  s.beta_max_ = beta_max;
  s.grid_resolution_ = grid_resolution;
  if (std::exp(-(beta_min + 0.5 * (beta_max - beta_min))) > 1e-3)
    throw DomainError("linear schedule: alpha_bar(T) must not exceed 1e-3");
  return s;
}

NoiseSchedule NoiseSchedule::make(ScheduleKind kind) {
  return kind == ScheduleKind::cosine ? cosine() : linear();
}

void NoiseSchedule::check_time(double t) const {
  if (!(t >= 0.0 && t <= kHorizon))
    throw DomainError("time " + std::to_string(t) + " outside [0, T]");
}

double NoiseSchedule::cosine_angle(double t) const {
  return (t * u_end_ + offset_) / (1.0 + offset_) * (std::numbers::pi / 2.0);
}

double NoiseSchedule::log_alpha_bar(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::cosine) {
    if (t == 0.0) return 0.0;
    return 2.0 * std::log(std::cos(cosine_angle(t))) - log_c0_;
  }
  return -(beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t);
}

double NoiseSchedule::alpha_bar(double t) const {
  if (t == 0.0) {
    check_time(t);
    return 1.0;
  }
  return std::exp(log_alpha_bar(t));
}

double NoiseSchedule::noise_variance(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::cosine) {
    // cos^2(a0) - cos^2(a) = sin(a - a0) sin(a + a0)
    const double a = cosine_angle(t);
    const double a0 = cosine_angle(0.0);
    return std::sin(a - a0) * std::sin(a + a0) / std::exp(log_c0_);
  }
  return -std::expm1(log_alpha_bar(t));
}

double NoiseSchedule::log_alpha_bar_derivative(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::cosine) {
    return -2.0 * std::tan(cosine_angle(t)) * angle_rate_;
  }
  return -(beta_min_ + (beta_max_ - beta_min_) * t);
}

double NoiseSchedule::alpha_bar_derivative(double t) const {
  return alpha_bar(t) * log_alpha_bar_derivative(t);
}

VpCoefficients NoiseSchedule::vp_coefficients(double t) const {
  const double dlog = log_alpha_bar_derivative(t);
  if (!std::isfinite(dlog)) throw DomainError("vp_coefficients: singular log-derivative");
  const double a = alpha_bar(t);
  const double da = a * dlog;
  // g^2 = -a' - (log a)'(1 - a) as written; it simplifies to -(log a)'.
  const double g2 = -da - dlog * (1.0 - a);
  return {0.5 * dlog, g2};
}

double NoiseSchedule::integrated_diffusion(double s, double t) const {
  return log_alpha_bar(s) - log_alpha_bar(t);
}

std::vector<double> NoiseSchedule::alpha_bar_table() const {
  std::vector<double> table(grid_resolution_ + 1);
  for (std::size_t i = 0; i <= grid_resolution_; ++i) {
    table[i] = alpha_bar(kHorizon * static_cast<double>(i) / static_cast<double>(grid_resolution_));
  }
  return table;
}

double step_sigma(const NoiseSchedule& schedule, double s, double t, double eta) {
  if (!(s > t)) throw OrderingError("step_sigma: need s > t");
  if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("step_sigma: eta outside [0, 1]");
  const double var_s = schedule.noise_variance(s);
  if (var_s <= 0.0) throw DomainError("step_sigma: alpha_bar(s) = 1");
  if (eta == 0.0) return 0.0;
  const double var_t = schedule.noise_variance(t);
  const double ratio_gap = -std::expm1(schedule.log_alpha_bar(s) - schedule.log_alpha_bar(t));
  return eta * std::sqrt(var_t / var_s) * std::sqrt(ratio_gap);
}

TimeGrid make_time_grid(const NoiseSchedule& schedule, std::size_t n, double t0) {
  if (n == 0) throw DomainError("make_time_grid: n must be positive");
  if (!(t0 > 0.0 && t0 <= schedule.horizon()))
    throw DomainError("make_time_grid: t0 must lie in (0, T]");
  TimeGrid grid;
  grid.times.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    grid.times[i] = t0 * static_cast<double>(i) / static_cast<double>(n);
  }
  grid.times[n] = t0;
  return grid;
}

TimeGrid clamp_min_time(TimeGrid grid, double min_time) {
  if (grid.times.size() < 2) throw DomainError("clamp_min_time: grid needs at least one step");
  if (grid.times[0] >= min_time) return grid;
  if (!(min_time < grid.times[1]))
    throw DomainError("clamp_min_time: minimum time not below the second grid point");
  grid.times[0] = min_time;
  return grid;
}

}  // namespace sdelab
