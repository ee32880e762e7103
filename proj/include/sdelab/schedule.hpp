#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace sdelab {

enum class ScheduleKind { cosine, linear };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

// Drift f(t) and squared diffusion g^2(t) of the variance-preserving SDE
// dx = f(t) x dt + g(t) dw.
struct VpCoefficients {
  double drift;
  double diffusion_sq;
};

// Continuous-time signal-retention curve alpha_bar(t) on [0, T] with T = 1.
//
// cosine: alpha_bar(t) = c(u(t)) / c(0), c(u) = cos^2(((u + s) / (1 + s)) pi/2),
//         where u(t) = t * u_end and u_end < 1 is chosen so that
//         alpha_bar(T) equals `end_alpha_bar` (the raw form reaches exactly 0 at
//         u = 1, which makes log alpha_bar singular).
// linear: log alpha_bar(t) = -(beta_min t + (beta_max - beta_min) t^2 / 2),
//         i.e. the continuous limit of a linear beta schedule.
//
// All derivatives are closed-form. Instances are immutable.
class NoiseSchedule {
 public:
  static constexpr double kHorizon = 1.0;

  static NoiseSchedule cosine(double offset = 0.008, double end_alpha_bar = 1e-3,
                              std::size_t grid_resolution = 1000);
  static NoiseSchedule linear(double beta_min = 0.1, double beta_max = 20.0,
                              std::size_t grid_resolution = 1000);
  static NoiseSchedule make(ScheduleKind kind);

  [[nodiscard]] ScheduleKind kind() const noexcept { return kind_; }
  [[nodiscard]] double horizon() const noexcept { return kHorizon; }
  [[nodiscard]] double offset() const noexcept { return offset_; }
  [[nodiscard]] std::size_t grid_resolution() const noexcept { return grid_resolution_; }

  [[nodiscard]] double alpha_bar(double t) const;
  [[nodiscard]] double log_alpha_bar(double t) const;
  // 1 - alpha_bar(t) without cancellation near t = 0.
  [[nodiscard]] double noise_variance(double t) const;
  [[nodiscard]] double alpha_bar_derivative(double t) const;
  // d log alpha_bar / dt.
  [[nodiscard]] double log_alpha_bar_derivative(double t) const;
  [[nodiscard]] VpCoefficients vp_coefficients(double t) const;
  // Closed form of the integral of g^2 over [s, t], i.e. log(alpha_bar(s) / alpha_bar(t)).
  [[nodiscard]] double integrated_diffusion(double s, double t) const;

  // alpha_bar sampled at grid_resolution + 1 evenly spaced times on [0, T].
  [[nodiscard]] std::vector<double> alpha_bar_table() const;

 private:
  NoiseSchedule() = default;
  void check_time(double t) const;
  // cosine helpers: angle theta(t) and its (constant) time derivative.
  [[nodiscard]] double cosine_angle(double t) const;

  ScheduleKind kind_ = ScheduleKind::cosine;
  std::size_t grid_resolution_ = 1000;
  double offset_ = 0.008;
  double u_end_ = 1.0;
  double angle_rate_ = 0.0;
  double log_c0_ = 0.0;
  double beta_min_ = 0.1;
  double beta_max_ = 20.0;
};

// Per-step noise scale of the unified DDIM/DDPM update from s down to t:
// eta * sqrt((1 - a_t) / (1 - a_s)) * sqrt(1 - a_s / a_t).
double step_sigma(const NoiseSchedule& schedule, double s, double t, double eta);

// Strictly increasing times t_0 < t_1 < ... < t_n.
struct TimeGrid {
  std::vector<double> times;

  [[nodiscard]] std::size_t steps() const noexcept {
    return times.empty() ? 0 : times.size() - 1;
  }
  [[nodiscard]] double front() const { return times.front(); }
  [[nodiscard]] double back() const { return times.back(); }
  bool operator==(const TimeGrid&) const = default;
};

// Smallest time used in place of t = 0 when a score is undefined there, and
// for Cycle-SDE records (whose last step must carry noise).
inline constexpr double kMinPositiveTime = 1e-5 * NoiseSchedule::kHorizon;

// Uniform grid {i * t0 / n}, i = 0..n.
TimeGrid make_time_grid(const NoiseSchedule& schedule, std::size_t n, double t0);

// Returns `grid` with its first time raised to `min_time` if it is smaller.
// Requires min_time < grid.times[1].
TimeGrid clamp_min_time(TimeGrid grid, double min_time = kMinPositiveTime);

}  // namespace sdelab
