#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdelab/rng.hpp"
#include "sdelab/schedule.hpp"
#include "sdelab/score.hpp"

namespace sdelab {

// Distribution of the starting states of a reverse run. All coordinates are
// i.i.d. draws from the same one-dimensional law.
class Prior {
 public:
  enum class Kind { standard_normal, normal, uniform, point_mass };

  static Prior standard_normal();
  static Prior normal(double mean, double variance);
  static Prior uniform(double lo, double hi);
  static Prior point_mass(double value);
  // "std", "normal:<mean>,<variance>", "uniform:<lo>,<hi>", "point:<value>".
  static Prior parse(std::string_view spec);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double mean() const noexcept { return a_; }
  [[nodiscard]] double variance() const noexcept { return b_; }
  [[nodiscard]] double lo() const noexcept { return a_; }
  [[nodiscard]] double hi() const noexcept { return b_; }
  [[nodiscard]] std::string describe() const;

  void draw(const CounterRng& rng, std::span<double> out) const;
  // Per-coordinate log density (-inf outside the support); not defined for
  // point masses.
  [[nodiscard]] double log_density(double x) const;

 private:
  Prior(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_;
  double b_;
};

// Coefficients of x_t = x_coeff * x_s + eps_coeff * eps + sigma * w for one
// unified DDIM/DDPM step from s down to t (or, with eta = 0 and s < t, one
// DDIM inversion step).
struct StepCoefficients {
  double x_coeff;
  double eps_coeff;
  double sigma;
};

StepCoefficients step_coefficients(const NoiseSchedule& schedule, double s, double t, double eta);
StepCoefficients inversion_coefficients(const NoiseSchedule& schedule, double s, double t);

// Unified update
//   x_t = sqrt(a_t) (x_s - sqrt(1 - a_s) eps) / sqrt(a_s) + sqrt(1 - a_t - sigma^2) eps + sigma w
// with sigma = step_sigma(s, t, eta). `noise` is read only when sigma > 0.
void unified_step(const NoiseSchedule& schedule, std::span<const double> x_s, double s, double t,
                  std::span<const double> eps, double eta, std::span<const double> noise,
                  std::span<double> out);

// Forward kernel from level t up to level s >= t:
//   x_s = sqrt(a_s / a_t) x_t + sqrt(1 - a_s / a_t) w.
void forward_perturb(const NoiseSchedule& schedule, std::span<const double> x_t, double s, double t,
                     std::span<const double> noise, std::span<double> out);
// Same, drawing w from rng's forward stream at `step`.
std::vector<double> forward_perturb(const NoiseSchedule& schedule, std::span<const double> x_t,
                                    double s, double t, const CounterRng& rng, std::uint32_t step);

struct Trajectory {
  TimeGrid times;
  std::vector<std::vector<double>> states;  // states[i] is the state at times.times[i]
};

// Called after the state reaches grid index `index` (also once for the
// starting state at the top index). May modify the state in place.
using StepHook = std::function<void(std::size_t index, double t, std::span<double> state)>;

// Runs the unified step down `grid` from `state` at grid.back() to
// grid.front(). Fresh step noise comes from rng's step stream indexed by the
// grid index of the upper time.
void reverse_run(const ScoreModel& model, std::span<double> state, const TimeGrid& grid, double eta,
                 const Conditioning& conditioning, const CounterRng& rng,
                 const StepHook& hook = {});

// Deterministic DDIM sampling (eta = 0) from `start` at grid.back().
std::vector<double> ddim_sample(const ScoreModel& model, std::span<const double> start,
                                const TimeGrid& grid, const Conditioning& conditioning = {},
                                const StepHook& hook = {});

struct SamplerConfig {
  double eta = 1.0;
  TimeGrid grid;
  std::uint64_t seed = 0;
  Conditioning conditioning;
};

struct SampleOptions {
  bool keep_trajectories = false;
  std::size_t workers = 1;
};

struct SampleResult {
  std::size_t dimension = 0;
  std::size_t particles = 0;
  std::vector<double> states;  // particle-major, particles x dimension
  std::vector<Trajectory> trajectories;
  TimeGrid grid;  // grid actually used (after clamping)

  [[nodiscard]] std::span<const double> state(std::size_t particle) const {
    return {states.data() + particle * dimension, dimension};
  }
};

// Draws `particles` starting states from `prior` at the top of the grid and
// runs the reverse process for each. Particle k uses CounterRng(seed, k), so
// the result does not depend on the worker count.
SampleResult sample(const ScoreModel& model, const SamplerConfig& config, const Prior& prior,
                    std::size_t particles, const SampleOptions& options = {});

// Grid with its first time raised to model.min_time() where needed.
TimeGrid grid_for_model(const ScoreModel& model, TimeGrid grid);

}  // namespace sdelab
