#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sdelab/rng.hpp"
#include "sdelab/sampler.hpp"
#include "sdelab/schedule.hpp"
#include "sdelab/score.hpp"

namespace sdelab {

// Runs the deterministic update upward from x0 at grid.front() to
// grid.back(); step i uses eps evaluated at (x_{t_{i-1}}, t_{i-1}). The grid is
// clamped to the model's minimum time first. If `trajectory` is given it
// receives every state.
std::vector<double> ddim_invert(const ScoreModel& model, std::span<const double> x0,
                                const TimeGrid& grid, const Conditioning& conditioning = {},
                                Trajectory* trajectory = nullptr);

// Per-step noises and scales that make the stochastic (eta = 1) sampler
// retrace a recorded forward chain exactly.
struct CycleNoiseRecord {
  TimeGrid grid;
  Conditioning conditioning;
  std::vector<double> latent_at_t0;
  // noises[i - 1] and sigmas[i - 1] belong to the step from grid.times[i]
  // down to grid.times[i - 1].
  std::vector<std::vector<double>> noises;
  std::vector<double> sigmas;
  // forward_states[i] is the recorded forward-chain state at grid.times[i].
  std::vector<std::vector<double>> forward_states;

  [[nodiscard]] std::size_t dimension() const noexcept { return latent_at_t0.size(); }
  [[nodiscard]] std::size_t steps() const noexcept { return sigmas.size(); }
};

// Grid actually used by records: the first time is raised to at least the
// smallest positive time so that no step has sigma = 0.
TimeGrid record_grid(const ScoreModel& model, TimeGrid grid);

// Draws the forward chain x_{t_0} = x0 -> x_{t_1} -> ... -> x_{t_n} (forward
// stream of rng, step index i) and solves each step's noise
//   w_i = (x_{t_{i-1}} - deterministic part of the eta = 1 step from x_{t_i}) / sigma_i.
CycleNoiseRecord cycle_record(const ScoreModel& model, std::span<const double> x0,
                              const TimeGrid& grid, const CounterRng& rng,
                              const Conditioning& conditioning = {});

struct ReplayOptions {
  // Conditioning for replay; defaults to the record's own.
  std::optional<Conditioning> conditioning;
  // A replay conditioning different from the record's is rejected unless this
  // is set (condition swap for domain transfer).
  bool allow_condition_swap = false;
  StepHook hook;
};

// Runs the eta = 1 step down the record's grid from `start`, substituting the
// recorded noises for fresh ones.
std::vector<double> cycle_replay(const CycleNoiseRecord& record, std::span<const double> start,
                                 const ScoreModel& model, const ReplayOptions& options = {});

// Binary layout, little-endian float64 throughout: dimension, n, t0, then the
// latent (dimension values), then noises for steps 1..n (n * dimension values).
void write_record(const CycleNoiseRecord& record, const std::filesystem::path& path);
// Rebuilds grid and sigmas from (n, t0) for `model`; forward states are not
// stored and come back empty.
CycleNoiseRecord read_record(const std::filesystem::path& path, const ScoreModel& model,
                             const Conditioning& conditioning = {});

}  // namespace sdelab
