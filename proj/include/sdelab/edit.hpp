#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sdelab/image.hpp"
#include "sdelab/rng.hpp"
#include "sdelab/schedule.hpp"
#include "sdelab/score.hpp"

namespace sdelab {

struct DragPair {
  Pixel source;
  Pixel target;
  bool operator==(const DragPair&) const = default;
};

struct DragSpec {
  std::vector<DragPair> pairs;
  int radius = 5;
  double alpha = 1.1;
  double beta = 0.3;
  std::optional<int> m;  // nullopt = auto: ceil(max pair distance / 2), at least 1
  double t0 = 0.6;
  std::size_t n = 120;
  std::optional<BinaryMask> mask;  // 1 = region allowed to change
};

// "r1,c1:r2,c2;r3,c3:r4,c4" -> pairs.
std::vector<DragPair> parse_drag_points(std::string_view text);

int resolve_drag_steps(const DragSpec& spec);
// Throws EditError for an empty pair list, points outside the image,
// alpha < 1 (1 is kept for identity drags), beta outside [0, 1], radius < 0,
// m < 1, or a mask of the wrong size.
void validate_drag_spec(const DragSpec& spec, const LatentImage& image);

// Points at fractions j/m (j = 1..m) along source -> target, rounded to the
// nearest pixel; the last one is target exactly.
std::vector<Pixel> intermediate_targets(Pixel source, Pixel target, int m);

// One copy-and-paste manipulation for a single (source, target) pair: the
// square T around `target` receives alpha times the aligned square S around
// `source` (offsets valid in both), then the in-bounds part of S outside T is
// set to beta * x + sqrt(1 - beta^2) * noise. `noise` is an h*w field.
LatentImage copy_paste(const LatentImage& latent, Pixel source, Pixel target, int radius,
                       double alpha, double beta, std::span<const double> noise);
// Applies all pairs in order; pair p of sub-step `step` takes its noise field
// from rng's edit stream at index step * pairs + p.
LatentImage copy_paste(const LatentImage& latent, const std::vector<DragPair>& pairs, int radius,
                       double alpha, double beta, const CounterRng& rng, std::uint32_t step);

// Manipulation inputs of every drag iteration, for comparing solver variants.
struct DragTrace {
  struct Iteration {
    std::vector<DragPair> pairs;
    std::uint32_t noise_step = 0;
    bool operator==(const Iteration&) const = default;
  };
  int m = 0;
  std::uint64_t seed = 0;
  std::uint64_t particle = 0;
  std::vector<Iteration> iterations;
  bool operator==(const DragTrace&) const = default;
};

LatentImage sde_drag(const LatentImage& x0, const ScoreModel& model, const DragSpec& spec,
                     const CounterRng& rng, const Conditioning& conditioning = {},
                     DragTrace* trace = nullptr);
LatentImage ode_drag(const LatentImage& x0, const ScoreModel& model, const DragSpec& spec,
                     const CounterRng& rng, const Conditioning& conditioning = {},
                     DragTrace* trace = nullptr);

// Samples the masked region (mask = 1) from the prior at grid.back() while
// the unmasked region follows a fresh forward perturbation of `observed` at
// each grid time; the unmasked region of the result equals `observed`.
LatentImage inpaint(const LatentImage& observed, const BinaryMask& mask, const ScoreModel& model,
                    double eta, const TimeGrid& grid, const CounterRng& rng,
                    const Conditioning& conditioning = {});

enum class TransferMode { ode, cycle_sde };
TransferMode parse_transfer_mode(std::string_view name);

// Inverts under the source label and regenerates under the target label.
LatentImage domain_transfer(const LatentImage& x0, const ScoreModel& model, Label source,
                            Label target, TransferMode mode, const TimeGrid& grid,
                            const CounterRng& rng,
                            const std::optional<GuidanceSchedule>& guidance = std::nullopt);

}  // namespace sdelab
