#include "sdelab/edit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "sdelab/error.hpp"
#include "sdelab/invert.hpp"
#include "sdelab/sampler.hpp"

namespace sdelab {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw FormatError("bad drag points '" + std::string(whole) + "'");
  return v;
}

Pixel parse_pixel(std::string_view s, std::string_view whole) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) throw FormatError("bad drag points '" + std::string(whole) + "'");
  return {parse_int(s.substr(0, comma), whole), parse_int(s.substr(comma + 1), whole)};
}

}  // namespace

std::vector<DragPair> parse_drag_points(std::string_view text) {
  std::vector<DragPair> pairs;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto semi = rest.find(';');
    const auto item = rest.substr(0, semi);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw FormatError("bad drag points '" + std::string(text) + "'");
    pairs.push_back({parse_pixel(item.substr(0, colon), text), parse_pixel(item.substr(colon + 1), text)});
    if (semi == std::string_view::npos) break;
    rest.remove_prefix(semi + 1);
  }
  if (pairs.empty()) throw FormatError("no drag points given");
  return pairs;
}

int resolve_drag_steps(const DragSpec& spec) {
  if (spec.m) return *spec.m;
  double longest = 0.0;
  for (const auto& p : spec.pairs)
    longest = std::max(longest, std::hypot(p.target.row - p.source.row, p.target.col - p.source.col));
  return std::max(1, static_cast<int>(std::ceil(longest / 2.0)));
}

void validate_drag_spec(const DragSpec& spec, const LatentImage& image) {
  if (spec.pairs.empty()) throw EditError("drag spec has no point pairs");
  for (const auto& p : spec.pairs)
    if (!image.contains(p.source) || !image.contains(p.target))
      throw EditError("drag point outside the image");
  if (!(spec.alpha >= 1.0)) throw EditError("drag alpha must be >= 1");
  if (!(spec.beta >= 0.0 && spec.beta <= 1.0)) throw EditError("drag beta outside [0, 1]");
  if (spec.radius < 0) throw EditError("drag radius must be nonnegative");
  if (spec.m && *spec.m < 1) throw EditError("drag m must be positive");
  if (spec.mask && !spec.mask->matches(image)) throw EditError("drag mask size mismatch");
}

std::vector<Pixel> intermediate_targets(Pixel source, Pixel target, int m) {
  if (m < 1) throw EditError("intermediate_targets: m must be positive");
  std::vector<Pixel> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int j = 1; j < m; ++j) {
    const double f = static_cast<double>(j) / m;
    out.push_back({static_cast<int>(std::lround(source.row + f * (target.row - source.row))),
                   static_cast<int>(std::lround(source.col + f * (target.col - source.col)))});
  }
  out.push_back(target);
  return out;
}

LatentImage copy_paste(const LatentImage& latent, Pixel source, Pixel target, int radius,
                       double alpha, double beta, std::span<const double> noise) {
  if (noise.size() != latent.values.size()) throw EditError("copy_paste: noise field size mismatch");
  LatentImage out = latent;
  bool copied = false;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const Pixel s{source.row + dr, source.col + dc};
      const Pixel t{target.row + dr, target.col + dc};
      if (!latent.contains(s) || !latent.contains(t)) continue;
      out.at(t) = alpha * latent.at(s);
      copied = true;
    }
  }
  if (!copied) throw EditError("copy_paste: patch has zero area after clipping");
  const double keep = beta;
  const double fresh = std::sqrt(std::max(0.0, 1.0 - beta * beta));
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const Pixel s{source.row + dr, source.col + dc};
      if (!latent.contains(s)) continue;
      if (std::abs(s.row - target.row) <= radius && std::abs(s.col - target.col) <= radius) continue;
      const auto k = latent.index(s);
      out.values[k] = keep * latent.values[k] + fresh * noise[k];
    }
  }
  return out;
}

LatentImage copy_paste(const LatentImage& latent, const std::vector<DragPair>& pairs, int radius,
                       double alpha, double beta, const CounterRng& rng, std::uint32_t step) {
  LatentImage out = latent;
  std::vector<double> noise(latent.values.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    rng.normals(StreamKind::edit, static_cast<std::uint32_t>(step * pairs.size() + p), noise);
    out = copy_paste(out, pairs[p].source, pairs[p].target, radius, alpha, beta, noise);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

enum class Solver { cycle_sde, ode };

void pin_unmasked(std::span<double> state, std::span<const double> pinned, const BinaryMask& mask) {
  for (std::size_t k = 0; k < state.size(); ++k)
    if (!mask.values[k]) state[k] = pinned[k];
}

LatentImage drag(const LatentImage& x0, const ScoreModel& model, const DragSpec& spec,
                 const CounterRng& rng, const Conditioning& conditioning, DragTrace* trace,
                 Solver solver) {
  validate_drag_spec(spec, x0);
  if (model.dimension() != x0.values.size()) throw EditError("drag: model dimension mismatch");
  const int m = resolve_drag_steps(spec);
  const TimeGrid grid = make_time_grid(model.schedule(), spec.n, spec.t0);
  if (trace) {
    *trace = {};
    trace->m = m;
    trace->seed = rng.seed();
    trace->particle = rng.particle();
  }

  std::vector<std::vector<Pixel>> paths;
  for (const auto& p : spec.pairs) paths.push_back(intermediate_targets(p.source, p.target, m));
  std::vector<Pixel> current_points;
  for (const auto& p : spec.pairs) current_points.push_back(p.source);

  LatentImage current = x0;
  for (int j = 1; j <= m; ++j) {
    std::vector<DragPair> sub;
    for (std::size_t p = 0; p < spec.pairs.size(); ++p)
      sub.push_back({current_points[p], paths[p][static_cast<std::size_t>(j - 1)]});
    const auto noise_step = static_cast<std::uint32_t>(j);
    if (trace) trace->iterations.push_back({sub, noise_step});

    if (solver == Solver::cycle_sde) {
      const auto record =
          cycle_record(model, current.values, grid, rng.derive(static_cast<std::uint64_t>(j)), conditioning);
      LatentImage latent(x0.height, x0.width, record.latent_at_t0);
      latent = copy_paste(latent, sub, spec.radius, spec.alpha, spec.beta, rng, noise_step);
      ReplayOptions options;
      if (spec.mask) {
        const BinaryMask& mask = *spec.mask;
        options.hook = [&](std::size_t index, double, std::span<double> state) {
          pin_unmasked(state, record.forward_states[index], mask);
        };
      }
      current.values = cycle_replay(record, latent.values, model, options);
    } else {
      Trajectory inversion;
      const auto top = ddim_invert(model, current.values, grid, conditioning, &inversion);
      LatentImage latent(x0.height, x0.width, top);
      latent = copy_paste(latent, sub, spec.radius, spec.alpha, spec.beta, rng, noise_step);
      StepHook hook;
      if (spec.mask) {
        const BinaryMask& mask = *spec.mask;
        hook = [&](std::size_t index, double, std::span<double> state) {
          pin_unmasked(state, inversion.states[index], mask);
        };
      }
      current.values = ddim_sample(model, latent.values, inversion.times, conditioning, hook);
    }
    for (std::size_t p = 0; p < spec.pairs.size(); ++p) current_points[p] = sub[p].target;
  }
  return current;
}

}  // namespace

LatentImage sde_drag(const LatentImage& x0, const ScoreModel& model, const DragSpec& spec,
                     const CounterRng& rng, const Conditioning& conditioning, DragTrace* trace) {
  return drag(x0, model, spec, rng, conditioning, trace, Solver::cycle_sde);
}

LatentImage ode_drag(const LatentImage& x0, const ScoreModel& model, const DragSpec& spec,
                     const CounterRng& rng, const Conditioning& conditioning, DragTrace* trace) {
  return drag(x0, model, spec, rng, conditioning, trace, Solver::ode);
}

LatentImage inpaint(const LatentImage& observed, const BinaryMask& mask, const ScoreModel& model,
                    double eta, const TimeGrid& grid, const CounterRng& rng,
                    const Conditioning& conditioning) {
  if (!mask.matches(observed)) throw EditError("inpaint: mask size mismatch");
  if (model.dimension() != observed.values.size()) throw EditError("inpaint: model dimension mismatch");
  if (std::none_of(mask.values.begin(), mask.values.end(), [](auto v) { return v != 0; }))
    return observed;
  const TimeGrid g = grid_for_model(model, grid);
  LatentImage x(observed.height, observed.width);
  rng.normals(StreamKind::prior, 0, x.values);
  std::vector<double> noise(x.values.size());
  std::vector<double> observed_t(x.values.size());
  const StepHook hook = [&](std::size_t index, double t, std::span<double> state) {
    if (index == 0) return;
    rng.normals(StreamKind::forward, static_cast<std::uint32_t>(index), noise);
    forward_perturb(model.schedule(), observed.values, t, 0.0, noise, observed_t);
    pin_unmasked(state, observed_t, mask);
  };
  reverse_run(model, x.values, g, eta, conditioning, rng, hook);
  pin_unmasked(x.values, observed.values, mask);
  return x;
}

TransferMode parse_transfer_mode(std::string_view name) {
  if (name == "ode") return TransferMode::ode;
  if (name == "cycle_sde" || name == "sde") return TransferMode::cycle_sde;
  throw FormatError("unknown transfer mode '" + std::string(name) + "'");
}

LatentImage domain_transfer(const LatentImage& x0, const ScoreModel& model, Label source,
                            Label target, TransferMode mode, const TimeGrid& grid,
                            const CounterRng& rng, const std::optional<GuidanceSchedule>& guidance) {
  if (!model.supports_conditioning()) throw CapabilityError("domain transfer needs a conditional model");
  if (model.dimension() != x0.values.size()) throw EditError("domain_transfer: dimension mismatch");
  const Conditioning from{source, guidance};
  const Conditioning to{target, guidance};
  LatentImage out(x0.height, x0.width);
  if (mode == TransferMode::ode) {
    Trajectory inversion;
    const auto top = ddim_invert(model, x0.values, grid, from, &inversion);
    out.values = ddim_sample(model, top, inversion.times, to);
  } else {
    const auto record = cycle_record(model, x0.values, grid, rng, from);
    ReplayOptions options;
    options.conditioning = to;
    options.allow_condition_swap = true;
    out.values = cycle_replay(record, record.latent_at_t0, model, options);
  }
  return out;
}

}  // namespace sdelab
