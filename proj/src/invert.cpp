#include "sdelab/invert.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "sdelab/error.hpp"

namespace sdelab {

std::vector<double> ddim_invert(const ScoreModel& model, std::span<const double> x0,
                                const TimeGrid& grid, const Conditioning& conditioning,
                                Trajectory* trajectory) {
  if (x0.size() != model.dimension()) throw DomainError("ddim_invert: dimension mismatch");
  const TimeGrid g = grid_for_model(model, grid);
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> eps(x.size());
  if (trajectory) {
    trajectory->times = g;
    trajectory->states.assign(1, x);
  }
  for (std::size_t i = 1; i <= g.steps(); ++i) {
    const double s = g.times[i - 1];
    const double t = g.times[i];
    predict_eps(model, x, s, conditioning, eps);
    const auto c = inversion_coefficients(model.schedule(), s, t);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = c.x_coeff * x[k] + c.eps_coeff * eps[k];
    if (trajectory) trajectory->states.push_back(x);
  }
  return x;
}

TimeGrid record_grid(const ScoreModel& model, TimeGrid grid) {
  return clamp_min_time(std::move(grid), std::max(model.min_time(), kMinPositiveTime));
}

CycleNoiseRecord cycle_record(const ScoreModel& model, std::span<const double> x0,
                              const TimeGrid& grid, const CounterRng& rng,
                              const Conditioning& conditioning) {
  if (x0.size() != model.dimension()) throw DomainError("cycle_record: dimension mismatch");
  CycleNoiseRecord rec;
  rec.grid = record_grid(model, grid);
  rec.conditioning = conditioning;
  const std::size_t n = rec.grid.steps();
  const std::size_t d = x0.size();
  const auto& times = rec.grid.times;

  rec.forward_states.reserve(n + 1);
  rec.forward_states.emplace_back(x0.begin(), x0.end());
  std::vector<double> noise(d);
  for (std::size_t i = 1; i <= n; ++i) {
    rng.normals(StreamKind::forward, static_cast<std::uint32_t>(i), noise);
    std::vector<double> next(d);
    forward_perturb(model.schedule(), rec.forward_states.back(), times[i], times[i - 1], noise, next);
    rec.forward_states.push_back(std::move(next));
  }
  rec.latent_at_t0 = rec.forward_states.back();

  rec.noises.assign(n, {});
  rec.sigmas.assign(n, 0.0);
  std::vector<double> eps(d);
  for (std::size_t i = n; i >= 1; --i) {
    const auto c = step_coefficients(model.schedule(), times[i], times[i - 1], 1.0);
    if (!(c.sigma > 0.0)) throw RecordError("cycle_record: step with sigma = 0");
    const auto& upper = rec.forward_states[i];
    const auto& lower = rec.forward_states[i - 1];
    predict_eps(model, upper, times[i], conditioning, eps);
    auto& w = rec.noises[i - 1];
    w.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double det = c.x_coeff * upper[k] + c.eps_coeff * eps[k];
      w[k] = (lower[k] - det) / c.sigma;
    }
    rec.sigmas[i - 1] = c.sigma;
  }
  return rec;
}

std::vector<double> cycle_replay(const CycleNoiseRecord& record, std::span<const double> start,
                                 const ScoreModel& model, const ReplayOptions& options) {
  if (start.size() != record.dimension() || model.dimension() != record.dimension())
    throw RecordError("cycle_replay: dimension mismatch");
  const Conditioning& cond = options.conditioning ? *options.conditioning : record.conditioning;
  if (!(cond == record.conditioning) && !options.allow_condition_swap)
    throw RecordError("cycle_replay: conditioning differs from the recording");
  const std::size_t n = record.steps();
  if (record.grid.steps() != n || record.noises.size() != n)
    throw RecordError("cycle_replay: inconsistent record");
  const auto& times = record.grid.times;
  std::vector<double> x(start.begin(), start.end());
  std::vector<double> eps(x.size());
  if (options.hook) options.hook(n, times[n], x);
  for (std::size_t i = n; i >= 1; --i) {
    const auto c = step_coefficients(model.schedule(), times[i], times[i - 1], 1.0);
    predict_eps(model, x, times[i], cond, eps);
    const auto& w = record.noises[i - 1];
    const double sigma = record.sigmas[i - 1];
    for (std::size_t k = 0; k < x.size(); ++k)
      x[k] = c.x_coeff * x[k] + c.eps_coeff * eps[k] + sigma * w[k];
    if (options.hook) options.hook(i - 1, times[i - 1], x);
  }
  return x;
}

// ---------------------------------------------------------------------------

namespace {

void put(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  os.write(buf, 8);
}

double get(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("record file truncated");
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_record(const CycleNoiseRecord& record, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  put(os, static_cast<double>(record.dimension()));
  put(os, static_cast<double>(record.steps()));
  put(os, record.grid.back());
  for (double v : record.latent_at_t0) put(os, v);
  for (const auto& w : record.noises)
    for (double v : w) put(os, v);
  if (!os) throw FormatError("failed writing " + path.string());
}

CycleNoiseRecord read_record(const std::filesystem::path& path, const ScoreModel& model,
                             const Conditioning& conditioning) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  const double dim_f = get(is);
  const double n_f = get(is);
  const double t0 = get(is);
  if (!(dim_f >= 1 && n_f >= 1) || dim_f != std::floor(dim_f) || n_f != std::floor(n_f))
    throw FormatError("bad record header");
  const auto d = static_cast<std::size_t>(dim_f);
  const auto n = static_cast<std::size_t>(n_f);
  if (d != model.dimension()) throw RecordError("record dimension does not match the model");
  CycleNoiseRecord rec;
  rec.grid = record_grid(model, make_time_grid(model.schedule(), n, t0));
  rec.conditioning = conditioning;
  rec.latent_at_t0.resize(d);
  for (double& v : rec.latent_at_t0) v = get(is);
  rec.noises.assign(n, std::vector<double>(d));
  for (auto& w : rec.noises)
    for (double& v : w) v = get(is);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in record");
  rec.sigmas.resize(n);
  for (std::size_t i = 1; i <= n; ++i)
    rec.sigmas[i - 1] = step_sigma(model.schedule(), rec.grid.times[i], rec.grid.times[i - 1], 1.0);
  return rec;
}

}  // namespace sdelab
