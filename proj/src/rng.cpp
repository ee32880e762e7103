#include "sdelab/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sdelab {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                    std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

// 53 random bits mapped to the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

CounterRng CounterRng::derive(std::uint64_t tag) const noexcept {
  return {splitmix64(seed_ ^ splitmix64(tag)), particle_};
}

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
    mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

PhiloxCounter CounterRng::block(StreamKind kind, std::uint32_t step,
                                std::uint32_t index) const {
  if (step > kMaxStep) throw std::out_of_range("CounterRng: step index exceeds 2^24-1");
  const PhiloxCounter counter{
      index, (static_cast<std::uint32_t>(kind) << 24) | step,
      static_cast<std::uint32_t>(particle_), static_cast<std::uint32_t>(particle_ >> 32)};
  const PhiloxKey key{static_cast<std::uint32_t>(seed_),
                      static_cast<std::uint32_t>(seed_ >> 32)};
  return philox4x32_10(counter, key);
}

void CounterRng::normals(StreamKind kind, std::uint32_t step, std::span<double> out) const {
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const PhiloxCounter r = block(kind, step, static_cast<std::uint32_t>(i / 2));
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] = radius * std::cos(angle);
    if (i + 1 < out.size()) out[i + 1] = radius * std::sin(angle);
  }
}

void CounterRng::uniforms(StreamKind kind, std::uint32_t step, std::span<double> out) const {
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const PhiloxCounter r = block(kind, step, static_cast<std::uint32_t>(i / 2));
    out[i] = to_open_unit(r[0], r[1]);
    if (i + 1 < out.size()) out[i + 1] = to_open_unit(r[2], r[3]);
  }
}

double CounterRng::normal(StreamKind kind, std::uint32_t step) const {
  double z = 0.0;
  normals(kind, step, std::span<double>(&z, 1));
  return z;
}

double CounterRng::uniform(StreamKind kind, std::uint32_t step) const {
  double u = 0.0;
  uniforms(kind, step, std::span<double>(&u, 1));
  return u;
}

}  // namespace sdelab
