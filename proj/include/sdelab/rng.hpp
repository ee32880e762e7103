#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace sdelab {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., SC'11). Pure function of
// (counter, key).
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

// Independent uses of randomness inside one particle's life. Each kind gets
// its own counter subspace so that, e.g., the SDE and ODE variants of an edit
// see the same copy-and-paste noise.
enum class StreamKind : std::uint32_t {
  prior = 1,
  forward = 2,
  step = 3,
  edit = 4,
  data = 5,
  aux = 6,
};

// Counter-based normal/uniform source keyed by (seed, particle). A draw is
// addressed by (kind, step, index) so results never depend on call order or
// on how particles are spread over workers.
class CounterRng {
 public:
  static constexpr std::uint32_t kMaxStep = (1u << 24) - 1;

  CounterRng(std::uint64_t seed, std::uint64_t particle) noexcept
      : seed_(seed), particle_(particle) {}

  [[nodiscard]] CounterRng for_particle(std::uint64_t particle) const noexcept {
    return {seed_, particle};
  }
  // Independent generator for the same particle, e.g. one per iteration of a
  // repeated edit. The seed is remixed with splitmix64.
  [[nodiscard]] CounterRng derive(std::uint64_t tag) const noexcept;
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t particle() const noexcept { return particle_; }

  // Fills `out` with standard normals (Box-Muller on 53-bit uniforms).
  void normals(StreamKind kind, std::uint32_t step, std::span<double> out) const;
  // Fills `out` with uniforms in the open interval (0, 1).
  void uniforms(StreamKind kind, std::uint32_t step, std::span<double> out) const;

  [[nodiscard]] double normal(StreamKind kind, std::uint32_t step) const;
  [[nodiscard]] double uniform(StreamKind kind, std::uint32_t step) const;

 private:
  [[nodiscard]] PhiloxCounter block(StreamKind kind, std::uint32_t step,
                                    std::uint32_t index) const;

  std::uint64_t seed_;
  std::uint64_t particle_;
};

}  // namespace sdelab
