#pragma once

// Counter-based Gaussian noise. Every draw is a pure function of
// (seed, stream, particle, step, component), so ensembles are reproducible
// under any parallel schedule.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace langevin_lab::rng {

/// Philox4x32-10 (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Independent noise families. Distinct streams never share counters.
enum class Stream : std::uint32_t {
  lmc_noise = 0,
  init = 1,
  interpolation = 2,
  brownian = 3,
  holder_pairs = 4,
  displacement = 5,
  diffusion = 6,
  mean_norm = 7,
  grid_instances = 8,
};

/// Uniform in the open interval (0, 1) built from 52 random bits; (k + 1/2) 2^-52
/// is exact for every k, so neither endpoint is reachable.
inline double to_open_unit(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t bits = (std::uint64_t{a >> 6} << 26) | (b >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Standard normals for one (seed, stream, particle, step) cell; component k
/// is always the same number regardless of how many components are requested.
class NormalBlock {
 public:
  NormalBlock(std::uint64_t seed, Stream stream, std::uint64_t particle, std::uint64_t step)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        c0_(static_cast<std::uint32_t>(particle)),
        c1_(static_cast<std::uint32_t>((particle >> 32) & 0xFFFFu) |
            (static_cast<std::uint32_t>((step >> 32) & 0xFFu) << 16) |
            (static_cast<std::uint32_t>(stream) << 24)),
        c2_(static_cast<std::uint32_t>(step)) {}

  /// Two normals from counter block `block` (components 2*block, 2*block+1).
  std::array<double, 2> pair(std::uint32_t block) const {
    const auto r = philox4x32({c0_, c1_, c2_, block}, key_);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  void fill(std::span<double> out) const {
    std::size_t k = 0;
    for (std::uint32_t block = 0; k < out.size(); ++block) {
      const auto z = pair(block);
      out[k++] = z[0];
      if (k < out.size()) out[k++] = z[1];
    }
  }

  double operator[](std::size_t component) const {
    return pair(static_cast<std::uint32_t>(component / 2))[component % 2];
  }

  /// Uniform in (0,1), drawn from the upper half of the counter space so it
  /// never coincides with a normal block.
  double uniform(std::uint32_t index) const {
    const auto r = philox4x32({c0_, c1_, c2_, 0x80000000u | index}, key_);
    return to_open_unit(r[0], r[1]);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t c0_, c1_, c2_;
};

}  // namespace langevin_lab::rng
