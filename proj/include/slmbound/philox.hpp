#pragma once

// Counter-based random numbers. Every Gaussian draw is a pure function of
// (seed, stream, trial, position), so Monte Carlo results do not depend on how
// trials are split across chunks or threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Core>

namespace slmbound::rng {

/// Philox4x32 with 10 rounds. Output matches the Random123 reference vectors.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

/// Maps 64 random bits to the open interval (0, 1) with 53-bit resolution.
constexpr double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Stream identifiers, so unrelated consumers of one seed never overlap.
enum class Stream : std::uint32_t {
  kObservationNoise = 0,
  kSensingMatrix = 1,
};

/// Standard normal variates via the Box-Muller transform on Philox output.
/// Each Philox block yields two normals; position p of a trial uses block p/2.
class NormalGenerator {
 public:
  NormalGenerator(std::uint64_t seed, Stream stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(static_cast<std::uint32_t>(stream)) {}

  void fill(std::uint64_t trial, Eigen::Ref<Eigen::VectorXd> out) const {
    const Eigen::Index n = out.size();
    for (Eigen::Index p = 0; p < n; p += 2) {
      const auto block = static_cast<std::uint32_t>(p / 2);
      const Philox4x32::Counter ctr{block, static_cast<std::uint32_t>(trial),
                                    static_cast<std::uint32_t>(trial >> 32), stream_};
      const auto w = Philox4x32::generate(ctr, key_);
      const double u1 = to_open_unit((static_cast<std::uint64_t>(w[0]) << 32) | w[1]);
      const double u2 = to_open_unit((static_cast<std::uint64_t>(w[2]) << 32) | w[3]);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * std::numbers::pi * u2;
      out[p] = radius * std::cos(angle);
      if (p + 1 < n) out[p + 1] = radius * std::sin(angle);
    }
  }

 private:
  Philox4x32::Key key_;
  std::uint32_t stream_;
};

}  // namespace slmbound::rng
