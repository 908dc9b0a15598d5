#pragma once

#include <cmath>
#include <numbers>

namespace slmbound::normal {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
inline double cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
/// Upper tail 1 - cdf(z), accurate for large z.
inline double sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

/// cdf(upper) - cdf(lower) without cancellation when both lie in one tail.
inline double interval(double lower, double upper) {
  if (!(upper > lower)) return 0.0;
  if (lower > 0.0) return sf(lower) - sf(upper);
  if (upper < 0.0) return cdf(upper) - cdf(lower);
  return 1.0 - sf(upper) - cdf(lower);
}

}  // namespace slmbound::normal
