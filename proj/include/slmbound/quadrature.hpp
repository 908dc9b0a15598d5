#pragma once

#include <string>

#include "slmbound/errors.hpp"

namespace slmbound {

/// Numerical settings for mean functions without a closed form.
struct QuadratureConfig {
  double half_width_sigmas = 10.0;   // integration window is the mean +- this many sigma
  int nodes = 2001;                  // Simpson nodes per integration segment
  double fd_relative_step = 1e-4;    // h = fd_relative_step * max(1, |s|)

  void validate() const {
    if (nodes < 51 || nodes % 2 == 0) {
      throw ArgumentError("quadrature: node count must be odd and >= 51");
    }
    if (!(half_width_sigmas >= 6.0)) throw ArgumentError("quadrature: half-width must be >= 6 sigma");
    if (!(fd_relative_step > 0.0)) throw ArgumentError("quadrature: step must be positive");
  }
};

/// Composite Simpson rule with an odd number of nodes on [lo, hi].
template <typename F>
double simpson(F&& f, double lo, double hi, int nodes) {
  const int panels = nodes - 1;
  const double h = (hi - lo) / panels;
  double odd = 0.0;
  double even = 0.0;
  for (int i = 1; i < panels; ++i) {
    const double v = f(lo + i * h);
    (i % 2 == 1 ? odd : even) += v;
  }
  return h / 3.0 * (f(lo) + 4.0 * odd + 2.0 * even + f(hi));
}

}  // namespace slmbound
