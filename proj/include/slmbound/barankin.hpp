#pragma once

// Finite-test-point Barankin bound. Projecting gamma onto the span of the
// kernel sections R(., x_i) gives g^T R^{-1} g - gamma(x0)^2 with g_i =
// gamma(x_i), a lower bound on the variance of any estimator with mean gamma.
//
// R_ij = exp(u_i . u_j) with u_i = H (x_i - x0) / sigma overflows quickly, so
// the system is solved in the equilibrated form R = D K D with
// D = diag(exp(|u_i|^2 / 2)) and K_ij = exp(-|u_i - u_j|^2 / 2). Jitter is added
// to the unit diagonal of K, i.e. lambda D^2 on R, which can only lower the
// value.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "slmbound/errors.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/mean_function.hpp"
#include "slmbound/model.hpp"

namespace slmbound {

/// Raised when the jittered Gram matrix is numerically singular.
class IllConditionedError : public NumericalError {
 public:
  IllConditionedError(const std::string& what, int usable_points)
      : NumericalError(what), usable_points_(usable_points) {}
  /// Number of leading test points whose Gram block factors cleanly.
  [[nodiscard]] int usable_points() const { return usable_points_; }

 private:
  int usable_points_;
};

struct TestPointSet {
  std::vector<Vector> points;  // points[0] is x0
  double jitter = 1e-12;
};

inline void validate(const TestPointSet& pts, const SparseLinearModel& model, const Vector& x0) {
  if (pts.points.empty()) throw ArgumentError("test points: empty set");
  if (!(pts.jitter >= 0.0)) throw ArgumentError("test points: jitter must be >= 0");
  if (pts.points.front() != x0) throw ArgumentError("test points: first point must be x0");
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    require_sparse(pts.points[i], model.sparsity(), model.n_dim(), "test points");
    for (std::size_t j = 0; j < i; ++j) {
      if (pts.points[i] == pts.points[j]) {
        throw ArgumentError("test points: duplicate point " + std::to_string(i));
      }
    }
  }
}

/// x0 followed by an axis-aligned grid over the vectors supported in K,
/// centered at s0 = H_K^+ H x0 with half_width on each axis.
inline TestPointSet grid_points(const SparseLinearModel& model, const SupportSet& k,
                                const Vector& x0, double half_width, int per_axis,
                                double jitter = 1e-12) {
  if (per_axis < 1) throw ArgumentError("grid_points: per_axis must be >= 1");
  if (!(half_width > 0.0)) throw ArgumentError("grid_points: half_width must be positive");
  TestPointSet out{{x0}, jitter};
  if (per_axis == 1) return out;

  const Vector s0 = isometry_data(model, k, x0).s0;
  const int s = k.size();
  std::vector<double> axis(static_cast<std::size_t>(per_axis));
  for (int i = 0; i < per_axis; ++i) {
    axis[static_cast<std::size_t>(i)] = -half_width + 2.0 * half_width * i / (per_axis - 1);
  }
  std::vector<int> digit(static_cast<std::size_t>(s), 0);
  while (true) {
    Vector offset(s);
    for (int l = 0; l < s; ++l) offset[l] = axis[static_cast<std::size_t>(digit[l])];
    Vector x = embed(Vector(s0 + offset), k, model.n_dim());
    if (x != x0) out.points.push_back(std::move(x));
    int l = s - 1;
    while (l >= 0 && ++digit[static_cast<std::size_t>(l)] == per_axis) {
      digit[static_cast<std::size_t>(l)] = 0;
      --l;
    }
    if (l < 0) break;
  }
  return out;
}

/// {x0, x0 + delta e_k}: the Hammersley-Chapman-Robbins pair.
inline TestPointSet two_points(const Vector& x0, int k, double delta, double jitter = 0.0) {
  if (k < 0 || k >= x0.size()) throw ArgumentError("two_points: index out of range");
  if (delta == 0.0) throw ArgumentError("two_points: delta must be nonzero");
  Vector x1 = x0;
  x1[k] += delta;
  return {{x0, x1}, jitter};
}

struct OracleResult {
  double value = 0.0;
  int n_points = 0;
  /// Ratio of the largest to the smallest Cholesky pivot of the jittered Gram.
  double condition_estimate = 1.0;
  double jitter = 0.0;
};

inline OracleResult finite_point_bound(const SparseLinearModel& model, const MeanFunction& gamma,
                                       const Vector& x0, const TestPointSet& pts) {
  validate(pts, model, x0);
  const auto p = static_cast<Eigen::Index>(pts.points.size());
  const double sigma = model.sigma();

  Matrix u(model.obs_dim(), p);
  for (Eigen::Index i = 0; i < p; ++i) {
    u.col(i) = model.h() * (pts.points[static_cast<std::size_t>(i)] - x0) / sigma;
  }
  const Vector sq = u.colwise().squaredNorm().transpose();
  Matrix gram = u.transpose() * u;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      const double d2 = std::max(0.0, sq[i] + sq[j] - 2.0 * gram(i, j));
      gram(i, j) = std::exp(-0.5 * d2);
    }
  }
  gram.diagonal().array() += pts.jitter;

  Vector w(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    w[i] = gamma(pts.points[static_cast<std::size_t>(i)]) * std::exp(-0.5 * sq[i]);
  }

  // A pivot below half the jitter means rounding has eaten the regularization.
  const double floor = std::max(0.5 * pts.jitter, 1e-15 * static_cast<double>(p));
  const Eigen::LLT<Matrix> llt(gram);
  const Vector pivots = llt.matrixLLT().diagonal().array().square();
  if (llt.info() != Eigen::Success || !pivots.allFinite() || pivots.minCoeff() <= floor) {
    // Locate the first failing pivot with a plain left-looking factorization.
    Matrix l = Matrix::Zero(p, p);
    int usable = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      double d = gram(j, j) - l.row(j).head(j).squaredNorm();
      if (!(d > floor)) break;
      l(j, j) = std::sqrt(d);
      for (Eigen::Index i = j + 1; i < p; ++i) {
        l(i, j) = (gram(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
      }
      ++usable;
    }
    throw IllConditionedError("finite_point_bound: Gram matrix numerically singular after jitter; "
                              "first " + std::to_string(usable) + " of " + std::to_string(p) +
                                  " points usable",
                              usable);
  }

  const Vector z = llt.matrixL().solve(w);
  const double g0 = gamma(x0);
  return {z.squaredNorm() - g0 * g0, static_cast<int>(p), pivots.maxCoeff() / pivots.minCoeff(),
          pts.jitter};
}

}  // namespace slmbound
