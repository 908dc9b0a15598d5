#pragma once

// Dense linear algebra used throughout the library. Storage is Eigen; the
// factorizations with contract-level tolerances are written out here so that
// singularity is reported the same way everywhere.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slmbound/errors.hpp"

namespace slmbound {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline void require_finite(const Eigen::Ref<const Matrix>& a, const char* what) {
  if (!a.allFinite()) {
    throw ArgumentError(std::string(what) + ": non-finite entry");
  }
}

/// A^T A, symmetrized on output.
inline Matrix gram(const Matrix& a) {
  if (a.cols() < 1 || a.rows() < a.cols()) {
    throw ArgumentError("gram: expected an M x S matrix with M >= S >= 1, got " +
                        std::to_string(a.rows()) + " x " + std::to_string(a.cols()));
  }
  require_finite(a, "gram");
  Matrix g = a.transpose() * a;
  return (0.5 * (g + g.transpose())).eval();
}

/// Cholesky factorization G = L L^T of a symmetric positive definite matrix.
///
/// A pivot at or below 1e-12 * trace(G) / n is treated as singular. Only the
/// lower triangle of G is read after the symmetry check.
class Cholesky {
 public:
  static constexpr double kRelativePivotTolerance = 1e-12;

  explicit Cholesky(const Matrix& g) {
    if (g.rows() != g.cols() || g.rows() == 0) {
      throw ArgumentError("cholesky: matrix must be square and non-empty");
    }
    require_finite(g, "cholesky");
    const Eigen::Index n = g.rows();
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if (((g - g.transpose()).cwiseAbs().maxCoeff()) > 1e-9 * scale) {
      throw ArgumentError("cholesky: matrix is not symmetric");
    }
    const double trace = g.trace();
    const double tol = kRelativePivotTolerance * trace / static_cast<double>(n);
    if (!(trace > 0.0)) {
      throw SingularityError("cholesky: non-positive trace");
    }
    lower_ = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double pivot = g(j, j) - lower_.row(j).head(j).squaredNorm();
      if (!(pivot > tol)) {
        throw SingularityError("cholesky: pivot " + std::to_string(j) + " = " +
                               std::to_string(pivot) + " below tolerance");
      }
      const double ljj = std::sqrt(pivot);
      lower_(j, j) = ljj;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        lower_(i, j) = (g(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / ljj;
      }
    }
  }

  [[nodiscard]] const Matrix& lower() const { return lower_; }
  [[nodiscard]] Eigen::Index size() const { return lower_.rows(); }

  [[nodiscard]] Vector solve(const Vector& b) const {
    if (b.size() != lower_.rows()) throw ArgumentError("cholesky solve: dimension mismatch");
    Vector z = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
  }

  [[nodiscard]] Matrix solve(const Matrix& b) const {
    if (b.rows() != lower_.rows()) throw ArgumentError("cholesky solve: dimension mismatch");
    Matrix z = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
  }

  /// L^{-1} b, i.e. the whitening half of a solve.
  [[nodiscard]] Matrix forward(const Matrix& b) const {
    if (b.rows() != lower_.rows()) throw ArgumentError("cholesky forward: dimension mismatch");
    return lower_.triangularView<Eigen::Lower>().solve(b);
  }

  /// b^T G^{-1} b computed as ||L^{-1} b||^2 (never negative).
  [[nodiscard]] double inverse_quadratic_form(const Vector& b) const {
    return forward(b).squaredNorm();
  }

 private:
  Matrix lower_;
};

inline Vector sym_solve(const Matrix& g, const Vector& b) {
  if (b.size() != g.rows()) throw ArgumentError("sym_solve: dimension mismatch");
  require_finite(b, "sym_solve");
  return Cholesky(g).solve(b);
}

/// (A^T A)^{-1} A^T for a full-column-rank A.
inline Matrix pseudo_inverse(const Matrix& a) {
  const Cholesky chol(gram(a));
  return chol.solve(Matrix(a.transpose()));
}

/// Orthogonal projector onto range(A), symmetrized on output.
inline Matrix projector(const Matrix& a) {
  Matrix p = a * pseudo_inverse(a);
  return (0.5 * (p + p.transpose())).eval();
}

namespace detail {

// Depth-first search over increasing column subsets, reusing the orthonormal
// basis of the prefix. Returns false as soon as any column falls within `tol`
// of the span of the columns chosen before it.
inline bool all_subsets_independent(const Matrix& h, int remaining, Eigen::Index next,
                                    Matrix& basis, Eigen::Index depth, double tol) {
  if (remaining == 0) return true;
  const Eigen::Index n = h.cols();
  for (Eigen::Index c = next; c + remaining <= n; ++c) {
    Vector v = h.col(c);
    // Two Gram-Schmidt sweeps keep the residual accurate to working precision.
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (Eigen::Index q = 0; q < depth; ++q) v -= basis.col(q).dot(v) * basis.col(q);
    }
    const double norm = v.norm();
    if (!(norm > tol)) return false;
    basis.col(depth) = v / norm;
    if (!all_subsets_independent(h, remaining - 1, c + 1, basis, depth + 1, tol)) return false;
  }
  return true;
}

}  // namespace detail

/// True iff every set of `s` columns of `h` is linearly independent, i.e.
/// spark(h) > s. A column counts as dependent when its residual against the
/// span of the others is at most 1e-10 times the largest column norm.
inline bool spark_exceeds(const Matrix& h, int s) {
  if (s < 1 || s >= h.cols()) {
    throw ArgumentError("spark_exceeds: need 1 <= S < N");
  }
  require_finite(h, "spark_exceeds");
  if (s > h.rows()) return false;
  const double max_norm = h.colwise().norm().maxCoeff();
  if (!(max_norm > 0.0)) return false;
  const double tol = 1e-10 * max_norm;
  Matrix basis(h.rows(), s);
  return detail::all_subsets_independent(h, s, 0, basis, 0, tol);
}

}  // namespace linalg
}  // namespace slmbound
