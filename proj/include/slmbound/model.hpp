#pragma once

// Problem instances for the sparse linear model y = H x + n, n ~ N(0, sigma2 I),
// with x restricted to vectors of at most S nonzeros, plus the kernel and
// subspace machinery the bounds are built from.
//
// Indices are 0-based in this API. The command-line front end converts to and
// from the 1-based convention used in configuration files and reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slmbound/errors.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/philox.hpp"

namespace slmbound {

/// Strictly increasing list of distinct column indices.
class SupportSet {
 public:
  SupportSet() = default;

  SupportSet(std::vector<int> indices, Eigen::Index n_dim) : indices_(std::move(indices)) {
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] < 0 || indices_[i] >= n_dim) {
        throw ArgumentError("support index " + std::to_string(indices_[i]) + " out of range");
      }
      if (i > 0 && indices_[i] <= indices_[i - 1]) {
        throw ArgumentError("support indices must be strictly increasing");
      }
    }
  }

  [[nodiscard]] std::span<const int> indices() const { return indices_; }
  [[nodiscard]] int size() const { return static_cast<int>(indices_.size()); }
  [[nodiscard]] int operator[](int i) const { return indices_[static_cast<std::size_t>(i)]; }

  [[nodiscard]] std::optional<int> position(int k) const {
    const auto it = std::lower_bound(indices_.begin(), indices_.end(), k);
    if (it == indices_.end() || *it != k) return std::nullopt;
    return static_cast<int>(it - indices_.begin());
  }
  [[nodiscard]] bool contains(int k) const { return position(k).has_value(); }

  /// "{1,3}" style rendering with 1-based indices.
  [[nodiscard]] std::string to_string() const {
    std::string out = "{";
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (i > 0) out += ",";
      out += std::to_string(indices_[i] + 1);
    }
    return out + "}";
  }

  auto operator<=>(const SupportSet&) const = default;

 private:
  std::vector<int> indices_;
};

/// y = H x + n with ||x||_0 <= S. The constructor enforces spark(H) > S.
class SparseLinearModel {
 public:
  SparseLinearModel(Matrix h, double sigma2, int sparsity)
      : h_(std::move(h)), sigma2_(sigma2), sparsity_(sparsity) {
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
      throw ArgumentError("model: sigma2 must be positive and finite");
    }
    if (sparsity_ < 1 || sparsity_ >= h_.cols()) {
      throw ArgumentError("model: need 1 <= S < N");
    }
    linalg::require_finite(h_, "model");
    identity_ = h_.rows() == h_.cols() && h_.isIdentity(0.0);
    if (!identity_ && !linalg::spark_exceeds(h_, sparsity_)) {
      throw ArgumentError("model: spark(H) <= S; some S columns of H are linearly dependent");
    }
  }

  /// The sparse-signal-in-noise model (H = I).
  static SparseLinearModel ssnm(int n, double sigma2, int sparsity) {
    return {Matrix::Identity(n, n), sigma2, sparsity};
  }

  [[nodiscard]] const Matrix& h() const { return h_; }
  [[nodiscard]] double sigma2() const { return sigma2_; }
  [[nodiscard]] double sigma() const { return std::sqrt(sigma2_); }
  [[nodiscard]] int sparsity() const { return sparsity_; }
  [[nodiscard]] int n_dim() const { return static_cast<int>(h_.cols()); }
  [[nodiscard]] int obs_dim() const { return static_cast<int>(h_.rows()); }
  [[nodiscard]] bool is_identity() const { return identity_; }

 private:
  Matrix h_;
  double sigma2_;
  int sparsity_;
  bool identity_ = false;
};

inline std::vector<int> support_of(const Vector& x) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) out.push_back(static_cast<int>(i));
  }
  return out;
}

inline int l0_norm(const Vector& x) { return static_cast<int>((x.array() != 0.0).count()); }

inline void require_sparse(const Vector& x, int sparsity, int n_dim, const char* what) {
  if (x.size() != n_dim) throw ArgumentError(std::string(what) + ": wrong dimension");
  linalg::require_finite(x, what);
  if (l0_norm(x) > sparsity) {
    throw ArgumentError(std::string(what) + ": more than S nonzero entries");
  }
}

/// Value and index of the S-th largest magnitude entry of x0.
struct SignalLevel {
  double xi = 0.0;
  int index = 0;
};

/// Magnitude ties go to the smaller index. When x0 has fewer than S nonzeros,
/// xi is 0 and index is the smallest position outside the support.
inline SignalLevel xi_and_j(const Vector& x0, int sparsity) {
  if (sparsity < 1 || sparsity > x0.size()) throw ArgumentError("xi_and_j: bad sparsity");
  std::vector<int> order(static_cast<std::size_t>(x0.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(x0[a]) > std::abs(x0[b]); });
  const int pick = order[static_cast<std::size_t>(sparsity - 1)];
  if (x0[pick] != 0.0) return {x0[pick], pick};
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (x0[i] == 0.0) return {0.0, static_cast<int>(i)};
  }
  return {0.0, 0};
}

inline Matrix submatrix(const Matrix& h, const SupportSet& k) {
  Matrix out(h.rows(), k.size());
  for (int i = 0; i < k.size(); ++i) {
    if (k[i] >= h.cols()) throw ArgumentError("submatrix: index out of range");
    out.col(i) = h.col(k[i]);
  }
  return out;
}

/// x(s): the vector with x^K = s and zeros elsewhere.
inline Vector embed(const Vector& s, const SupportSet& k, int n_dim) {
  if (s.size() != k.size()) throw ArgumentError("embed: |s| != |K|");
  Vector x = Vector::Zero(n_dim);
  for (int i = 0; i < k.size(); ++i) {
    if (k[i] >= n_dim) throw ArgumentError("embed: index out of range");
    x[k[i]] = s[i];
  }
  return x;
}

inline Vector restrict_to(const Vector& x, const SupportSet& k) {
  Vector s(k.size());
  for (int i = 0; i < k.size(); ++i) s[i] = x[k[i]];
  return s;
}

/// Ingredients linking the model restricted to span{e_k : k in K} with a
/// linear Gaussian model in s-coordinates.
struct IsometryData {
  Vector s0;                     // H_K^+ H x0
  double beta = 1.0;             // exp(-residual_energy / (2 sigma2))
  double residual_energy = 0.0;  // ||(I - P_K) H x0||^2
};

inline IsometryData isometry_data(const SparseLinearModel& model, const SupportSet& k,
                                  const Vector& x0) {
  if (k.size() != model.sparsity()) throw ArgumentError("isometry_data: |K| != S");
  require_sparse(x0, model.sparsity(), model.n_dim(), "isometry_data");
  const Matrix hk = submatrix(model.h(), k);
  const Vector hx0 = model.h() * x0;
  IsometryData out;
  out.s0 = linalg::Cholesky(linalg::gram(hk)).solve(Vector(hk.transpose() * hx0));
  out.residual_energy = (hx0 - hk * out.s0).squaredNorm();
  out.beta = std::exp(-out.residual_energy / (2.0 * model.sigma2()));
  return out;
}

/// exp((1/sigma2) (x - x0)^T H^T H (x2 - x0)).
inline double kernel_slm(const Vector& x, const Vector& x2, const Vector& x0,
                         const SparseLinearModel& model) {
  const Vector d1 = model.h() * (x - x0);
  const Vector d2 = model.h() * (x2 - x0);
  return std::exp(d1.dot(d2) / model.sigma2());
}

/// exp((1/sigma2) (s - s0)^T A^T A (s2 - s0)).
inline double kernel_lgm(const Vector& s, const Vector& s2, const Vector& s0, const Matrix& a,
                         double sigma2) {
  const Vector d1 = a * (s - s0);
  const Vector d2 = a * (s2 - s0);
  return std::exp(d1.dot(d2) / sigma2);
}

struct Whitened {
  Vector y;
  Matrix h;
};

/// Applies W = L^{-1} with Sigma = L L^T, so W n has identity covariance.
inline Whitened whiten(const Vector& y, const Matrix& h, const Matrix& sigma) {
  if (sigma.rows() != y.size() || h.rows() != y.size()) {
    throw ArgumentError("whiten: dimension mismatch");
  }
  const linalg::Cholesky chol(sigma);
  return {chol.forward(Matrix(y)).col(0), chol.forward(h)};
}

/// i.i.d. N(0, 1/rows) sensing matrix drawn from the counter-based generator.
inline Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw ArgumentError("gaussian_matrix: empty shape");
  const rng::NormalGenerator gen(seed, rng::Stream::kSensingMatrix);
  Matrix out(rows, cols);
  Vector column(rows);
  for (int c = 0; c < cols; ++c) {
    gen.fill(static_cast<std::uint64_t>(c), column);
    out.col(c) = column / std::sqrt(static_cast<double>(rows));
  }
  return out;
}

}  // namespace slmbound
