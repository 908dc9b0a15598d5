#pragma once

// Reference estimators. Each is a deterministic map y -> x_hat.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "slmbound/combinatorics.hpp"
#include "slmbound/errors.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/model.hpp"

namespace slmbound {

namespace detail {

// Positions of the `count` largest-magnitude entries; ties keep the smaller index.
inline std::vector<int> largest_magnitudes(const Eigen::Ref<const Vector>& y, int count) {
  std::vector<int> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), 0);
  const auto by_magnitude = [&](int a, int b) {
    const double ma = std::abs(y[a]);
    const double mb = std::abs(y[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + count, order.end(), by_magnitude);
  order.resize(static_cast<std::size_t>(count));
  return order;
}

}  // namespace detail

/// Keeps the S largest-magnitude entries of y (the ML estimator for H = I).
inline void ml_ssnm_into(const Eigen::Ref<const Vector>& y, int sparsity, Eigen::Ref<Vector> out) {
  out.setZero();
  if (sparsity == 1) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < y.size(); ++i) {
      if (std::abs(y[i]) > std::abs(y[best])) best = i;
    }
    out[best] = y[best];
    return;
  }
  for (int i : detail::largest_magnitudes(y, sparsity)) out[i] = y[i];
}

inline Vector ml_ssnm(const Vector& y, int sparsity) {
  if (sparsity < 1 || sparsity >= y.size()) throw ArgumentError("ml_ssnm: need 1 <= S < N");
  Vector out(y.size());
  ml_ssnm_into(y, sparsity, out);
  return out;
}

/// Componentwise hard thresholding; entries with |y_k| >= T are kept.
inline Vector ht(const Vector& y, double threshold) {
  if (!(threshold >= 0.0)) throw ArgumentError("ht: threshold must be >= 0");
  return (y.array().abs() >= threshold).select(y, 0.0);
}

/// Exhaustive-support maximum likelihood for a general H. Least-squares fits
/// on every support are compared by residual; ties keep the lexicographically
/// first support.
class MlSlmSolver {
 public:
  static constexpr double kDefaultBudget = 1e6;

  explicit MlSlmSolver(const SparseLinearModel& model, double budget = kDefaultBudget)
      : n_dim_(model.n_dim()) {
    const int n = model.n_dim();
    const int s = model.sparsity();
    if (binomial(n, s) > budget) {
      throw BudgetError("ml_slm: C(" + std::to_string(n) + "," + std::to_string(s) +
                        ") supports exceed the budget");
    }
    for_each_combination(n, s, [&](const std::vector<int>& idx) {
      Candidate c{SupportSet(idx, n), {}, {}};
      c.columns = submatrix(model.h(), c.support);
      c.pinv = linalg::pseudo_inverse(c.columns);
      candidates_.push_back(std::move(c));
    });
  }

  void apply_into(const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> out) const {
    double best_residual = std::numeric_limits<double>::infinity();
    const Candidate* best = nullptr;
    Vector best_s;
    for (const Candidate& c : candidates_) {
      Vector s = c.pinv * y;
      const double residual = (y - c.columns * s).squaredNorm();
      if (residual < best_residual) {
        best_residual = residual;
        best = &c;
        best_s = std::move(s);
      }
    }
    out.setZero();
    for (int i = 0; i < best->support.size(); ++i) out[best->support[i]] = best_s[i];
  }

  [[nodiscard]] int n_dim() const { return n_dim_; }

 private:
  struct Candidate {
    SupportSet support;
    Matrix columns;
    Matrix pinv;
  };
  int n_dim_;
  std::vector<Candidate> candidates_;
};

inline Vector ml_slm(const Vector& y, const SparseLinearModel& model) {
  if (y.size() != model.obs_dim()) throw ArgumentError("ml_slm: wrong observation length");
  Vector out(model.n_dim());
  MlSlmSolver(model).apply_into(y, out);
  return out;
}

/// The locally minimum variance unbiased estimator at x0 for S = 1 and H = I:
/// y_j at j = j(x0), alpha(y; x0) y_k elsewhere.
inline Vector lmvu_s1(const Vector& y, const Vector& x0, double sigma2) {
  if (l0_norm(x0) != 1) {
    throw UnsupportedConfiguration("lmvu_s1: x0 must have exactly one nonzero entry");
  }
  if (y.size() != x0.size()) throw ArgumentError("lmvu_s1: dimension mismatch");
  const SignalLevel level = xi_and_j(x0, 1);
  const double yj = y[level.index];
  const double alpha = std::exp(-(2.0 * yj * level.xi + level.xi * level.xi) / (2.0 * sigma2));
  Vector out = alpha * y;
  out[level.index] = yj;
  return out;
}

/// A^+ z for the linear Gaussian model z = A s + n.
inline Vector ls_lgm(const Vector& z, const Matrix& a) {
  if (z.size() != a.rows()) throw ArgumentError("ls_lgm: dimension mismatch");
  return linalg::pseudo_inverse(a) * z;
}

/// A value-semantic handle over one of the reference estimators.
class Estimator {
 public:
  struct Identity {};
  struct MlSsnm {
    int sparsity;
  };
  struct MlSlm {
    std::shared_ptr<const MlSlmSolver> solver;
  };
  struct HardThreshold {
    double threshold;
  };
  struct LmvuS1 {
    int index;
    double xi;
    double sigma2;
  };
  struct LeastSquares {
    Matrix pinv;
  };
  using Kind = std::variant<Identity, MlSsnm, MlSlm, HardThreshold, LmvuS1, LeastSquares>;

  static Estimator identity() { return Estimator(Identity{}, "identity"); }

  static Estimator ml_ssnm(int sparsity) {
    if (sparsity < 1) throw ArgumentError("ml_ssnm: sparsity must be >= 1");
    return Estimator(MlSsnm{sparsity}, "ml");
  }

  static Estimator ml_slm(const SparseLinearModel& model, double budget = MlSlmSolver::kDefaultBudget) {
    return Estimator(MlSlm{std::make_shared<const MlSlmSolver>(model, budget)}, "ml");
  }

  static Estimator hard_threshold(double threshold) {
    if (!(threshold >= 0.0)) throw ArgumentError("ht: threshold must be >= 0");
    return Estimator(HardThreshold{threshold}, "ht");
  }

  static Estimator lmvu_s1(const Vector& x0, double sigma2) {
    if (l0_norm(x0) != 1) {
      throw UnsupportedConfiguration("lmvu_s1: x0 must have exactly one nonzero entry");
    }
    const SignalLevel level = xi_and_j(x0, 1);
    return Estimator(LmvuS1{level.index, level.xi, sigma2}, "lmvu");
  }

  static Estimator least_squares(const Matrix& a) {
    return Estimator(LeastSquares{linalg::pseudo_inverse(a)}, "ls");
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const Kind& kind() const { return kind_; }

  /// Length of x_hat for an observation of length obs_dim.
  [[nodiscard]] Eigen::Index output_dim(Eigen::Index obs_dim) const {
    if (const auto* ls = std::get_if<LeastSquares>(&kind_)) return ls->pinv.rows();
    if (const auto* ml = std::get_if<MlSlm>(&kind_)) return ml->solver->n_dim();
    return obs_dim;
  }

  void apply_into(const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> out) const {
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Identity>) {
            out = y;
          } else if constexpr (std::is_same_v<K, MlSsnm>) {
            ml_ssnm_into(y, k.sparsity, out);
          } else if constexpr (std::is_same_v<K, MlSlm>) {
            k.solver->apply_into(y, out);
          } else if constexpr (std::is_same_v<K, HardThreshold>) {
            out = (y.array().abs() >= k.threshold).select(y, 0.0);
          } else if constexpr (std::is_same_v<K, LmvuS1>) {
            const double yj = y[k.index];
            const double alpha = std::exp(-(2.0 * yj * k.xi + k.xi * k.xi) / (2.0 * k.sigma2));
            out = alpha * y;
            out[k.index] = yj;
          } else {
            out.noalias() = k.pinv * y;
          }
        },
        kind_);
  }

  [[nodiscard]] Vector operator()(const Vector& y) const {
    Vector out(output_dim(y.size()));
    apply_into(y, out);
    return out;
  }

 private:
  Estimator(Kind kind, std::string name) : kind_(std::move(kind)), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
};

}  // namespace slmbound
