#pragma once

// Lower bounds on the variance of estimators with a prescribed mean in the
// sparse linear model.
//
// For a support K of size S, the problem restricted to vectors supported in K
// is isometric to a linear Gaussian model z = H_K s + n at s0 = H_K^+ H x0,
// scaled by beta = exp(-||(I - P_K) H x0||^2 / (2 sigma2)). The Cramer-Rao
// bound of that model then gives
//
//   L^K = beta^2 [ sigma2 r^T (H_K^T H_K)^{-1} r + gamma(x(s0))^2 ] - gamma(x0)^2,
//
// with r the gradient of s -> gamma(x(s)) at s0. Maximizing over K per
// component and summing over components bounds the total variance.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "slmbound/combinatorics.hpp"
#include "slmbound/errors.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/mean_function.hpp"
#include "slmbound/model.hpp"

namespace slmbound {

/// sigma2 r^T (A^T A)^{-1} r.
inline double lgm_crb(const Matrix& a, const Vector& r, double sigma2) {
  if (r.size() != a.cols()) throw ArgumentError("lgm_crb: |r| != columns of A");
  if (!(sigma2 > 0.0)) throw ArgumentError("lgm_crb: sigma2 must be positive");
  const linalg::Cholesky chol(linalg::gram(a));
  return sigma2 * chol.inverse_quadratic_form(r);
}

/// The linear Gaussian CRB with A = H_K for the mean s -> gamma(x(s)) at s0.
inline double restricted_crb(const SparseLinearModel& model, const SupportSet& k,
                             const MeanFunction& gamma, const Vector& s0,
                             const QuadratureConfig& cfg = {}) {
  if (k.size() != model.sparsity()) throw ArgumentError("restricted_crb: |K| != S");
  const Gradient r = gradient_r(gamma, k, s0, model.n_dim(), cfg);
  return lgm_crb(submatrix(model.h(), k), r.value, model.sigma2());
}

struct BoundResult {
  double value = 0.0;
  SupportSet support;
  Vector s0;
  double beta2 = 1.0;
  double crb_term = 0.0;
  double gamma_at_xs0 = 0.0;
  double gamma_at_x0 = 0.0;
  /// The same bound assembled from gamma~ = beta gamma(x(s)) directly.
  double tilde_form_value = 0.0;
  /// First-order error carried over from Monte Carlo means (0 otherwise).
  double propagated_error = 0.0;
  bool accuracy_warning = false;
};

inline BoundResult support_bound(const SparseLinearModel& model, const MeanFunction& gamma,
                                 const SupportSet& k, const Vector& x0,
                                 const QuadratureConfig& cfg = {}) {
  const int n = model.n_dim();
  const IsometryData iso = isometry_data(model, k, x0);
  const Matrix hk = submatrix(model.h(), k);
  const linalg::Cholesky chol(linalg::gram(hk));
  const Gradient r = gradient_r(gamma, k, iso.s0, n, cfg);
  const MeanValue at_s0 = gamma.evaluate_with_error(embed(iso.s0, k, n));
  const MeanValue at_x0 = gamma.evaluate_with_error(x0);

  BoundResult out;
  out.support = k;
  out.s0 = iso.s0;
  out.beta2 = iso.beta * iso.beta;
  out.crb_term = model.sigma2() * chol.inverse_quadratic_form(r.value);
  out.gamma_at_xs0 = at_s0.value;
  out.gamma_at_x0 = at_x0.value;
  out.value = out.beta2 * (out.crb_term + out.gamma_at_xs0 * out.gamma_at_xs0) -
              out.gamma_at_x0 * out.gamma_at_x0;
  out.accuracy_warning = r.accuracy_warning;

  const Vector tilde_r = iso.beta * r.value;
  const double tilde_at_s0 = tilde_gamma(gamma, k, iso, iso.s0, n);
  out.tilde_form_value = model.sigma2() * chol.inverse_quadratic_form(tilde_r) +
                         tilde_at_s0 * tilde_at_s0 - out.gamma_at_x0 * out.gamma_at_x0;
  const double scale = std::max({std::abs(out.value), out.gamma_at_x0 * out.gamma_at_x0,
                                 out.beta2 * (out.crb_term + out.gamma_at_xs0 * out.gamma_at_xs0)});
  if (std::abs(out.tilde_form_value - out.value) > 1e-10 * scale) {
    throw NumericalError("support_bound: the two forms of the bound disagree");
  }

  if (r.std_error.size() > 0 && (r.std_error.array() > 0.0).any()) {
    const Vector weights = chol.solve(r.value);
    const Matrix g_inv = chol.solve(Matrix(Matrix::Identity(k.size(), k.size())));
    double err = 0.0;
    for (int l = 0; l < k.size(); ++l) {
      err += std::abs(2.0 * out.beta2 * model.sigma2() * weights[l]) * r.std_error[l];
      err += out.beta2 * model.sigma2() * g_inv(l, l) * r.std_error[l] * r.std_error[l];
    }
    out.propagated_error = err;
  }
  out.propagated_error += std::abs(2.0 * out.beta2 * at_s0.value) * at_s0.std_error +
                          std::abs(2.0 * at_x0.value) * at_x0.std_error;
  return out;
}

enum class SupportSearch { kExhaustive, kGreedy };

struct BoundOptions {
  QuadratureConfig quadrature;
  SupportSearch search = SupportSearch::kExhaustive;
  double budget = 1e6;  // maximum number of supports enumerated
  int threads = 1;
};

/// K = {k} plus the S-1 largest-magnitude other entries of x0 (ties to the
/// smaller index). Cheap, and optimal for H = I.
inline SupportSet greedy_support(const Vector& x0, int k, int sparsity) {
  std::vector<int> order;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (i != k) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(x0[a]) > std::abs(x0[b]); });
  order.resize(static_cast<std::size_t>(sparsity - 1));
  order.push_back(k);
  std::sort(order.begin(), order.end());
  return {order, x0.size()};
}

/// Max of support_bound over all |K| = S (lexicographically first on ties).
inline BoundResult best_support_bound(const SparseLinearModel& model, const MeanFunction& gamma,
                                      const Vector& x0, const BoundOptions& opts = {}) {
  const int n = model.n_dim();
  const int s = model.sparsity();
  require_sparse(x0, s, n, "best_support_bound");
  if (gamma.component() >= n) throw ArgumentError("best_support_bound: component out of range");

  std::vector<SupportSet> candidates;
  if (opts.search == SupportSearch::kGreedy) {
    candidates.push_back(greedy_support(x0, gamma.component(), s));
  } else {
    if (binomial(n, s) > opts.budget) {
      throw BudgetError("best_support_bound: C(" + std::to_string(n) + "," + std::to_string(s) +
                        ") supports exceed the budget; use the greedy search");
    }
    for_each_combination(n, s, [&](const std::vector<int>& idx) { candidates.emplace_back(idx, n); });
  }

  std::vector<BoundResult> results(candidates.size());
  const auto evaluate_range = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < candidates.size(); i += stride) {
      results[i] = support_bound(model, gamma, candidates[i], x0, opts.quadrature);
    }
  };
  const auto workers = static_cast<std::size_t>(
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(opts.threads, 1)), 1,
                              candidates.size()));
  if (workers == 1) {
    evaluate_range(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(evaluate_range, w, workers);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].value > results[best].value) best = i;
  }
  return results[best];
}

struct VarianceBound {
  double value = 0.0;
  double propagated_error = 0.0;
  std::vector<BoundResult> components;
};

/// Sum over components of the best-support bound; one mean per component.
inline VarianceBound variance_bound(const SparseLinearModel& model,
                                    std::span<const MeanFunction> gammas, const Vector& x0,
                                    const BoundOptions& opts = {}) {
  if (static_cast<int>(gammas.size()) != model.n_dim()) {
    throw ArgumentError("variance_bound: need one mean function per component");
  }
  VarianceBound out;
  for (const MeanFunction& gamma : gammas) {
    BoundResult r = best_support_bound(model, gamma, x0, opts);
    out.value += r.value;
    out.propagated_error += r.propagated_error;
    out.components.push_back(std::move(r));
  }
  return out;
}

/// Unbiased means for every component.
inline std::vector<MeanFunction> unbiased_means(int n_dim) {
  std::vector<MeanFunction> out;
  for (int k = 0; k < n_dim; ++k) out.push_back(MeanFunction::unbiased(k));
  return out;
}

/// Closed form for unbiased estimation with H = I:
/// [S + (N - S) exp(-xi^2 / sigma2)] sigma2.
inline double ssnm_unbiased_bound(int n, int s, double xi, double sigma2) {
  if (s < 1 || s >= n) throw ArgumentError("ssnm_unbiased_bound: need 1 <= S < N");
  if (!(sigma2 > 0.0)) throw ArgumentError("ssnm_unbiased_bound: sigma2 must be positive");
  return (s + (n - s) * std::exp(-xi * xi / sigma2)) * sigma2;
}

struct SingleSparseBound {
  double value = 0.0;
  BoundResult on_support;   // K = {j(x0)} for gamma_j
  BoundResult off_support;  // K = {i} for the representative gamma_i
  /// Largest |L_i - L_rep| over all off-support i.
  double off_support_spread = 0.0;
};

/// The S = 1, H = I bound L_j + (N - 1) L_i with K_j = {j(x0)} and K_i = {i}.
/// The exp(-xi^2/sigma2) weight of the off-support terms is the beta^2 already
/// contained in L_i. The representative i is the smallest index != j.
inline SingleSparseBound ssnm_single_sparse_bound(const SparseLinearModel& model,
                                                  std::span<const MeanFunction> gammas,
                                                  const Vector& x0,
                                                  const QuadratureConfig& cfg = {}) {
  if (model.sparsity() != 1 || !model.is_identity()) {
    throw UnsupportedConfiguration("ssnm_single_sparse_bound: requires H = I and S = 1");
  }
  const int n = model.n_dim();
  if (static_cast<int>(gammas.size()) != n) {
    throw ArgumentError("ssnm_single_sparse_bound: need one mean function per component");
  }
  require_sparse(x0, 1, n, "ssnm_single_sparse_bound");
  const int j = xi_and_j(x0, 1).index;
  const auto gamma_for = [&](int k) -> const MeanFunction& {
    const MeanFunction& g = gammas[static_cast<std::size_t>(k)];
    if (g.component() != k) throw ArgumentError("ssnm_single_sparse_bound: means out of order");
    return g;
  };

  SingleSparseBound out;
  out.on_support = support_bound(model, gamma_for(j), SupportSet({j}, n), x0, cfg);
  const int rep = j == 0 ? 1 : 0;
  out.off_support = support_bound(model, gamma_for(rep), SupportSet({rep}, n), x0, cfg);
  for (int i = 0; i < n; ++i) {
    if (i == j || i == rep) continue;
    const double li = support_bound(model, gamma_for(i), SupportSet({i}, n), x0, cfg).value;
    out.off_support_spread = std::max(out.off_support_spread, std::abs(li - out.off_support.value));
  }
  out.value = out.on_support.value + (n - 1) * out.off_support.value;
  return out;
}

}  // namespace slmbound
