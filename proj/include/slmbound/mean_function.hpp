#pragma once

// Prescribed mean functions gamma_k(x) = E_x{x_hat_k(y)}: the unbiased and
// affine cases, the means induced by hard thresholding and by best-S
// selection, and Monte Carlo means for estimators without a closed form.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "slmbound/errors.hpp"
#include "slmbound/estimators.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/model.hpp"
#include "slmbound/montecarlo.hpp"
#include "slmbound/normal.hpp"
#include "slmbound/quadrature.hpp"

namespace slmbound {

/// E[y 1{|y| >= T}] for y ~ N(mu, sigma^2).
inline double ht_mean(double mu, double threshold, double sigma) {
  const double a = (threshold - mu) / sigma;
  const double b = (-threshold - mu) / sigma;
  return mu * (normal::sf(a) + normal::cdf(b)) + sigma * (normal::pdf(a) - normal::pdf(b));
}

/// Mean of component k of the best-1 selection P_1(x + n), n ~ N(0, sigma^2 I):
///   int y phi_sigma(y - x_k) prod_{l != k} P(|x_l + n_l| < |y|) dy.
inline double ml_mean(const Vector& x, int k, int sparsity, double sigma,
                      const QuadratureConfig& cfg = {}) {
  if (sparsity != 1) {
    throw UnsupportedConfiguration(
        "ml_mean: quadrature is only available for S = 1; use a Monte Carlo mean "
        "(MonteCarloMean) for larger S");
  }
  if (k < 0 || k >= x.size()) throw ArgumentError("ml_mean: component out of range");
  cfg.validate();
  const double xk = x[k];
  const auto integrand = [&](double y) {
    const double r = std::abs(y);
    double prob = 1.0;
    for (Eigen::Index l = 0; l < x.size(); ++l) {
      if (l == k) continue;
      prob *= normal::interval((-r - x[l]) / sigma, (r - x[l]) / sigma);
    }
    return y * normal::pdf((y - xk) / sigma) / sigma * prob;
  };
  const double lo = xk - cfg.half_width_sigmas * sigma;
  const double hi = xk + cfg.half_width_sigmas * sigma;
  // |y| has a kink at 0, so the rule is split there.
  if (lo < 0.0 && hi > 0.0) {
    return simpson(integrand, lo, 0.0, cfg.nodes) + simpson(integrand, 0.0, hi, cfg.nodes);
  }
  return simpson(integrand, lo, hi, cfg.nodes);
}

/// Memoizing Monte Carlo source of estimator means and mean Jacobians. Every
/// query reuses the same seed, so values at nearby points share their noise.
class MonteCarloMean {
 public:
  struct Options {
    std::int64_t n_trials = 100'000;
    std::uint64_t seed = 0;
    double fd_step = 0.1;  // central-difference step in parameter units
    int threads = 1;
  };

  MonteCarloMean(ObservationModel observation, Estimator estimator, Options options)
      : observation_(std::move(observation)), estimator_(std::move(estimator)), options_(options) {
    if (!(options_.fd_step > 0.0)) throw ArgumentError("MonteCarloMean: fd_step must be positive");
    if (options_.n_trials < 100) throw ArgumentError("MonteCarloMean: need at least 100 trials");
  }

  [[nodiscard]] MeanEstimate at(const Vector& x) const {
    const Key key{std::vector<double>(x.data(), x.data() + x.size()), {}};
    {
      const std::lock_guard lock(mutex_);
      if (auto it = means_.find(key); it != means_.end()) return it->second;
    }
    MeanEstimate est = estimate_mean_function(observation_, estimator_, {x}, options_.n_trials,
                                              options_.seed, options_.threads)
                           .front();
    const std::lock_guard lock(mutex_);
    return means_.emplace(key, std::move(est)).first->second;
  }

  [[nodiscard]] JacobianEstimate jacobian(const Vector& x, const SupportSet& directions) const {
    const auto idx = directions.indices();
    const Key key{std::vector<double>(x.data(), x.data() + x.size()),
                  std::vector<int>(idx.begin(), idx.end())};
    {
      const std::lock_guard lock(mutex_);
      if (auto it = jacobians_.find(key); it != jacobians_.end()) return it->second;
    }
    JacobianEstimate est =
        estimate_mean_jacobian(observation_, estimator_, x, directions, options_.fd_step,
                               options_.n_trials, options_.seed, options_.threads);
    const std::lock_guard lock(mutex_);
    return jacobians_.emplace(key, std::move(est)).first->second;
  }

  [[nodiscard]] const Options& options() const { return options_; }
  [[nodiscard]] const Estimator& estimator() const { return estimator_; }

 private:
  using Key = std::pair<std::vector<double>, std::vector<int>>;

  ObservationModel observation_;
  Estimator estimator_;
  Options options_;
  mutable std::mutex mutex_;
  mutable std::map<Key, MeanEstimate> means_;
  mutable std::map<Key, JacobianEstimate> jacobians_;
};

struct MeanValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// One component gamma_k of a prescribed mean function.
class MeanFunction {
 public:
  struct Unbiased {};
  struct Affine {
    Vector coefficients;
    double offset = 0.0;
  };
  struct HardThresholdInduced {
    double threshold;
    double sigma;
  };
  struct MlInduced {
    int sparsity;
    double sigma;
    QuadratureConfig quadrature;
  };
  struct MonteCarloInduced {
    std::shared_ptr<const MonteCarloMean> source;
  };
  using Kind = std::variant<Unbiased, Affine, HardThresholdInduced, MlInduced, MonteCarloInduced>;

  static MeanFunction unbiased(int k) { return {k, Unbiased{}}; }

  static MeanFunction affine(int k, Vector coefficients, double offset) {
    linalg::require_finite(coefficients, "affine mean");
    return {k, Affine{std::move(coefficients), offset}};
  }

  static MeanFunction hard_threshold(int k, double threshold, double sigma) {
    if (!(threshold >= 0.0) || !(sigma > 0.0)) throw ArgumentError("ht mean: bad parameters");
    return {k, HardThresholdInduced{threshold, sigma}};
  }

  static MeanFunction ml_induced(int k, int sparsity, double sigma, QuadratureConfig cfg = {}) {
    if (sparsity != 1) {
      throw UnsupportedConfiguration(
          "ml mean: quadrature requires S = 1; use MeanFunction::monte_carlo for S > 1");
    }
    if (!(sigma > 0.0)) throw ArgumentError("ml mean: sigma must be positive");
    cfg.validate();
    return {k, MlInduced{sparsity, sigma, cfg}};
  }

  static MeanFunction monte_carlo(int k, std::shared_ptr<const MonteCarloMean> source) {
    if (!source) throw ArgumentError("monte carlo mean: null source");
    return {k, MonteCarloInduced{std::move(source)}};
  }

  [[nodiscard]] int component() const { return component_; }
  [[nodiscard]] const Kind& kind() const { return kind_; }
  [[nodiscard]] bool is_affine() const {
    return std::holds_alternative<Unbiased>(kind_) || std::holds_alternative<Affine>(kind_);
  }

  [[nodiscard]] MeanValue evaluate_with_error(const Vector& x) const {
    if (component_ >= x.size()) throw ArgumentError("mean function: component out of range");
    return std::visit(
        [&](const auto& k) -> MeanValue {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Unbiased>) {
            return {x[component_], 0.0};
          } else if constexpr (std::is_same_v<K, Affine>) {
            if (k.coefficients.size() != x.size()) throw ArgumentError("affine mean: bad length");
            return {k.coefficients.dot(x) + k.offset, 0.0};
          } else if constexpr (std::is_same_v<K, HardThresholdInduced>) {
            return {ht_mean(x[component_], k.threshold, k.sigma), 0.0};
          } else if constexpr (std::is_same_v<K, MlInduced>) {
            return {ml_mean(x, component_, k.sparsity, k.sigma, k.quadrature), 0.0};
          } else {
            const MeanEstimate est = k.source->at(x);
            return {est.mean[component_], est.std_error[component_]};
          }
        },
        kind_);
  }

  [[nodiscard]] double operator()(const Vector& x) const { return evaluate_with_error(x).value; }

 private:
  MeanFunction(int k, Kind kind) : component_(k), kind_(std::move(kind)) {
    if (k < 0) throw ArgumentError("mean function: negative component index");
  }

  int component_;
  Kind kind_;
};

inline double evaluate(const MeanFunction& gamma, const Vector& x) { return gamma(x); }

/// gamma~(s) = beta * gamma(x(s)).
inline double tilde_gamma(const MeanFunction& gamma, const SupportSet& k, const IsometryData& iso,
                          const Vector& s, int n_dim) {
  return iso.beta * gamma(embed(s, k, n_dim));
}

/// r(s0) = d gamma(x(s)) / d s at s = s0.
struct Gradient {
  Vector value;
  Vector std_error;               // nonzero only for Monte Carlo means
  bool accuracy_warning = false;  // Richardson consistency check failed
};

inline Gradient gradient_r(const MeanFunction& gamma, const SupportSet& k, const Vector& s0,
                           int n_dim, const QuadratureConfig& cfg = {}) {
  if (s0.size() != k.size()) throw ArgumentError("gradient_r: |s0| != |K|");
  Gradient out{Vector::Zero(k.size()), Vector::Zero(k.size()), false};
  const int comp = gamma.component();

  if (std::holds_alternative<MeanFunction::Unbiased>(gamma.kind())) {
    if (auto p = k.position(comp)) out.value[*p] = 1.0;
    return out;
  }
  if (const auto* aff = std::get_if<MeanFunction::Affine>(&gamma.kind())) {
    out.value = restrict_to(aff->coefficients, k);
    return out;
  }
  if (const auto* mc = std::get_if<MeanFunction::MonteCarloInduced>(&gamma.kind())) {
    const JacobianEstimate jac = mc->source->jacobian(embed(s0, k, n_dim), k);
    out.value = jac.jacobian.row(comp).transpose();
    out.std_error = jac.jacobian_se.row(comp).transpose();
    return out;
  }

  // Means that depend on x_comp alone are constant along directions outside it.
  const bool separable = std::holds_alternative<MeanFunction::HardThresholdInduced>(gamma.kind());
  const auto along = [&](int l, double h) {
    Vector sp = s0;
    Vector sm = s0;
    sp[l] += h;
    sm[l] -= h;
    return (gamma(embed(sp, k, n_dim)) - gamma(embed(sm, k, n_dim))) / (2.0 * h);
  };
  for (int l = 0; l < k.size(); ++l) {
    if (separable && k[l] != comp) continue;
    const double h = cfg.fd_relative_step * std::max(1.0, std::abs(s0[l]));
    const double coarse = along(l, h);
    const double fine = along(l, 0.5 * h);
    if (std::abs(coarse - fine) > 1e-5 * std::max(std::abs(fine), 1e-3)) {
      out.accuracy_warning = true;
    }
    out.value[l] = (4.0 * fine - coarse) / 3.0;
  }
  return out;
}

}  // namespace slmbound
