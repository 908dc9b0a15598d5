#pragma once

// Seeded Monte Carlo estimation of estimator moments.
//
// Trial t always uses the noise vector NormalGenerator(seed).fill(t), and
// trials are grouped into fixed-size chunks whose partial moments are merged
// in chunk order. Results are therefore bit-identical for a given spec no
// matter how many threads run the chunks.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "slmbound/errors.hpp"
#include "slmbound/estimators.hpp"
#include "slmbound/linalg.hpp"
#include "slmbound/model.hpp"
#include "slmbound/philox.hpp"

namespace slmbound {

/// y = H x + n with n ~ N(0, sigma2 I); no sparsity constraint on x.
struct ObservationModel {
  Matrix h;
  double sigma2 = 1.0;

  static ObservationModel of(const SparseLinearModel& model) {
    return {model.h(), model.sigma2()};
  }
};

namespace detail {

/// Streaming mean and sum of squared deviations of a vector-valued sample,
/// with the standard pairwise merge.
struct Moments {
  std::int64_t count = 0;
  Vector mean;
  Vector m2;

  explicit Moments(Eigen::Index dim = 0) : mean(Vector::Zero(dim)), m2(Vector::Zero(dim)) {}

  void push(const Eigen::Ref<const Vector>& v) {
    ++count;
    delta_ = v - mean;
    mean += delta_ / static_cast<double>(count);
    m2.array() += delta_.array() * (v - mean).array();
  }

  void merge(const Moments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const Vector delta = other.mean - mean;
    mean += delta * (nb / n);
    m2.array() += other.m2.array() + delta.array().square() * (na * nb / n);
    count += other.count;
  }

  /// Unbiased sample variance per coordinate.
  [[nodiscard]] Vector variance() const {
    return count > 1 ? Vector(m2 / static_cast<double>(count - 1)) : Vector::Zero(m2.size());
  }

  /// Standard error of the mean per coordinate.
  [[nodiscard]] Vector std_error() const {
    return (variance() / static_cast<double>(std::max<std::int64_t>(count, 1))).cwiseSqrt();
  }

 private:
  Vector delta_;
};

/// Runs body(chunk_begin, chunk_end) for every chunk and returns the partial
/// results in chunk order.
template <typename Partial, typename Body>
std::vector<Partial> map_chunks(std::int64_t n_trials, std::int64_t chunk_size, int threads,
                                Body&& body) {
  const std::int64_t n_chunks = (n_trials + chunk_size - 1) / chunk_size;
  std::vector<Partial> partials(static_cast<std::size_t>(n_chunks));
  std::atomic<std::int64_t> next{0};
  const auto worker = [&] {
    for (std::int64_t c = next++; c < n_chunks; c = next++) {
      const std::int64_t begin = c * chunk_size;
      const std::int64_t end = std::min(n_trials, begin + chunk_size);
      partials[static_cast<std::size_t>(c)] = body(begin, end);
    }
  };
  const int workers = static_cast<int>(std::clamp<std::int64_t>(threads, 1, n_chunks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  return partials;
}

inline Moments fold(const std::vector<Moments>& partials) {
  Moments total(partials.empty() ? 0 : partials.front().mean.size());
  for (const Moments& p : partials) total.merge(p);
  return total;
}

}  // namespace detail

struct SimulationSpec {
  ObservationModel observation;
  Vector x0;
  Estimator estimator;
  std::int64_t n_trials = 1'000'000;
  std::uint64_t seed = 0;
  std::int64_t chunk_size = 4096;
};

/// Empirical moments of an estimator at a fixed parameter. All std_* members
/// are standard errors of the corresponding estimate.
struct EstimatorStats {
  std::int64_t n_trials = 0;
  Vector mean;
  Vector bias;
  Vector component_variances;
  double total_variance = 0.0;
  double mse = 0.0;
  Vector se_mean;
  Vector se_component_variances;
  double se_total_variance = 0.0;
  double se_mse = 0.0;

  [[nodiscard]] double bias_norm() const { return bias.norm(); }
};

inline void validate(const SimulationSpec& spec) {
  const auto& obs = spec.observation;
  if (!(obs.sigma2 > 0.0)) throw ArgumentError("simulate: sigma2 must be positive");
  if (spec.x0.size() != obs.h.cols()) throw ArgumentError("simulate: x0 has the wrong length");
  if (spec.n_trials < 100) throw ArgumentError("simulate: at least 100 trials required");
  if (spec.chunk_size < 1) throw ArgumentError("simulate: chunk size must be positive");
  linalg::require_finite(obs.h, "simulate");
  linalg::require_finite(spec.x0, "simulate");
}

/// Two passes over the same counter-based noise: the first fixes the sample
/// mean, the second accumulates squared deviations around it.
inline EstimatorStats simulate(const SimulationSpec& spec, int threads = 1) {
  validate(spec);
  const Matrix& h = spec.observation.h;
  const double sigma = std::sqrt(spec.observation.sigma2);
  const Vector signal = h * spec.x0;
  const Eigen::Index m = h.rows();
  const Eigen::Index n = spec.estimator.output_dim(m);
  if (spec.estimator.output_dim(m) != spec.x0.size()) {
    throw ArgumentError("simulate: estimator output does not match the parameter length");
  }
  const rng::NormalGenerator gen(spec.seed, rng::Stream::kObservationNoise);

  auto first = detail::map_chunks<detail::Moments>(
      spec.n_trials, spec.chunk_size, threads, [&](std::int64_t begin, std::int64_t end) {
        detail::Moments acc(n);
        Vector noise(m), y(m), est(n);
        for (std::int64_t t = begin; t < end; ++t) {
          gen.fill(static_cast<std::uint64_t>(t), noise);
          y = signal + sigma * noise;
          spec.estimator.apply_into(y, est);
          acc.push(est);
        }
        return acc;
      });
  const detail::Moments location = detail::fold(first);
  const Vector mean = location.mean;

  // Layout: [(x_hat - mean)_k^2 for k < n, ||x_hat - mean||^2, ||x_hat - x0||^2]
  auto second = detail::map_chunks<detail::Moments>(
      spec.n_trials, spec.chunk_size, threads, [&](std::int64_t begin, std::int64_t end) {
        detail::Moments acc(n + 2);
        Vector noise(m), y(m), est(n), row(n + 2);
        for (std::int64_t t = begin; t < end; ++t) {
          gen.fill(static_cast<std::uint64_t>(t), noise);
          y = signal + sigma * noise;
          spec.estimator.apply_into(y, est);
          row.head(n) = (est - mean).array().square();
          row[n] = row.head(n).sum();
          row[n + 1] = (est - spec.x0).squaredNorm();
          acc.push(row);
        }
        return acc;
      });
  const detail::Moments spread = detail::fold(second);

  const double count = static_cast<double>(spec.n_trials);
  const double unbias = count / (count - 1.0);
  const Vector spread_se = spread.std_error();

  EstimatorStats out;
  out.n_trials = spec.n_trials;
  out.mean = mean;
  out.bias = mean - spec.x0;
  out.component_variances = spread.mean.head(n) * unbias;
  out.total_variance = out.component_variances.sum();
  out.mse = spread.mean[n + 1];
  out.se_mean = (out.component_variances / count).cwiseSqrt();
  out.se_component_variances = spread_se.head(n) * unbias;
  out.se_total_variance = spread_se[n] * unbias;
  out.se_mse = spread_se[n + 1];
  return out;
}

struct MeanEstimate {
  Vector mean;
  Vector std_error;
};

/// Estimator means at several parameters using common random numbers: trial t
/// reuses one noise draw at every point.
inline std::vector<MeanEstimate> estimate_mean_function(const ObservationModel& obs,
                                                        const Estimator& estimator,
                                                        const std::vector<Vector>& points,
                                                        std::int64_t n_trials, std::uint64_t seed,
                                                        int threads = 1,
                                                        std::int64_t chunk_size = 4096) {
  if (n_trials < 2) throw ArgumentError("estimate_mean_function: need at least 2 trials");
  const Eigen::Index m = obs.h.rows();
  const Eigen::Index n = estimator.output_dim(m);
  const double sigma = std::sqrt(obs.sigma2);
  std::vector<Vector> signals;
  signals.reserve(points.size());
  for (const Vector& p : points) {
    if (p.size() != obs.h.cols()) throw ArgumentError("estimate_mean_function: bad point length");
    signals.emplace_back(obs.h * p);
  }
  const rng::NormalGenerator gen(seed, rng::Stream::kObservationNoise);
  const auto dim = static_cast<Eigen::Index>(points.size()) * n;

  auto partials = detail::map_chunks<detail::Moments>(
      n_trials, chunk_size, threads, [&](std::int64_t begin, std::int64_t end) {
        detail::Moments acc(dim);
        Vector noise(m), y(m), row(dim);
        for (std::int64_t t = begin; t < end; ++t) {
          gen.fill(static_cast<std::uint64_t>(t), noise);
          for (std::size_t p = 0; p < signals.size(); ++p) {
            y = signals[p] + sigma * noise;
            estimator.apply_into(y, row.segment(static_cast<Eigen::Index>(p) * n, n));
          }
          acc.push(row);
        }
        return acc;
      });
  const detail::Moments total = detail::fold(partials);
  const Vector se = total.std_error();
  std::vector<MeanEstimate> out;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto off = static_cast<Eigen::Index>(p) * n;
    out.push_back({total.mean.segment(off, n), se.segment(off, n)});
  }
  return out;
}

/// Mean at x together with central difference quotients along each index of
/// `directions`, all from common random numbers.
struct JacobianEstimate {
  Vector mean;
  Vector mean_se;
  Matrix jacobian;  // jacobian(k, l) ~ d E[x_hat_k] / d x_{directions[l]}
  Matrix jacobian_se;
};

inline JacobianEstimate estimate_mean_jacobian(const ObservationModel& obs,
                                               const Estimator& estimator, const Vector& x,
                                               const SupportSet& directions, double step,
                                               std::int64_t n_trials, std::uint64_t seed,
                                               int threads = 1, std::int64_t chunk_size = 4096) {
  if (!(step > 0.0)) throw ArgumentError("estimate_mean_jacobian: step must be positive");
  if (x.size() != obs.h.cols()) throw ArgumentError("estimate_mean_jacobian: bad point length");
  const Eigen::Index m = obs.h.rows();
  const Eigen::Index n = estimator.output_dim(m);
  const int dirs = directions.size();
  const double sigma = std::sqrt(obs.sigma2);
  const Vector signal = obs.h * x;
  const rng::NormalGenerator gen(seed, rng::Stream::kObservationNoise);
  const Eigen::Index dim = n * (1 + dirs);

  auto partials = detail::map_chunks<detail::Moments>(
      n_trials, chunk_size, threads, [&](std::int64_t begin, std::int64_t end) {
        detail::Moments acc(dim);
        Vector noise(m), y(m), row(dim), plus(n), minus(n);
        for (std::int64_t t = begin; t < end; ++t) {
          gen.fill(static_cast<std::uint64_t>(t), noise);
          y = signal + sigma * noise;
          estimator.apply_into(y, row.head(n));
          for (int l = 0; l < dirs; ++l) {
            const Vector shift = step * obs.h.col(directions[l]);
            estimator.apply_into(y + shift, plus);
            estimator.apply_into(y - shift, minus);
            row.segment(n * (1 + l), n) = (plus - minus) / (2.0 * step);
          }
          acc.push(row);
        }
        return acc;
      });
  const detail::Moments total = detail::fold(partials);
  const Vector se = total.std_error();
  JacobianEstimate out{total.mean.head(n), se.head(n), Matrix(n, dirs), Matrix(n, dirs)};
  for (int l = 0; l < dirs; ++l) {
    out.jacobian.col(l) = total.mean.segment(n * (1 + l), n);
    out.jacobian_se.col(l) = se.segment(n * (1 + l), n);
  }
  return out;
}

}  // namespace slmbound
