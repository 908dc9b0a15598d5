#pragma once

// Command-line front end. Configuration is a JSON document; indices in it and
// in every report are 1-based.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slmbound/slmbound.hpp"

namespace slmbound::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitBudget = 4;

class ConfigError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// ---------------------------------------------------------------------------
// configuration

struct ModelSpec {
  std::string kind = "identity";  // identity | matrix | gaussian
  int rows = 5;
  int cols = 5;
  std::uint64_t seed = 0;
  Matrix h;  // filled for every kind after parsing
};

struct MeanSpec {
  std::string kind = "unbiased";  // unbiased | ht | ml
  double threshold = 0.0;
};

struct EstimatorSpec {
  std::string kind;  // identity | ml | ht | lmvu | ls
  double threshold = 0.0;

  [[nodiscard]] std::string label() const;
};

struct SimulationOptions {
  std::int64_t trials = 1'000'000;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SweepOptions {
  std::vector<double> snr_db;
  std::vector<double> thresholds{3.0, 4.0, 5.0};
  int j = 1;  // 1-based
  bool unbiased_column = false;
};

struct OracleOptions {
  std::vector<int> per_axis{3, 5, 9, 17, 41};
  double half_width_sigmas = 6.0;
  double jitter = 1e-12;
  int component = 0;  // 1-based; 0 means every component
};

struct Config {
  std::optional<ModelSpec> model;
  double sigma2 = 1.0;
  int sparsity = 1;
  std::vector<Vector> x0;
  MeanSpec mean;
  std::vector<EstimatorSpec> estimators;
  BoundOptions bound;
  SimulationOptions simulation;
  SweepOptions sweep;
  OracleOptions oracle;
  std::string output;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string EstimatorSpec::label() const {
  return kind == "ht" ? "ht_T" + format_short(threshold) : kind;
}

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
T read(const json& obj, const std::string& key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": missing or of the wrong type");
  }
}

template <class T>
void read_opt(const json& obj, const std::string& key, const std::string& where, T& into) {
  if (obj.contains(key)) into = read<T>(obj, key, where);
}

inline ModelSpec parse_model(const json& j) {
  ModelSpec m;
  if (!j.is_object()) throw ConfigError("model: expected an object");
  m.kind = read<std::string>(j, "kind", "model");
  if (m.kind == "identity") {
    check_keys(j, {"kind", "n"}, "model");
    m.rows = m.cols = read<int>(j, "n", "model");
    if (m.cols < 2) throw ConfigError("model.n: must be >= 2");
    m.h = Matrix::Identity(m.rows, m.cols);
  } else if (m.kind == "matrix") {
    check_keys(j, {"kind", "h"}, "model");
    const auto rows = read<std::vector<std::vector<double>>>(j, "h", "model");
    if (rows.empty() || rows.front().empty()) throw ConfigError("model.h: empty matrix");
    m.rows = static_cast<int>(rows.size());
    m.cols = static_cast<int>(rows.front().size());
    m.h.resize(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r) {
      if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != m.cols) {
        throw ConfigError("model.h: ragged rows");
      }
      for (int c = 0; c < m.cols; ++c) m.h(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    if (!m.h.allFinite()) throw ConfigError("model.h: non-finite entry");
  } else if (m.kind == "gaussian") {
    check_keys(j, {"kind", "rows", "cols", "seed"}, "model");
    m.rows = read<int>(j, "rows", "model");
    m.cols = read<int>(j, "cols", "model");
    m.seed = read<std::uint64_t>(j, "seed", "model");
    if (m.rows < 1 || m.cols < 2) throw ConfigError("model: bad gaussian shape");
    m.h = gaussian_matrix(m.rows, m.cols, m.seed);
  } else {
    throw ConfigError("model.kind: expected identity, matrix or gaussian");
  }
  return m;
}

inline Vector parse_x0(const json& j, int n, const std::string& where) {
  check_keys(j, {"indices", "values"}, where);
  const auto idx = read<std::vector<int>>(j, "indices", where);
  const auto val = read<std::vector<double>>(j, "values", where);
  if (idx.size() != val.size()) throw ConfigError(where + ": indices and values differ in length");
  Vector x = Vector::Zero(n);
  std::set<int> seen;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 1 || idx[i] > n) {
      throw ConfigError(where + ": index " + std::to_string(idx[i]) + " outside 1.." + std::to_string(n));
    }
    if (!seen.insert(idx[i]).second) throw ConfigError(where + ": repeated index");
    if (!std::isfinite(val[i])) throw ConfigError(where + ": non-finite value");
    x[idx[i] - 1] = val[i];
  }
  return x;
}

inline MeanSpec parse_mean(const json& j) {
  MeanSpec m;
  if (j.is_string()) {
    m.kind = j.get<std::string>();
  } else {
    check_keys(j, {"kind", "threshold"}, "mean");
    m.kind = read<std::string>(j, "kind", "mean");
    read_opt(j, "threshold", "mean", m.threshold);
  }
  if (m.kind != "unbiased" && m.kind != "ht" && m.kind != "ml") {
    throw ConfigError("mean.kind: expected unbiased, ht or ml");
  }
  if (m.kind == "ht" && !(m.threshold >= 0.0)) throw ConfigError("mean.threshold: must be >= 0");
  return m;
}

inline EstimatorSpec parse_estimator(const json& j, const std::string& where) {
  EstimatorSpec e;
  if (j.is_string()) {
    e.kind = j.get<std::string>();
  } else {
    check_keys(j, {"kind", "threshold"}, where);
    e.kind = read<std::string>(j, "kind", where);
    read_opt(j, "threshold", where, e.threshold);
  }
  static const std::set<std::string> kinds{"identity", "ml", "ht", "lmvu", "ls"};
  if (!kinds.count(e.kind)) throw ConfigError(where + ": unknown estimator '" + e.kind + "'");
  if (e.kind == "ht" && !(e.threshold >= 0.0)) throw ConfigError(where + ": threshold must be >= 0");
  return e;
}

inline std::vector<double> parse_grid(const json& j) {
  if (j.is_array()) return read<std::vector<double>>(json{{"g", j}}, "g", "sweep.snr_db");
  check_keys(j, {"start", "stop", "step"}, "sweep.snr_db");
  const auto start = read<double>(j, "start", "sweep.snr_db");
  const auto stop = read<double>(j, "stop", "sweep.snr_db");
  const auto step = read<double>(j, "step", "sweep.snr_db");
  if (!(step > 0.0) || stop < start) throw ConfigError("sweep.snr_db: bad range");
  std::vector<double> out;
  const auto count = static_cast<int>(std::floor((stop - start) / step + 1e-9));
  for (int i = 0; i <= count; ++i) out.push_back(start + step * i);
  return out;
}

}  // namespace detail

inline std::vector<double> default_snr_grid() {
  std::vector<double> out;
  for (int db = -30; db <= 20; db += 2) out.push_back(db);
  return out;
}

inline Config parse_config(const json& j) {
  using detail::check_keys;
  using detail::read;
  using detail::read_opt;
  check_keys(j, {"model", "sigma2", "sparsity", "x0", "mean", "estimators", "bound", "simulation",
                 "sweep", "oracle", "output"},
             "config");
  Config c;
  if (j.contains("model")) c.model = detail::parse_model(j.at("model"));
  read_opt(j, "sigma2", "config", c.sigma2);
  read_opt(j, "sparsity", "config", c.sparsity);
  if (!(c.sigma2 > 0.0) || !std::isfinite(c.sigma2)) throw ConfigError("sigma2: must be positive");
  const int n = c.model ? c.model->cols : 0;
  if (c.model && (c.sparsity < 1 || c.sparsity >= n)) throw ConfigError("sparsity: need 1 <= S < N");

  if (j.contains("x0")) {
    if (!c.model) throw ConfigError("x0: requires a model");
    const json& x = j.at("x0");
    if (x.is_array()) {
      for (std::size_t i = 0; i < x.size(); ++i) {
        c.x0.push_back(detail::parse_x0(x[i], n, "x0[" + std::to_string(i + 1) + "]"));
      }
    } else {
      c.x0.push_back(detail::parse_x0(x, n, "x0"));
    }
    for (const Vector& v : c.x0) {
      if (l0_norm(v) > c.sparsity) throw ConfigError("x0: more than S nonzero entries");
    }
  }
  if (j.contains("mean")) c.mean = detail::parse_mean(j.at("mean"));
  if (j.contains("estimators")) {
    const json& e = j.at("estimators");
    if (!e.is_array()) throw ConfigError("estimators: expected a list");
    for (std::size_t i = 0; i < e.size(); ++i) {
      c.estimators.push_back(detail::parse_estimator(e[i], "estimators[" + std::to_string(i + 1) + "]"));
    }
  }
  if (j.contains("bound")) {
    const json& b = j.at("bound");
    check_keys(b, {"search", "budget"}, "bound");
    std::string search = "exhaustive";
    read_opt(b, "search", "bound", search);
    if (search == "exhaustive") {
      c.bound.search = SupportSearch::kExhaustive;
    } else if (search == "greedy") {
      c.bound.search = SupportSearch::kGreedy;
    } else {
      throw ConfigError("bound.search: expected exhaustive or greedy");
    }
    read_opt(b, "budget", "bound", c.bound.budget);
    if (!(c.bound.budget >= 1.0)) throw ConfigError("bound.budget: must be >= 1");
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    check_keys(s, {"trials", "seed", "threads"}, "simulation");
    read_opt(s, "trials", "simulation", c.simulation.trials);
    read_opt(s, "seed", "simulation", c.simulation.seed);
    read_opt(s, "threads", "simulation", c.simulation.threads);
  }
  c.sweep.snr_db = default_snr_grid();
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"snr_db", "thresholds", "j", "unbiased_column"}, "sweep");
    if (s.contains("snr_db")) c.sweep.snr_db = detail::parse_grid(s.at("snr_db"));
    read_opt(s, "thresholds", "sweep", c.sweep.thresholds);
    read_opt(s, "j", "sweep", c.sweep.j);
    read_opt(s, "unbiased_column", "sweep", c.sweep.unbiased_column);
    if (c.sweep.snr_db.empty()) throw ConfigError("sweep.snr_db: empty grid");
    for (double t : c.sweep.thresholds) {
      if (!(t >= 0.0)) throw ConfigError("sweep.thresholds: must be >= 0");
    }
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    check_keys(o, {"per_axis", "half_width_sigmas", "jitter", "component"}, "oracle");
    read_opt(o, "per_axis", "oracle", c.oracle.per_axis);
    read_opt(o, "half_width_sigmas", "oracle", c.oracle.half_width_sigmas);
    read_opt(o, "jitter", "oracle", c.oracle.jitter);
    read_opt(o, "component", "oracle", c.oracle.component);
    for (int p : c.oracle.per_axis) {
      if (p < 1) throw ConfigError("oracle.per_axis: entries must be >= 1");
    }
    if (!(c.oracle.half_width_sigmas > 0.0)) throw ConfigError("oracle.half_width_sigmas: must be positive");
    if (!(c.oracle.jitter >= 0.0)) throw ConfigError("oracle.jitter: must be >= 0");
    if (c.oracle.component < 0 || (c.model && c.oracle.component > n)) {
      throw ConfigError("oracle.component: out of range");
    }
  }
  read_opt(j, "output", "config", c.output);
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// commands

struct Overrides {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> trials;
  std::optional<int> threads;
};

namespace detail {

inline Config resolve(const Overrides& o, bool config_required) {
  Config c;
  if (!o.config.empty()) {
    c = load_config(o.config);
  } else if (config_required) {
    throw ConfigError("--config is required");
  } else {
    c.sweep.snr_db = default_snr_grid();
  }
  if (o.seed) c.simulation.seed = *o.seed;
  if (o.trials) c.simulation.trials = *o.trials;
  if (o.threads) c.simulation.threads = *o.threads;
  if (!o.out.empty()) c.output = o.out;
  if (c.simulation.trials < 100) throw ConfigError("trials: at least 100 required");
  if (c.simulation.threads < 1) throw ConfigError("threads: must be >= 1");
  return c;
}

inline SparseLinearModel build_model(const Config& c) {
  if (!c.model) throw ConfigError("config: model is required");
  return {c.model->h, c.sigma2, c.sparsity};
}

inline void require_x0(const Config& c) {
  if (c.x0.empty()) throw ConfigError("config: x0 is required");
}

/// Output path with SLMBOUND_OUTPUT_DIR applied; empty means standard output.
inline std::string output_path(const std::string& requested) {
  if (requested.empty()) return {};
  const char* dir = std::getenv("SLMBOUND_OUTPUT_DIR");
  if (dir == nullptr || *dir == '\0') return requested;
  return (std::filesystem::path(dir) / std::filesystem::path(requested).filename()).string();
}

inline void emit(const std::string& text, const std::string& requested, std::ostream& out) {
  const std::string path = output_path(requested);
  if (path.empty()) {
    out << text;
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw ConfigError("cannot write '" + path + "'");
  file << text;
}

inline std::vector<MeanFunction> means_for(const MeanSpec& spec, const SparseLinearModel& model,
                                           const SimulationOptions& sim) {
  const int n = model.n_dim();
  std::vector<MeanFunction> out;
  if (spec.kind == "unbiased") return unbiased_means(n);
  if (spec.kind == "ht") {
    if (!model.is_identity()) throw ConfigError("mean ht: requires model.kind identity");
    for (int k = 0; k < n; ++k) out.push_back(MeanFunction::hard_threshold(k, spec.threshold, model.sigma()));
    return out;
  }
  if (model.is_identity() && model.sparsity() == 1) {
    for (int k = 0; k < n; ++k) out.push_back(MeanFunction::ml_induced(k, 1, model.sigma()));
    return out;
  }
  const Estimator est = model.is_identity() ? Estimator::ml_ssnm(model.sparsity()) : Estimator::ml_slm(model);
  MonteCarloMean::Options opts;
  opts.n_trials = std::min<std::int64_t>(sim.trials, 100'000);
  opts.seed = sim.seed;
  opts.threads = sim.threads;
  const auto source = std::make_shared<const MonteCarloMean>(ObservationModel::of(model), est, opts);
  for (int k = 0; k < n; ++k) out.push_back(MeanFunction::monte_carlo(k, source));
  return out;
}

inline std::string support_field(const SupportSet& k) {
  std::string s = k.to_string();
  for (char& ch : s) {
    if (ch == ',') ch = ' ';
  }
  return s;
}

inline int cmd_bound(const Config& c, std::ostream& out) {
  const SparseLinearModel model = build_model(c);
  require_x0(c);
  const auto gammas = means_for(c.mean, model, c.simulation);
  BoundOptions opts = c.bound;
  opts.threads = c.simulation.threads;

  std::ostringstream csv;
  csv << "x0,component,bound,support,beta2,propagated_error\n";
  for (std::size_t i = 0; i < c.x0.size(); ++i) {
    const Vector& x0 = c.x0[i];
    const VarianceBound vb = variance_bound(model, gammas, x0, opts);
    const std::string id = std::to_string(i + 1);
    for (std::size_t k = 0; k < vb.components.size(); ++k) {
      const BoundResult& r = vb.components[k];
      csv << id << ',' << k + 1 << ',' << format_number(r.value) << ',' << support_field(r.support)
          << ',' << format_number(r.beta2) << ',' << format_number(r.propagated_error) << '\n';
    }
    csv << id << ",total," << format_number(vb.value) << ",,," << format_number(vb.propagated_error)
        << '\n';
    if (model.is_identity() && c.mean.kind == "unbiased") {
      const double xi = xi_and_j(x0, model.sparsity()).xi;
      csv << id << ",closed_form,"
          << format_number(ssnm_unbiased_bound(model.n_dim(), model.sparsity(), xi, model.sigma2()))
          << ",,,\n";
    }
  }
  emit(csv.str(), c.output, out);
  return kExitOk;
}

inline Estimator build_estimator(const EstimatorSpec& e, const SparseLinearModel& model,
                                 const Vector& x0, double budget) {
  const bool identity = model.is_identity();
  if (e.kind == "identity") {
    if (!identity) throw ConfigError("estimator identity: requires model.kind identity");
    return Estimator::identity();
  }
  if (e.kind == "ml") {
    return identity ? Estimator::ml_ssnm(model.sparsity()) : Estimator::ml_slm(model, budget);
  }
  if (e.kind == "ht") {
    if (!identity) throw ConfigError("estimator ht: requires model.kind identity");
    return Estimator::hard_threshold(e.threshold);
  }
  if (e.kind == "lmvu") {
    if (!identity || model.sparsity() != 1) {
      throw ConfigError("estimator lmvu: requires model.kind identity and sparsity 1");
    }
    return Estimator::lmvu_s1(x0, model.sigma2());
  }
  if (model.obs_dim() < model.n_dim()) throw ConfigError("estimator ls: requires rows >= cols");
  return Estimator::least_squares(model.h());
}

inline double estimator_bound(const EstimatorSpec& e, const SparseLinearModel& model,
                              const Vector& x0, const Config& c) {
  MeanSpec mean;
  if (e.kind == "ht") {
    mean = {"ht", e.threshold};
  } else if (e.kind == "ml") {
    mean = {"ml", 0.0};
  }
  BoundOptions opts = c.bound;
  opts.threads = c.simulation.threads;
  return variance_bound(model, means_for(mean, model, c.simulation), x0, opts).value;
}

inline int cmd_simulate(const Config& c, std::ostream& out) {
  const SparseLinearModel model = build_model(c);
  require_x0(c);
  if (c.estimators.empty()) throw ConfigError("config: estimators list is required");

  std::ostringstream csv;
  csv << "estimator,x0,n_trials,seed,total_variance,se_variance,mse,se_mse,bias_norm,bound\n";
  for (const EstimatorSpec& e : c.estimators) {
    for (std::size_t i = 0; i < c.x0.size(); ++i) {
      const Vector& x0 = c.x0[i];
      SimulationSpec spec{ObservationModel::of(model), x0,
                          build_estimator(e, model, x0, c.bound.budget), c.simulation.trials,
                          c.simulation.seed};
      const EstimatorStats st = simulate(spec, c.simulation.threads);
      csv << e.label() << ',' << i + 1 << ',' << st.n_trials << ',' << c.simulation.seed << ','
          << format_number(st.total_variance) << ',' << format_number(st.se_total_variance) << ','
          << format_number(st.mse) << ',' << format_number(st.se_mse) << ','
          << format_number(st.bias_norm()) << ',' << format_number(estimator_bound(e, model, x0, c))
          << '\n';
    }
  }
  emit(csv.str(), c.output, out);
  return kExitOk;
}

inline int cmd_fig1(const Config& c, std::ostream& out) {
  const int n = c.model ? c.model->cols : 5;
  if (c.model && c.model->kind != "identity") throw ConfigError("fig1: requires model.kind identity");
  if (c.sparsity != 1) throw ConfigError("fig1: requires sparsity 1");
  if (c.sweep.j < 1 || c.sweep.j > n) throw ConfigError("sweep.j: out of range");
  const SparseLinearModel model = SparseLinearModel::ssnm(n, c.sigma2, 1);
  const double sigma = model.sigma();
  const int j = c.sweep.j - 1;

  std::vector<MeanFunction> ml_means;
  for (int k = 0; k < n; ++k) ml_means.push_back(MeanFunction::ml_induced(k, 1, sigma));
  std::vector<std::vector<MeanFunction>> ht_means;
  for (double t : c.sweep.thresholds) {
    std::vector<MeanFunction> g;
    for (int k = 0; k < n; ++k) g.push_back(MeanFunction::hard_threshold(k, t, sigma));
    ht_means.push_back(std::move(g));
  }

  std::ostringstream csv;
  csv << "snr_db,v_ml,b_ml";
  for (double t : c.sweep.thresholds) {
    csv << ",v_ht_T" << format_short(t) << ",b_ht_T" << format_short(t);
  }
  csv << ",se_v_ml";
  for (double t : c.sweep.thresholds) csv << ",se_v_ht_T" << format_short(t);
  if (c.sweep.unbiased_column) csv << ",b_unbiased";
  csv << '\n';

  for (double snr : c.sweep.snr_db) {
    const double xi = sigma * std::pow(10.0, snr / 20.0);
    Vector x0 = Vector::Zero(n);
    x0[j] = xi;
    const auto run = [&](const Estimator& est) {
      SimulationSpec spec{ObservationModel::of(model), x0, est, c.simulation.trials, c.simulation.seed};
      return simulate(spec, c.simulation.threads);
    };
    const EstimatorStats ml = run(Estimator::ml_ssnm(1));
    const double b_ml = ssnm_single_sparse_bound(model, ml_means, x0).value;
    std::vector<EstimatorStats> ht;
    std::vector<double> b_ht;
    for (std::size_t t = 0; t < c.sweep.thresholds.size(); ++t) {
      ht.push_back(run(Estimator::hard_threshold(c.sweep.thresholds[t])));
      b_ht.push_back(ssnm_single_sparse_bound(model, ht_means[t], x0).value);
    }
    csv << format_number(snr) << ',' << format_number(ml.total_variance) << ',' << format_number(b_ml);
    for (std::size_t t = 0; t < ht.size(); ++t) {
      csv << ',' << format_number(ht[t].total_variance) << ',' << format_number(b_ht[t]);
    }
    csv << ',' << format_number(ml.se_total_variance);
    for (const EstimatorStats& st : ht) csv << ',' << format_number(st.se_total_variance);
    if (c.sweep.unbiased_column) {
      csv << ',' << format_number(ssnm_unbiased_bound(n, 1, xi, model.sigma2()));
    }
    csv << '\n';
  }
  emit(csv.str(), c.output, out);
  return kExitOk;
}

inline int cmd_oracle(const Config& c, std::ostream& out, std::ostream& err) {
  const SparseLinearModel model = build_model(c);
  require_x0(c);
  if (c.mean.kind == "ml" && !(model.is_identity() && model.sparsity() == 1)) {
    throw UnsupportedConfiguration("oracle: ml mean is only available for H = I and sparsity 1");
  }
  const auto gammas = means_for(c.mean, model, c.simulation);
  BoundOptions opts = c.bound;
  opts.threads = c.simulation.threads;
  int status = kExitOk;

  std::ostringstream csv;
  csv << "x0,component,support,per_axis,n_points,oracle,bound_lk,condition,usable_points,reaches_bound\n";
  for (std::size_t i = 0; i < c.x0.size(); ++i) {
    const Vector& x0 = c.x0[i];
    for (int k = 0; k < model.n_dim(); ++k) {
      if (c.oracle.component != 0 && c.oracle.component != k + 1) continue;
      const BoundResult best = best_support_bound(model, gammas[static_cast<std::size_t>(k)], x0, opts);
      for (int per_axis : c.oracle.per_axis) {
        const TestPointSet pts = grid_points(model, best.support, x0,
                                             c.oracle.half_width_sigmas * model.sigma(), per_axis,
                                             c.oracle.jitter);
        csv << i + 1 << ',' << k + 1 << ',' << support_field(best.support) << ',' << per_axis << ','
            << pts.points.size() << ',';
        try {
          const OracleResult r = finite_point_bound(model, gammas[static_cast<std::size_t>(k)], x0, pts);
          const bool ok = best.value - 1e-8 <= r.value;
          csv << format_number(r.value) << ',' << format_number(best.value) << ','
              << format_number(r.condition_estimate) << ',' << r.n_points << ','
              << (ok ? "yes" : "no") << '\n';
        } catch (const IllConditionedError& e) {
          csv << "nan," << format_number(best.value) << ",inf," << e.usable_points()
              << ",ill_conditioned\n";
          err << "warning: " << e.what() << '\n';
          status = kExitNumerical;
        }
      }
    }
  }
  emit(csv.str(), c.output, out);
  return status;
}

inline int cmd_spark(const Config& c, std::ostream& out) {
  if (!c.model) throw ConfigError("config: model is required");
  const Matrix& h = c.model->h;
  if (c.sparsity < 1 || c.sparsity >= h.cols()) throw ConfigError("sparsity: need 1 <= S < N");
  const bool ok = linalg::spark_exceeds(h, c.sparsity);
  std::ostringstream text;
  text << "H: " << h.rows() << "x" << h.cols() << ", S = " << c.sparsity << '\n'
       << "spark(H) > S: " << (ok ? "yes" : "no") << '\n';
  emit(text.str(), c.output, out);
  return kExitOk;
}

}  // namespace detail

/// Runs the command line `args` (without the program name).
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variance lower bounds for the sparse linear model", "slmbound"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;
  std::int64_t trials = 0;
  int threads = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment configuration");
    sub->add_option("--out", o.out, "output file (default: standard output)");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--trials", trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };
  auto* bound = app.add_subcommand("bound", "per-component bounds and their sum");
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo statistics of estimators");
  auto* fig1 = app.add_subcommand("fig1", "variance and bound versus SNR for ML and HT");
  auto* oracle = app.add_subcommand("oracle", "finite-test-point bound on grids");
  auto* spark = app.add_subcommand("spark", "check that every S columns of H are independent");
  for (auto* sub : {bound, simulate_cmd, fig1, oracle, spark}) add_common(sub);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const auto given = [&](const char* name) {
    for (auto* sub : app.get_subcommands()) {
      if (sub->count(name) > 0) return true;
    }
    return false;
  };
  if (given("--seed")) o.seed = seed;
  if (given("--trials")) o.trials = trials;
  if (given("--threads")) o.threads = threads;

  try {
    if (bound->parsed()) return detail::cmd_bound(detail::resolve(o, true), out);
    if (simulate_cmd->parsed()) return detail::cmd_simulate(detail::resolve(o, true), out);
    if (fig1->parsed()) return detail::cmd_fig1(detail::resolve(o, false), out);
    if (oracle->parsed()) return detail::cmd_oracle(detail::resolve(o, true), out, err);
    return detail::cmd_spark(detail::resolve(o, true), out);
  } catch (const BudgetError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBudget;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedConfiguration& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SingularityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace slmbound::cli
