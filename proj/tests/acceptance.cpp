// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cli_app.hpp"
#include "slmbound/slmbound.hpp"
#include "test_util.hpp"

using namespace slmbound;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Closed form against the general bound on random sparse x0.
Outcome closed_form() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  double worst = 0.0;
  int cases = 0;
  for (int n = 2; n <= 8; ++n) {
    for (int s = 1; s <= std::min(3, n - 1); ++s) {
      for (double sigma : {0.5, 1.0, 2.0}) {
        const SparseLinearModel model = SparseLinearModel::ssnm(n, sigma * sigma, s);
        const auto gammas = unbiased_means(n);
        for (int rep = 0; rep < 20; ++rep) {
          const int nnz = static_cast<int>(rng() % static_cast<std::uint64_t>(s + 1));
          const Vector x0 = testutil::random_sparse(rng, n, nnz, 1.5 * sigma);
          const double xi = std::abs(xi_and_j(x0, s).xi);
          const double got = variance_bound(model, gammas, x0).value;
          const double want = ssnm_unbiased_bound(n, s, xi, sigma * sigma);
          worst = std::max(worst, std::abs(got - want) / want);
          ++cases;
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst <= 1e-10 && secs < 10.0,
          std::to_string(cases) + " cases, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f s", secs)};
}

// LMVU at x0 = xi e_1 attains 1 + 4 exp(-xi^2) and is unbiased.
Outcome lmvu() {
  Outcome o;
  for (double xi : {0.5, 1.0, 2.0, 4.0}) {
    Vector x0 = Vector::Zero(5);
    x0[0] = xi;
    const SimulationSpec spec{{Matrix::Identity(5, 5), 1.0}, x0, Estimator::lmvu_s1(x0, 1.0), 1'000'000, 11};
    const EstimatorStats st = simulate(spec);
    const double want = 1.0 + 4.0 * std::exp(-xi * xi);
    const double z = std::abs(st.total_variance - want) / st.se_total_variance;
    double worst_bias = 0.0;
    for (int k = 0; k < 5; ++k) worst_bias = std::max(worst_bias, std::abs(st.bias[k]) / st.se_mean[k]);
    if (z > 3.0 || worst_bias > 3.0) o.pass = false;
    o.detail += fmt("xi=%g var z=%.2f bias z=%.2f; ", xi, z, worst_bias);
  }
  return o;
}

// Least squares attains the linear Gaussian CRB per component.
Outcome ls_crb() {
  Outcome o;
  std::mt19937_64 rng(3);
  const std::vector<std::pair<int, int>> shapes{{4, 3}, {6, 2}, {5, 5}};
  const std::vector<double> sigma2s{1.0, 0.25, 2.0};
  double worst = 0.0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Matrix a = testutil::random_matrix(rng, shapes[i].first, shapes[i].second);
    const Vector s0 = testutil::random_vector(rng, shapes[i].second);
    const SimulationSpec spec{{a, sigma2s[i]}, s0, Estimator::least_squares(a), 1'000'000, 20 + i};
    const EstimatorStats st = simulate(spec);
    for (int k = 0; k < a.cols(); ++k) {
      const double crb = lgm_crb(a, Vector::Unit(a.cols(), k), sigma2s[i]);
      worst = std::max(worst, std::abs(st.component_variances[k] - crb) / st.se_component_variances[k]);
    }
  }
  o.pass = worst <= 3.0;
  o.detail = fmt("3 instances, max |var - crb| / se = %.2f", worst);
  return o;
}

std::vector<std::map<std::string, double>> parse_csv(const std::string& text) {
  std::stringstream lines(text);
  std::string line;
  std::getline(lines, line);
  std::vector<std::string> header;
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) header.push_back(cell);
  }
  std::vector<std::map<std::string, double>> rows;
  while (std::getline(lines, line)) {
    std::stringstream ls(line);
    std::string cell;
    std::map<std::string, double> row;
    for (const std::string& h : header) {
      std::getline(ls, cell, ',');
      row[h] = std::strtod(cell.c_str(), nullptr);
    }
    rows.push_back(row);
  }
  return rows;
}

// The fig1 sweep: bounds tight at high SNR, a visible ML gap at mid SNR.
Outcome fig1(const fs::path& dir) {
  const fs::path cfg = dir / "fig1.json";
  std::ofstream(cfg) << R"({"simulation": {"trials": 100000, "seed": 5}})";
  std::ostringstream out, err;
  const int code = cli::run({"fig1", "--config", cfg.string()}, out, err);
  if (code != 0) return {false, "fig1 exited with " + std::to_string(code) + ": " + err.str()};
  Outcome o;
  for (const auto& row : parse_csv(out.str())) {
    const double snr = row.at("snr_db");
    if (snr == 20.0) {
      for (const char* tag : {"ml", "ht_T4", "ht_T5"}) {
        const double ratio = row.at(std::string("v_") + tag) / row.at(std::string("b_") + tag);
        if (ratio < 0.95 || ratio > 1.05) o.pass = false;
        o.detail += std::string(tag) + fmt(" ratio %.4f; ", ratio);
      }
    }
    if (snr >= 8.0 && snr <= 12.0) {
      const double gap = (row.at("v_ml") - row.at("b_ml")) / row.at("se_v_ml");
      if (!(gap > 3.0)) o.pass = false;
      o.detail += fmt("ml gap at %g dB = %.1f se; ", snr, gap);
    }
  }
  return o;
}

struct SandwichCase {
  SparseLinearModel model;
  Vector x0;
  std::vector<MeanFunction> gammas;
  Estimator estimator;
};

// L* <= finite-point Barankin bound <= simulated variance, per component.
Outcome sandwich() {
  std::mt19937_64 rng(9);
  std::vector<SandwichCase> cases;
  for (int i = 0; i < 10; ++i) {
    const int n = 3 + i % 3;
    const int s = i < 8 ? 1 : 2;
    const double threshold = 1.0 + 0.5 * (i % 4);
    const SparseLinearModel model = SparseLinearModel::ssnm(n, 1.0, s);
    std::vector<MeanFunction> g;
    for (int k = 0; k < n; ++k) g.push_back(MeanFunction::hard_threshold(k, threshold, 1.0));
    cases.push_back({model, testutil::random_sparse(rng, n, s, 2.0), g, Estimator::hard_threshold(threshold)});
  }
  for (int i = 0; i < 5; ++i) {
    const int n = 3 + i % 2;
    const int m = n + 1 + i % 2;
    Matrix h = testutil::random_matrix(rng, m, n);
    h.colwise().normalize();
    const int s = i < 4 ? 1 : 2;
    const SparseLinearModel model(h, 0.5 + 0.25 * i, s);
    cases.push_back({model, testutil::random_sparse(rng, n, s, 1.5), unbiased_means(n), Estimator::least_squares(h)});
  }

  Outcome o;
  int checked = 0;
  double worst_low = 0.0;
  double worst_high = 0.0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const SandwichCase& sc = cases[c];
    const SimulationSpec spec{ObservationModel::of(sc.model), sc.x0, sc.estimator, 200'000, 40 + c};
    const EstimatorStats st = simulate(spec);
    for (int k = 0; k < sc.model.n_dim(); ++k) {
      const MeanFunction& gamma = sc.gammas[static_cast<std::size_t>(k)];
      const BoundResult best = best_support_bound(sc.model, gamma, sc.x0);
      const TestPointSet pts = grid_points(sc.model, best.support, sc.x0, 6.0 * sc.model.sigma(), 41);
      const double oracle = finite_point_bound(sc.model, gamma, sc.x0, pts).value;
      worst_low = std::max(worst_low, best.value - oracle);
      worst_high = std::max(worst_high, (oracle - st.component_variances[k]) / st.se_component_variances[k]);
      ++checked;
    }
  }
  o.pass = worst_low <= 1e-8 && worst_high <= 3.0;
  o.detail = std::to_string(checked) + " components; max (L* - oracle) = " + fmt("%.2e", worst_low) +
             ", max (oracle - var) / se = " + fmt("%.2f", worst_high);
  return o;
}

// The two-point bound with a tiny offset recovers sigma^2.
Outcome hcr() {
  double worst = 0.0;
  for (double sigma : {0.5, 1.0, 3.0}) {
    const SparseLinearModel model = SparseLinearModel::ssnm(5, sigma * sigma, 1);
    Vector x0 = Vector::Zero(5);
    x0[2] = 1.7;
    const MeanFunction gamma = MeanFunction::unbiased(2);
    const double v = finite_point_bound(model, gamma, x0, two_points(x0, 2, 1e-3 * sigma)).value;
    worst = std::max(worst, std::abs(v - sigma * sigma) / (sigma * sigma));
  }
  return {worst <= 1e-3, fmt("max rel err %.2e", worst)};
}

// The bound is continuous as xi -> 0.
Outcome continuity() {
  double worst = 0.0;
  for (int n = 2; n <= 10; ++n) {
    for (int s = 1; s < n; ++s) {
      for (double sigma : {0.5, 1.0, 2.0}) {
        const SparseLinearModel model = SparseLinearModel::ssnm(n, sigma * sigma, s);
        const auto gammas = unbiased_means(n);
        Vector x0 = Vector::Zero(n);
        const double at_zero = variance_bound(model, gammas, x0).value;
        for (int i = 0; i < s; ++i) x0[i] = 1e-6;
        const double near = variance_bound(model, gammas, x0).value;
        const double closed = std::abs(ssnm_unbiased_bound(n, s, 1e-6, sigma * sigma) -
                                       ssnm_unbiased_bound(n, s, 0.0, sigma * sigma));
        worst = std::max({worst, std::abs(near - at_zero) / (n * sigma * sigma), closed / (n * sigma * sigma)});
      }
    }
  }
  return {worst < 1e-9, fmt("max |B(1e-6) - B(0)| / (N sigma^2) = %.2e", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fixed seeds reproduce output exactly, regardless of thread count.
Outcome determinism(const fs::path& dir) {
  const fs::path cfg = dir / "sim.json";
  std::ofstream(cfg) << R"({
    "model": {"kind": "gaussian", "rows": 6, "cols": 5, "seed": 3},
    "sigma2": 0.5, "sparsity": 2,
    "x0": {"indices": [2, 5], "values": [1.5, -0.8]},
    "estimators": ["ml", "ls"],
    "simulation": {"trials": 50000, "seed": 17}
  })";
  std::ostringstream out, err;
  const auto run = [&](const fs::path& dest, const char* threads) {
    return cli::run({"simulate", "--config", cfg.string(), "--out", dest.string(), "--threads", threads}, out, err);
  };
  if (run(dir / "a.csv", "1") != 0 || run(dir / "b.csv", "1") != 0 || run(dir / "c.csv", "8") != 0) {
    return {false, "simulate failed: " + err.str()};
  }
  const std::string a = slurp(dir / "a.csv");
  const bool repeat = !a.empty() && a == slurp(dir / "b.csv");
  const bool threads = a == slurp(dir / "c.csv");

  const SparseLinearModel model = SparseLinearModel::ssnm(6, 1.0, 2);
  Vector x0 = Vector::Zero(6);
  x0[1] = 2.0;
  x0[4] = -1.0;
  const SimulationSpec spec{ObservationModel::of(model), x0, Estimator::ml_ssnm(2), 300'000, 99};
  const EstimatorStats s1 = simulate(spec, 1);
  const EstimatorStats s8 = simulate(spec, 8);
  const bool lib = s1.total_variance == s8.total_variance && s1.mse == s8.mse && s1.mean == s8.mean &&
                   s1.se_total_variance == s8.se_total_variance;
  return {repeat && threads && lib, std::string("repeat ") + (repeat ? "identical" : "differs") +
                                        ", 1 vs 8 threads " + (threads && lib ? "identical" : "differs")};
}

// Randomized identities, 1000 cases each.
Outcome invariants() {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> dim(2, 6);
  std::map<std::string, double> worst;

  for (int c = 0; c < 1000; ++c) {
    const int n = dim(rng);
    Vector x0 = testutil::random_vector(rng, n);
    const SimulationSpec spec{{Matrix::Identity(n, n), 1.0}, x0, Estimator::ml_ssnm(1), 200,
                              static_cast<std::uint64_t>(c)};
    const EstimatorStats st = simulate(spec);
    const double count = static_cast<double>(st.n_trials);
    const double rhs = st.total_variance * (count - 1.0) / count + st.bias.squaredNorm();
    worst["mse decomposition"] = std::max(worst["mse decomposition"], std::abs(st.mse - rhs) / std::max(1.0, st.mse));
  }

  for (int c = 0; c < 1000; ++c) {
    const int cols = dim(rng);
    const Matrix a = testutil::random_matrix(rng, cols + static_cast<int>(rng() % 3), cols);
    const Matrix p = linalg::projector(a);
    const double e = std::max({(p * p - p).cwiseAbs().maxCoeff(), (p - p.transpose()).cwiseAbs().maxCoeff(),
                               (p * a - a).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff())});
    worst["projector"] = std::max(worst["projector"], e);

    const Matrix pi = linalg::pseudo_inverse(a);
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * pi.cwiseAbs().maxCoeff());
    const double e2 = std::max({(a * pi * a - a).cwiseAbs().maxCoeff(), (pi * a * pi - pi).cwiseAbs().maxCoeff(),
                                (Matrix(a * pi) - Matrix(a * pi).transpose()).cwiseAbs().maxCoeff(),
                                (Matrix(pi * a) - Matrix(pi * a).transpose()).cwiseAbs().maxCoeff()}) / scale;
    worst["pseudo-inverse"] = std::max(worst["pseudo-inverse"], e2);
  }

  for (int c = 0; c < 1000; ++c) {
    const int n = dim(rng) + 1;
    const int s = 1 + static_cast<int>(rng() % 2);
    const Matrix h = testutil::random_matrix(rng, n + 1, n) / std::sqrt(static_cast<double>(n + 1));
    const SparseLinearModel model(h, 1.0, std::min(s, n - 1));
    const Vector x0 = testutil::random_sparse(rng, n, model.sparsity(), 0.5);
    std::vector<Vector> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(testutil::random_sparse(rng, n, model.sparsity(), 0.5));
    Matrix gram(5, 5);
    double asym = 0.0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        gram(i, j) = kernel_slm(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)], x0, model);
        const double back = kernel_slm(pts[static_cast<std::size_t>(j)], pts[static_cast<std::size_t>(i)], x0, model);
        asym = std::max(asym, std::abs(gram(i, j) - back) / std::abs(back));
      }
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double neg = std::max(0.0, -eig.eigenvalues().minCoeff() / eig.eigenvalues().maxCoeff());
    worst["kernel symmetry/psd"] = std::max({worst["kernel symmetry/psd"], asym, neg - 1e-12 > 0 ? neg : 0.0});
  }

  for (int c = 0; c < 1000; ++c) {
    const int n = dim(rng) + 1;
    const Matrix h = testutil::random_matrix(rng, n, n);
    const SparseLinearModel model(h, 0.7, 1 + static_cast<int>(rng() % 2));
    const Vector x0 = testutil::random_sparse(rng, n, model.sparsity(), 1.0);
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(model.sparsity()));
    std::sort(idx.begin(), idx.end());
    const SupportSet k(idx, n);
    const int comp = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const MeanFunction gamma = c % 2 ? MeanFunction::unbiased(comp) : MeanFunction::hard_threshold(comp, 1.0, model.sigma());
    const BoundResult r = support_bound(model, gamma, k, x0);
    const double scale = std::max({1.0, std::abs(r.value), r.gamma_at_x0 * r.gamma_at_x0});
    worst["two-form identity"] = std::max(worst["two-form identity"], std::abs(r.value - r.tilde_form_value) / scale);

    double prev = 1.0;
    double violation = 0.0;
    for (double t = 0.0; t <= 3.0; t += 0.25) {
      const double b = isometry_data(model, k, Vector(t * x0)).beta;
      violation = std::max(violation, b - prev);
      prev = b;
    }
    worst["beta monotonicity"] = std::max(worst["beta monotonicity"], violation);
  }

  const std::map<std::string, double> limits{{"mse decomposition", 1e-9}, {"projector", 1e-9},
                                             {"pseudo-inverse", 1e-8},   {"kernel symmetry/psd", 1e-12},
                                             {"two-form identity", 1e-10}, {"beta monotonicity", 0.0}};
  Outcome o;
  for (const auto& [name, value] : worst) {
    if (value > limits.at(name)) o.pass = false;
    o.detail += name + fmt(" %.1e; ", value);
  }
  return o;
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "slmbound_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  struct Criterion {
    std::string name;
    std::function<Outcome()> check;
    double seconds;  // runtime limit, 0 for none
  };
  const std::vector<Criterion> criteria{
      {"closed form matches the general bound", closed_form, 10},
      {"LMVU attains the bound and is unbiased", lmvu, 120},
      {"least squares attains the linear Gaussian CRB", ls_crb, 60},
      {"fig1 sweep tightness and mid-SNR gap", [&] { return fig1(dir); }, 900},
      {"bound <= finite-point oracle <= variance", sandwich, 300},
      {"two-point bound recovers sigma^2", hcr, 1},
      {"continuity at xi = 0", continuity, 0},
      {"deterministic and thread-invariant simulation", [&] { return determinism(dir); }, 0},
      {"invariant suites", invariants, 60},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const Criterion& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.seconds > 0 && secs > c.seconds) {
      o.pass = false;
      o.detail += fmt("; over the %g s limit", c.seconds);
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s (%s) [%.2f s]\n", o.pass ? "PASS" : "FAIL", i + 1, c.name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  fs::remove_all(dir);
  return failures == 0 ? 0 : 1;
}
