#include "safelog/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "safelog/errors.hpp"
#include "safelog/tabular.hpp"

namespace safelog {
namespace {

Policy dirichlet_one(Eigen::Index k, Rng& rng) {
  Vector p(k);
  for (Eigen::Index a = 0; a < k; ++a) p(a) = rng.exponential();
  // An all-zero draw needs 2^-53 on every coordinate; redraw rather than divide.
  while (p.sum() <= 0.0)
    for (Eigen::Index a = 0; a < k; ++a) p(a) = rng.exponential();
  return Policy::renormalized(p / p.sum());
}

Eigen::Index argmax_reward(const Matrix& a, const Vector& theta) {
  Eigen::Index best;
  (a.transpose() * theta).maxCoeff(&best);
  return best;
}

// Standard normal quantile by bisection on erfc.
double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Wilson-Hilferty approximation to the chi-square quantile.
double chi_square_quantile(double dof, double p) {
  const double z = normal_quantile(p);
  const double c = 2.0 / (9.0 * dof);
  return dof * std::pow(1.0 - c + z * std::sqrt(c), 3.0);
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(m);
  return idx;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (d < 1) throw ValidationError("SyntheticSpec: d must be at least 1");
  if (k < d) throw ValidationError("SyntheticSpec: K must be at least d");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("SyntheticSpec: alpha must lie in [0, 1]");
  if (n_runs < 1) throw ValidationError("SyntheticSpec: need at least one run");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::SafeOD: return "SafeOD";
    case Method::GOptimal: return "GOptimal";
    case Method::Mixture: return "Mixture";
  }
  return "?";
}

DesignProblem gen_synthetic(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  Matrix a(spec.d, spec.k);
  for (Eigen::Index i = 0; i < spec.k; ++i) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Eigen::Index j = 0; j < spec.d; ++j) a(j, i) = rng.normal();
      norm = a.col(i).norm();
    }
    a.col(i) /= norm;
  }
  const Policy pi0 = dirichlet_one(spec.k, rng);
  Vector center(spec.d);
  for (Eigen::Index j = 0; j < spec.d; ++j) center(j) = rng.uniform(1.0, 2.0);
  return {FeatureMatrix(a), pi0, spec.alpha, Ellipsoid(center, Matrix::Identity(spec.d, spec.d))};
}

double safety_violation_metric(const Policy& pi, const DesignProblem& prob) { return -safety_margin(pi, prob); }

double off_policy_gap(const DesignProblem& prob, const Policy& logging, const GapOptions& opts, Rng& rng) {
  if (opts.runs < 1 || opts.samples_per_dim < 1) throw ValidationError("off_policy_gap: runs and samples must be positive");
  const Matrix& a = prob.features.matrix();
  const Eigen::Index d = a.rows();
  const Eigen::Index n = opts.samples_per_dim * d;
  double total = 0.0;
  Matrix x(n, d);
  Vector y(n);
  for (int run = 0; run < opts.runs; ++run) {
    const Vector theta = sample_ellipsoid_uniform(prob.theta_set, rng);
    const Eigen::Index best = argmax_reward(a, theta);
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index act = rng.categorical(logging.probs());
      x.row(t) = a.col(act).transpose();
      y(t) = a.col(act).dot(theta) + opts.noise_sd * rng.normal();
    }
    const Eigen::Index chosen = argmax_reward(a, least_squares(x, y, opts.ridge).coefficients);
    total += (a.col(best) - a.col(chosen)).dot(theta);
  }
  return total / opts.runs;
}

std::vector<ExperimentRow> evaluate_methods(const DesignProblem& prob, std::uint64_t seed, const SuiteOptions& opts) {
  using Clock = std::chrono::steady_clock;
  std::vector<ExperimentRow> rows;
  const Eigen::Index d = prob.features.dim();
  for (Method m : {Method::SafeOD, Method::GOptimal, Method::Mixture}) {
    const auto start = Clock::now();
    Policy pi = prob.pi0;
    double width = 0.0;
    switch (m) {
      case Method::SafeOD: {
        const DesignResult r = frank_wolfe_safe(prob, opts.fw);
        pi = r.policy;
        width = r.width;
        break;
      }
      case Method::GOptimal: {
        const DesignResult r = g_optimal(prob.features, opts.fw);
        pi = r.policy;
        width = r.width;
        break;
      }
      case Method::Mixture:
        pi = mixture_policy(prob.pi0, prob.alpha);
        width = std::sqrt(g_value(pi, prob.features, opts.fw.ridge));
        break;
    }
    const double elapsed = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    // Common random numbers: every method sees the same θ* and noise stream.
    Rng gap_rng(seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull);
    const double gap = off_policy_gap(prob, pi, opts.gap, gap_rng);
    rows.push_back({m, d, prob.alpha, seed, width, safety_violation_metric(pi, prob), gap,
                    opts.timing ? elapsed : 0.0});
  }
  return rows;
}

std::vector<ExperimentRow> run_synthetic_suite(const SyntheticSpec& spec, const SuiteOptions& opts) {
  spec.validate();
  return run_seeded(spec.seed, spec.n_runs, opts, [&](std::uint64_t seed, Rng& rng) {
    SyntheticSpec s = spec;
    s.seed = seed;
    return gen_synthetic(s, rng);
  });
}

void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRow>& rows) {
  out << "method,d,alpha,seed,width,safety_violation,offpolicy_gap,runtime_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%ld,%.9g,%llu,%.9g,%.9g,%.9g,%.9g\n", method_name(r.method), long(r.d),
                  r.alpha, static_cast<unsigned long long>(r.seed), r.width, r.safety_violation, r.offpolicy_gap,
                  r.runtime_ms);
    out << buf;
  }
}

std::vector<ExperimentRow> read_experiment_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "method,d,alpha,seed,width,safety_violation,offpolicy_gap,runtime_ms")
    throw ValidationError("read_experiment_csv: missing header");
  std::vector<ExperimentRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string f[8];
    for (auto& s : f) std::getline(ss, s, ',');
    ExperimentRow r{};
    try {
      if (f[0] == "SafeOD") r.method = Method::SafeOD;
      else if (f[0] == "GOptimal") r.method = Method::GOptimal;
      else if (f[0] == "Mixture") r.method = Method::Mixture;
      else throw ValidationError("unknown method");
      r.d = std::stol(f[1]);
      r.alpha = std::stod(f[2]);
      r.seed = std::stoull(f[3]);
      r.width = std::stod(f[4]);
      r.safety_violation = std::stod(f[5]);
      r.offpolicy_gap = std::stod(f[6]);
      r.runtime_ms = std::stod(f[7]);
    } catch (const std::exception&) {
      throw ValidationError("read_experiment_csv: bad row at line " + std::to_string(lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

void write_plot_script(std::ostream& out, const std::string& csv_path) {
  out << "# gnuplot -p <this file>\n"
         "set datafile separator ','\n"
         "set key autotitle columnhead\n"
         "set terminal pngcairo size 1500,450\n"
         "set output '"
      << csv_path << ".png'\n"
      << "set multiplot layout 1,3\n"
         "set style data points\n"
         "set xlabel 'seed'\n";
  const char* panels[][2] = {{"width", "5"}, {"safety violation", "6"}, {"off-policy gap", "7"}};
  for (auto& p : panels) {
    out << "set title '" << p[0] << "'\n"
        << "plot '" << csv_path << "' using (strcol(1) eq 'SafeOD' ? $4 : 1/0):" << p[1] << " title 'SafeOD', \\\n"
        << "     '' using (strcol(1) eq 'GOptimal' ? $4 : 1/0):" << p[1] << " title 'GOptimal', \\\n"
        << "     '' using (strcol(1) eq 'Mixture' ? $4 : 1/0):" << p[1] << " title 'Mixture'\n";
  }
  out << "unset multiplot\n";
}

Matrix pooled_features(const IdxImages& images, int pool) {
  if (pool < 1) throw ValidationError("pooled_features: pool must be positive");
  if (images.rows % std::uint32_t(pool) || images.cols % std::uint32_t(pool))
    throw DimensionMismatch("pooled_features: pool must divide the image size");
  const std::size_t pr = images.rows / std::uint32_t(pool), pc = images.cols / std::uint32_t(pool);
  Matrix f(Eigen::Index(pr * pc), Eigen::Index(images.count));
  const double scale = 1.0 / (255.0 * pool * pool);
  for (std::size_t i = 0; i < images.count; ++i) {
    for (std::size_t r = 0; r < pr; ++r)
      for (std::size_t c = 0; c < pc; ++c) {
        double s = 0.0;
        for (int dr = 0; dr < pool; ++dr)
          for (int dc = 0; dc < pool; ++dc) s += images.pixel(i, r * pool + dr, c * pool + dc);
        f(Eigen::Index(r * pc + c), Eigen::Index(i)) = s * scale;
      }
    const double norm = f.col(Eigen::Index(i)).norm();
    if (norm > 0.0) f.col(Eigen::Index(i)) /= norm;
  }
  return f;
}

DesignProblem mnist_problem(const IdxImages& images, const std::vector<std::uint8_t>& labels, double alpha,
                            const MnistOptions& opts, Rng& rng) {
  if (labels.size() != images.count) throw DimensionMismatch("mnist: image and label counts differ");
  if (opts.pool < 4 && !opts.force)
    throw ValidationError("mnist: pool below 4 gives more features than actions; pass --force to override");
  if (opts.target_digit < 0 || opts.target_digit > 9) throw ValidationError("mnist: digit must lie in 0..9");
  if (opts.k < 1 || std::size_t(opts.k) > images.count) throw ValidationError("mnist: K exceeds the image count");
  if (!(opts.ridge > 0.0)) throw ValidationError("mnist: ridge must be positive");
  if (!(opts.confidence > 0.0 && opts.confidence < 1.0)) throw ValidationError("mnist: confidence must lie in (0, 1)");

  const Matrix feats = pooled_features(images, opts.pool);
  const Eigen::Index d = feats.rows();
  const std::size_t n = std::min<std::size_t>(std::max<std::size_t>(opts.train, 1), images.count);
  const auto train = sample_without_replacement(images.count, n, rng);
  Matrix x(Eigen::Index(n), d);
  Vector y = Vector::Zero(Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) {
    x.row(Eigen::Index(i)) = feats.col(Eigen::Index(train[i])).transpose();
    y(Eigen::Index(i)) = labels[train[i]] == opts.target_digit ? 1.0 : 0.0;
  }
  const auto fit = least_squares(x, y, opts.ridge);
  const double dof = std::max<double>(double(n) - double(d), 1.0);
  const double s2 = std::max((y - x * fit.coefficients).squaredNorm() / dof, 1e-12);
  const double beta = s2 * chi_square_quantile(double(d), opts.confidence);
  Matrix shape = beta * fit.gram.llt().solve(Matrix::Identity(d, d));
  shape = (0.5 * (shape + shape.transpose())).eval();

  const auto picks = sample_without_replacement(images.count, std::size_t(opts.k), rng);
  Matrix a(d, opts.k);
  for (Eigen::Index j = 0; j < opts.k; ++j) a.col(j) = feats.col(Eigen::Index(picks[std::size_t(j)]));
  const Policy pi0 = dirichlet_one(opts.k, rng);
  return {FeatureMatrix(a), pi0, alpha, Ellipsoid(fit.coefficients, shape)};
}

DesignProblem mnist_ingest(const std::string& images_path, const std::string& labels_path, double alpha,
                           const MnistOptions& opts, Rng& rng) {
  return mnist_problem(read_idx_images(images_path), read_idx_labels(labels_path), alpha, opts, rng);
}

double median_of(const std::vector<ExperimentRow>& rows, Method method, double ExperimentRow::*field) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.method == method) v.push_back(r.*field);
  if (v.empty()) throw ValidationError("median_of: no rows for method");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double violation_fraction(const std::vector<ExperimentRow>& rows, Method method, double tol) {
  std::size_t n = 0, bad = 0;
  for (const auto& r : rows)
    if (r.method == method) {
      ++n;
      bad += r.safety_violation > tol;
    }
  if (n == 0) throw ValidationError("violation_fraction: no rows for method");
  return double(bad) / double(n);
}

}  // namespace safelog
