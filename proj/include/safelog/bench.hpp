// Experiment harness: synthetic and MNIST design problems, the width /
// violation / off-policy-gap metrics, and CSV plus gnuplot emission.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "safelog/idx.hpp"
#include "safelog/linear_design.hpp"

namespace safelog {

struct SyntheticSpec {
  Eigen::Index d = 4;
  Eigen::Index k = 100;
  double alpha = 0.9;
  std::uint64_t seed = 0;
  int n_runs = 50;

  void validate() const;
};

enum class Method { SafeOD, GOptimal, Mixture };
const char* method_name(Method m);

struct ExperimentRow {
  Method method;
  Eigen::Index d;
  double alpha;
  std::uint64_t seed;
  double width;
  double safety_violation;
  double offpolicy_gap;
  double runtime_ms;
};

/// Sphere-uniform feature columns, Dirichlet(1) π0, θ̄ uniform on [1,2]^d,
/// Σ̄ = I.
DesignProblem gen_synthetic(const SyntheticSpec& spec, Rng& rng);

/// max_{θ∈Θ} (απ0 − π)ᵀAᵀθ; positive means violated.
double safety_violation_metric(const Policy& pi, const DesignProblem& prob);

struct GapOptions {
  int runs = 200;
  double noise_sd = 1.0;
  double ridge = 1e-8;
  int samples_per_dim = 10;
};

/// Mean over runs of (a* − â)ᵀθ*, with θ* uniform on Θ and â fitted by
/// ridge least squares to samples_per_dim·d rounds logged by `logging`.
double off_policy_gap(const DesignProblem& prob, const Policy& logging, const GapOptions& opts, Rng& rng);

struct SuiteOptions {
  FwOptions fw;
  GapOptions gap;
  unsigned threads = 0;  // 0: hardware concurrency
  bool timing = false;   // runtime_ms is 0 unless set, keeping output reproducible
};

/// One row per method for one problem; `seed` drives the gap simulation.
std::vector<ExperimentRow> evaluate_methods(const DesignProblem& prob, std::uint64_t seed, const SuiteOptions& opts);

/// Seeds spec.seed … spec.seed + n_runs − 1, three rows each, in seed order.
std::vector<ExperimentRow> run_synthetic_suite(const SyntheticSpec& spec, const SuiteOptions& opts);

/// Rows for problems built per seed by `make` (seed order preserved).
template <typename Make>
std::vector<ExperimentRow> run_seeded(std::uint64_t first_seed, int n_runs, const SuiteOptions& opts, Make make);

void write_experiment_csv(std::ostream& out, const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> read_experiment_csv(std::istream& in);

/// gnuplot script drawing width, violation and gap panels from `csv_path`.
void write_plot_script(std::ostream& out, const std::string& csv_path);

struct MnistOptions {
  int target_digit = 0;
  Eigen::Index k = 100;
  int pool = 4;
  double ridge = 1.0;
  std::size_t train = 5000;
  double confidence = 0.95;
  bool force = false;
};

/// Average-pooled, [0,1]-scaled, unit-norm image features.
Matrix pooled_features(const IdxImages& images, int pool);

/// Ridge regression of the target-digit indicator on a random training
/// subsample gives Θ; K random images become the actions; π0 is Dirichlet(1).
DesignProblem mnist_problem(const IdxImages& images, const std::vector<std::uint8_t>& labels, double alpha,
                            const MnistOptions& opts, Rng& rng);

DesignProblem mnist_ingest(const std::string& images_path, const std::string& labels_path, double alpha,
                           const MnistOptions& opts, Rng& rng);

/// Median of the `method` rows' column selected by `field`.
double median_of(const std::vector<ExperimentRow>& rows, Method method, double ExperimentRow::*field);

/// Fraction of `method` rows whose violation exceeds tol.
double violation_fraction(const std::vector<ExperimentRow>& rows, Method method, double tol = 1e-6);

}  // namespace safelog

#include "safelog/bench_impl.hpp"
