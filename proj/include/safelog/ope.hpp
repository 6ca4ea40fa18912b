// Contextual off-policy evaluation: logged data, IPS and PI estimators,
// contextual safe designs, and the error-bound calculators.
#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "safelog/linear_design.hpp"
#include "safelog/tabular.hpp"

namespace safelog {

/// π(·|x) for each context id x = 0 … X−1, all over the same K actions.
class ContextualPolicy {
 public:
  explicit ContextualPolicy(std::vector<Policy> rows);
  static ContextualPolicy uniform(Eigen::Index contexts, Eigen::Index actions);

  Eigen::Index contexts() const { return Eigen::Index(rows_.size()); }
  Eigen::Index actions() const { return rows_.front().size(); }
  const Policy& operator[](Eigen::Index x) const { return rows_[std::size_t(x)]; }
  double prob(Eigen::Index x, Eigen::Index a) const { return rows_[std::size_t(x)][a]; }
  const std::vector<Policy>& rows() const { return rows_; }

 private:
  std::vector<Policy> rows_;
};

/// max_x max_a 1/π(a|x).
double g_contextual(const ContextualPolicy& pi);

class ContextDistribution {
 public:
  explicit ContextDistribution(Vector weights);
  static ContextDistribution uniform(Eigen::Index contexts);

  const Vector& weights() const { return weights_; }
  Eigen::Index size() const { return weights_.size(); }
  double operator[](Eigen::Index x) const { return weights_(x); }

 private:
  Vector weights_;
};

/// Mean reward r̄(x, a) in [0, 1]; observed rewards are Bernoulli(r̄).
struct TabularRewardModel {
  Matrix means;  // X × K
};

/// r = aᵀθ_x + noise_sd·N(0, 1), optionally clipped to [0, 1].
struct LinearRewardModel {
  FeatureMatrix features;
  std::vector<Vector> theta;  // per context
  double noise_sd = 1.0;
  bool clip = false;
};

struct LoggedRecord {
  Eigen::Index context;
  Eigen::Index action;
  double reward;
  double logging_prob;
};

struct LoggedDataset {
  std::vector<LoggedRecord> records;
  /// Absent when the data was read back from CSV.
  std::optional<ContextualPolicy> logging;

  std::size_t size() const { return records.size(); }
};

LoggedDataset collect_dataset(const TabularRewardModel& model, const ContextualPolicy& logging,
                              const ContextDistribution& ctx, std::size_t n, Rng& rng);
LoggedDataset collect_dataset(const LinearRewardModel& model, const ContextualPolicy& logging,
                              const ContextDistribution& ctx, std::size_t n, Rng& rng);

/// Σ_x C(x) Σ_a π(a|x)·r̄(x, a).
double policy_value(const TabularRewardModel& model, const ContextualPolicy& pi, const ContextDistribution& ctx);
double policy_value(const LinearRewardModel& model, const ContextualPolicy& pi, const ContextDistribution& ctx);

/// (1/n) Σ_t π(a_t|x_t)/π_e(a_t|x_t)·r_t.
double ips_value(const LoggedDataset& data, const ContextualPolicy& target);

/// Moore-Penrose inverse of a symmetric matrix; eigenvalues below `floor`
/// are treated as zero.
Matrix pseudo_inverse_symmetric(const Matrix& m, double floor = 1e-10);

/// One summand of the PI estimate without the reward: (A·π(·|x))ᵀ G(π_e(·|x))⁺ a.
double pi_weight(const Vector& target_row, const Matrix& g_pinv, const FeatureMatrix& features, Eigen::Index action);

/// (1/n) Σ_t r_t·(A·π(·|x_t))ᵀ G(π_e(·|x_t))⁺ a_t. Needs the logging policy.
double pi_value(const LoggedDataset& data, const ContextualPolicy& target, const FeatureMatrix& features);

/// Without side information: water-filling in every context. With it: one
/// LP over all contexts maximizing γ subject to the C-weighted box safety
/// constraint.
ContextualPolicy contextual_safe_design_tabular(const ContextualPolicy& pi0, double alpha,
                                                const std::vector<RewardBox>& boxes,
                                                const ContextDistribution& ctx, bool side_info);

/// Joint Frank-Wolfe design over all contexts with one ellipsoid per context.
ContextualPolicy contextual_safe_design_linear(const ContextualPolicy& pi0, double alpha,
                                               const FeatureMatrix& features,
                                               const std::vector<Ellipsoid>& theta_sets,
                                               const ContextDistribution& ctx, const FwOptions& opts = {});

/// 7·g·√(|X|·log(4K|X|n/δ)/(2n)).
double ips_error_bound(double g, std::size_t n_contexts, std::size_t k, std::size_t n, double delta);

/// 3·g·√(d|X|·log(n/(δ·min{1, √λ*}))/n).
double pi_error_bound(double g, std::size_t d, std::size_t n_contexts, std::size_t n, double delta,
                      double lambda_star);

/// CSV with header context,action,reward,logging_prob.
void write_dataset_csv(std::ostream& out, const LoggedDataset& data);
LoggedDataset read_dataset_csv(std::istream& in);

}  // namespace safelog
