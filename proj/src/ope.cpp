#include "safelog/ope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "safelog/lp.hpp"

namespace safelog {

ContextualPolicy::ContextualPolicy(std::vector<Policy> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw ValidationError("ContextualPolicy: no contexts");
  for (const auto& r : rows_)
    if (r.size() != rows_.front().size()) throw ValidationError("ContextualPolicy: rows differ in length");
}

ContextualPolicy ContextualPolicy::uniform(Eigen::Index contexts, Eigen::Index actions) {
  return ContextualPolicy(std::vector<Policy>(std::size_t(contexts), Policy::uniform(actions)));
}

double g_contextual(const ContextualPolicy& pi) {
  double g = 0.0;
  for (const auto& r : pi.rows()) g = std::max(g, g_tabular(r));
  return g;
}

ContextDistribution::ContextDistribution(Vector weights) : weights_(std::move(weights)) {
  if (weights_.size() == 0 || !weights_.allFinite() || weights_.minCoeff() < 0.0 ||
      std::abs(weights_.sum() - 1.0) > 1e-9)
    throw ValidationError("ContextDistribution: weights must be nonnegative and sum to 1");
}

ContextDistribution ContextDistribution::uniform(Eigen::Index contexts) {
  return ContextDistribution(Vector::Constant(contexts, 1.0 / double(contexts)));
}

namespace {

void check_collect(const ContextualPolicy& logging, const ContextDistribution& ctx, std::size_t n,
                   Eigen::Index contexts, Eigen::Index actions) {
  if (n == 0) throw ValidationError("collect_dataset: n must be at least 1");
  if (logging.contexts() != ctx.size() || contexts != ctx.size())
    throw ValidationError("collect_dataset: context count mismatch");
  if (logging.actions() != actions) throw ValidationError("collect_dataset: action count mismatch");
}

template <typename Reward>
LoggedDataset collect(const ContextualPolicy& logging, const ContextDistribution& ctx, std::size_t n, Rng& rng,
                      Reward reward) {
  LoggedDataset data;
  data.logging = logging;
  data.records.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::Index x = rng.categorical(ctx.weights());
    const Eigen::Index a = rng.categorical(logging[x].probs());
    data.records.push_back({x, a, reward(x, a), logging.prob(x, a)});
  }
  return data;
}

}  // namespace

LoggedDataset collect_dataset(const TabularRewardModel& model, const ContextualPolicy& logging,
                              const ContextDistribution& ctx, std::size_t n, Rng& rng) {
  check_collect(logging, ctx, n, model.means.rows(), model.means.cols());
  if (model.means.minCoeff() < 0.0 || model.means.maxCoeff() > 1.0)
    throw ValidationError("collect_dataset: tabular means must lie in [0, 1]");
  return collect(logging, ctx, n, rng,
                 [&](Eigen::Index x, Eigen::Index a) { return rng.bernoulli(model.means(x, a)) ? 1.0 : 0.0; });
}

LoggedDataset collect_dataset(const LinearRewardModel& model, const ContextualPolicy& logging,
                              const ContextDistribution& ctx, std::size_t n, Rng& rng) {
  check_collect(logging, ctx, n, Eigen::Index(model.theta.size()), model.features.actions());
  const Matrix& a = model.features.matrix();
  return collect(logging, ctx, n, rng, [&](Eigen::Index x, Eigen::Index act) {
    double r = a.col(act).dot(model.theta[std::size_t(x)]) + model.noise_sd * rng.normal();
    if (model.clip) r = std::clamp(r, 0.0, 1.0);
    return r;
  });
}

double policy_value(const TabularRewardModel& model, const ContextualPolicy& pi, const ContextDistribution& ctx) {
  double v = 0.0;
  for (Eigen::Index x = 0; x < ctx.size(); ++x) v += ctx[x] * model.means.row(x).dot(pi[x].probs());
  return v;
}

double policy_value(const LinearRewardModel& model, const ContextualPolicy& pi, const ContextDistribution& ctx) {
  double v = 0.0;
  for (Eigen::Index x = 0; x < ctx.size(); ++x)
    v += ctx[x] * (model.features.matrix().transpose() * model.theta[std::size_t(x)]).dot(pi[x].probs());
  return v;
}

double ips_value(const LoggedDataset& data, const ContextualPolicy& target) {
  if (data.records.empty()) throw ValidationError("ips_value: empty dataset");
  double total = 0.0;
  for (const auto& r : data.records) {
    if (!(r.logging_prob > 0.0)) throw ValidationError("ips_value: record with zero logging probability");
    total += target.prob(r.context, r.action) / r.logging_prob * r.reward;
  }
  return total / double(data.records.size());
}

Matrix pseudo_inverse_symmetric(const Matrix& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalFailure("pseudo_inverse: eigendecomposition failed");
  Vector inv = eig.eigenvalues();
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) < floor ? 0.0 : 1.0 / inv(i);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

double pi_weight(const Vector& target_row, const Matrix& g_pinv, const FeatureMatrix& features,
                 Eigen::Index action) {
  const Matrix& a = features.matrix();
  return (a * target_row).dot(g_pinv * a.col(action));
}

double pi_value(const LoggedDataset& data, const ContextualPolicy& target, const FeatureMatrix& features) {
  if (data.records.empty()) throw ValidationError("pi_value: empty dataset");
  if (!data.logging) throw ValidationError("pi_value: dataset carries no logging policy");
  const ContextualPolicy& logging = *data.logging;
  const Matrix& a = features.matrix();
  std::vector<Matrix> pinv;
  for (Eigen::Index x = 0; x < logging.contexts(); ++x)
    pinv.push_back(pseudo_inverse_symmetric(a * logging[x].probs().asDiagonal() * a.transpose()));
  double total = 0.0;
  for (const auto& r : data.records)
    total += r.reward * pi_weight(target[r.context].probs(), pinv[std::size_t(r.context)], features, r.action);
  return total / double(data.records.size());
}

ContextualPolicy contextual_safe_design_tabular(const ContextualPolicy& pi0, double alpha,
                                                const std::vector<RewardBox>& boxes,
                                                const ContextDistribution& ctx, bool side_info) {
  check_alpha(alpha);
  const Eigen::Index nx = pi0.contexts(), k = pi0.actions();
  if (ctx.size() != nx) throw ValidationError("contextual design: context count mismatch");
  if (!side_info) {
    std::vector<Policy> rows;
    for (Eigen::Index x = 0; x < nx; ++x) rows.push_back(water_fill(pi0[x], alpha));
    return ContextualPolicy(std::move(rows));
  }
  if (Eigen::Index(boxes.size()) != nx) throw ValidationError("contextual design: one box per context");
  for (const auto& b : boxes)
    if (b.size() != k) throw ValidationError("contextual design: box size != K");

  // Variables: π (X·K), z (X·K), γ.
  const Eigen::Index m = nx * k;
  const Eigen::Index n = 2 * m + 1;
  const Eigen::Index gamma = 2 * m;
  LinearProgram lp;
  lp.objective = Vector::Zero(n);
  lp.objective(gamma) = -1.0;
  lp.lower = Vector::Zero(n);
  lp.lower.tail(m + 1).setConstant(-std::numeric_limits<double>::infinity());
  lp.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());

  Vector weighted_z = Vector::Zero(n);
  for (Eigen::Index x = 0; x < nx; ++x) {
    Vector sum = Vector::Zero(n);
    sum.segment(x * k, k).setOnes();
    lp.add_equality(std::move(sum), 1.0);
    weighted_z.segment(m + x * k, k).setConstant(ctx[x]);
  }
  lp.add_inequality(std::move(weighted_z), 0.0);

  for (Eigen::Index x = 0; x < nx; ++x) {
    const RewardBox& box = boxes[std::size_t(x)];
    for (Eigen::Index a = 0; a < k; ++a) {
      const Eigen::Index i = x * k + a;
      Vector floor = Vector::Zero(n);
      floor(i) = 1.0;
      floor(gamma) = -1.0;
      lp.add_inequality(std::move(floor), 0.0);
      for (const double bound : {box.lower(a), box.upper(a)}) {
        Vector row = Vector::Zero(n);
        row(i) = bound;
        row(m + i) = -1.0;
        lp.add_inequality(std::move(row), alpha * pi0.prob(x, a) * bound);
      }
    }
  }

  const LpSolution sol = solve_lp(lp);
  if (!sol.optimal()) throw NumericalFailure("contextual design: LP did not reach an optimum");
  std::vector<Policy> rows;
  for (Eigen::Index x = 0; x < nx; ++x) rows.push_back(Policy::renormalized(sol.point.segment(x * k, k)));
  return ContextualPolicy(std::move(rows));
}

ContextualPolicy contextual_safe_design_linear(const ContextualPolicy& pi0, double alpha,
                                               const FeatureMatrix& features,
                                               const std::vector<Ellipsoid>& theta_sets,
                                               const ContextDistribution& ctx, const FwOptions& opts) {
  const JointDesignProblem prob{features, pi0.rows(), ctx.weights(), theta_sets, alpha};
  return ContextualPolicy(frank_wolfe_joint(prob, opts).policies);
}

double ips_error_bound(double g, std::size_t n_contexts, std::size_t k, std::size_t n, double delta) {
  if (n == 0 || !(delta > 0.0 && delta < 1.0)) throw ValidationError("ips_error_bound: need n >= 1, delta in (0,1)");
  const double x = double(n_contexts);
  return 7.0 * g * std::sqrt(x * std::log(4.0 * double(k) * x * double(n) / delta) / (2.0 * double(n)));
}

double pi_error_bound(double g, std::size_t d, std::size_t n_contexts, std::size_t n, double delta,
                      double lambda_star) {
  if (n == 0 || !(delta > 0.0 && delta < 1.0) || !(lambda_star > 0.0))
    throw ValidationError("pi_error_bound: need n >= 1, delta in (0,1), lambda_star > 0");
  const double clamp = std::min(1.0, std::sqrt(lambda_star));
  return 3.0 * g * std::sqrt(double(d) * double(n_contexts) * std::log(double(n) / (delta * clamp)) / double(n));
}

void write_dataset_csv(std::ostream& out, const LoggedDataset& data) {
  out << "context,action,reward,logging_prob\n";
  char buf[128];
  for (const auto& r : data.records) {
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g\n", long(r.context), long(r.action), r.reward,
                  r.logging_prob);
    out << buf;
  }
}

LoggedDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("dataset csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "context,action,reward,logging_prob") throw ValidationError("dataset csv: unexpected header");
  LoggedDataset data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string f[4];
    for (auto& s : f)
      if (!std::getline(fields, s, ',')) throw ValidationError("dataset csv: short row at line " + std::to_string(lineno));
    try {
      LoggedRecord r{};
      r.context = std::stol(f[0]);
      r.action = std::stol(f[1]);
      r.reward = std::stod(f[2]);
      r.logging_prob = std::stod(f[3]);
      if (r.context < 0 || r.action < 0 || !(r.logging_prob > 0.0 && r.logging_prob <= 1.0))
        throw ValidationError("");
      data.records.push_back(r);
    } catch (const std::exception&) {
      throw ValidationError("dataset csv: bad row at line " + std::to_string(lineno));
    }
  }
  return data;
}

}  // namespace safelog
