#include "safelog/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "safelog/lp.hpp"

namespace safelog {

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
}

Policy::Policy(Vector probs) : probs_(std::move(probs)) {
  if (probs_.size() == 0) throw ValidationError("Policy: empty probability vector");
  if (!probs_.allFinite()) throw ValidationError("Policy: non-finite entry");
  if (probs_.minCoeff() < -kPolicyNegativeTol) throw ValidationError("Policy: negative entry");
  probs_ = probs_.cwiseMax(0.0);
  const double total = probs_.sum();
  if (std::abs(total - 1.0) > kPolicySumTol)
    throw ValidationError("Policy: entries sum to " + std::to_string(total));
  probs_ /= total;
}

Policy Policy::uniform(Eigen::Index k) { return Policy(Vector::Constant(k, 1.0 / double(k))); }

Policy Policy::point_mass(Eigen::Index k, Eigen::Index action) {
  Vector p = Vector::Zero(k);
  p(action) = 1.0;
  return Policy(std::move(p));
}

Policy Policy::renormalized(Vector probs) {
  if (probs.size() == 0 || !probs.allFinite()) throw ValidationError("Policy: bad solver output");
  probs = probs.cwiseMax(0.0);
  const double total = probs.sum();
  if (std::abs(total - 1.0) > 1e-6) throw NumericalFailure("Policy: solver output sums to " + std::to_string(total));
  return Policy(probs / total);
}

RewardBox::RewardBox(Vector lower_, Vector upper_) : lower(std::move(lower_)), upper(std::move(upper_)) {
  if (lower.size() != upper.size()) throw ValidationError("RewardBox: size mismatch");
  for (Eigen::Index a = 0; a < lower.size(); ++a)
    if (!(0.0 <= lower(a) && lower(a) <= upper(a) && upper(a) <= 1.0))
      throw ValidationError("RewardBox: need 0 <= L <= U <= 1");
}

RewardBox RewardBox::unit(Eigen::Index k) { return RewardBox(Vector::Zero(k), Vector::Ones(k)); }

double g_tabular(const Policy& pi) {
  const double low = pi.probs().minCoeff();
  return low > 0.0 ? 1.0 / low : std::numeric_limits<double>::infinity();
}

double beta_star(const Policy& pi0, double alpha) {
  check_alpha(alpha);
  const double inv = 1.0 / (double(pi0.size()) * pi0.probs().maxCoeff());
  const double denom = 1.0 - inv;
  if (denom <= 1e-15) return 0.0;
  return std::max((alpha - inv) / denom, 0.0);
}

Policy mixture_policy(const Policy& pi0, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("mixture_policy: beta must lie in [0, 1]");
  const double k = double(pi0.size());
  return Policy((beta * pi0.probs().array() + (1.0 - beta) / k).matrix());
}

Policy water_fill(const Policy& pi0, double alpha) {
  check_alpha(alpha);
  const Eigen::Index k = pi0.size();
  const Vector peeled = alpha * pi0.probs();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return peeled(a) < peeled(b); });

  // tail[i] = Σ of sorted peeled values from position i on.
  std::vector<double> tail(static_cast<std::size_t>(k) + 1, 0.0);
  for (Eigen::Index i = k - 1; i >= 0; --i)
    tail[std::size_t(i)] = tail[std::size_t(i) + 1] + peeled(order[std::size_t(i)]);

  Eigen::Index level_count = 1;
  for (Eigen::Index j = k; j >= 1; --j) {
    const double level_value = peeled(order[std::size_t(j - 1)]);
    if (double(j) * level_value + tail[std::size_t(j)] <= 1.0) {
      level_count = j;
      break;
    }
  }

  Vector out = peeled;
  const double level = (1.0 - tail[std::size_t(level_count)]) / double(level_count);
  for (Eigen::Index i = 0; i < level_count; ++i) out(order[std::size_t(i)]) = level;
  return Policy(std::move(out));
}

double box_safety_margin(const Policy& pi, const Policy& pi0, double alpha, const RewardBox& box) {
  check_alpha(alpha);
  if (pi.size() != pi0.size() || pi.size() != box.size())
    throw ValidationError("box_safety_margin: size mismatch");
  const Vector delta = pi.probs() - alpha * pi0.probs();
  return delta.cwiseProduct(box.lower).cwiseMin(delta.cwiseProduct(box.upper)).sum();
}

BoxedDesign safe_design_boxed(const Policy& pi0, double alpha, const RewardBox& box) {
  check_alpha(alpha);
  const Eigen::Index k = pi0.size();
  if (box.size() != k) throw ValidationError("safe_design_boxed: box size mismatch");

  // Variables: π (k), z (k), γ.
  const Eigen::Index n = 2 * k + 1;
  const Eigen::Index gamma = 2 * k;
  LinearProgram lp;
  lp.objective = Vector::Zero(n);
  lp.objective(gamma) = -1.0;
  lp.lower = Vector::Zero(n);
  lp.lower.tail(k + 1).setConstant(-std::numeric_limits<double>::infinity());
  lp.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());

  Vector sum_pi = Vector::Zero(n);
  sum_pi.head(k).setOnes();
  lp.add_equality(sum_pi, 1.0);

  Vector sum_z = Vector::Zero(n);
  sum_z.segment(k, k).setOnes();
  lp.add_inequality(sum_z, 0.0);

  for (Eigen::Index a = 0; a < k; ++a) {
    Vector floor = Vector::Zero(n);
    floor(a) = 1.0;
    floor(gamma) = -1.0;
    lp.add_inequality(floor, 0.0);

    for (const double bound : {box.lower(a), box.upper(a)}) {
      Vector row = Vector::Zero(n);
      row(a) = bound;
      row(k + a) = -1.0;
      lp.add_inequality(row, alpha * pi0[a] * bound);
    }
  }

  const LpSolution sol = solve_lp(lp);
  if (!sol.optimal()) throw NumericalFailure("safe_design_boxed: LP did not reach an optimum");
  Policy policy = Policy::renormalized(sol.point.head(k));
  return {policy, sol.point(gamma)};
}

MixtureVerdict mixture_optimality_verdict(const Policy& pi0, double alpha) {
  check_alpha(alpha);
  const Eigen::Index k = pi0.size();

  std::vector<double> values(pi0.probs().begin(), pi0.probs().end());
  std::sort(values.begin(), values.end());
  int distinct = 1;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] - values[i - 1] > 1e-12) ++distinct;

  const double threshold = 1.0 / (double(k) * pi0.probs().maxCoeff());
  if (distinct <= 2 || alpha <= threshold) return ProvablyOptimal{};

  Policy filled = water_fill(pi0, alpha);
  const double g_mix = g_tabular(mixture_policy(pi0, beta_star(pi0, alpha)));
  // Within round-off of the threshold the two designs coincide numerically.
  if (g_tabular(filled) < g_mix - 1e-9) return SuboptimalWitness{std::move(filled)};
  return ProvablyOptimal{};
}

}  // namespace safelog
