// Tabular safe optimal design: the mixture baseline, water-filling, and the
// LP design for box-shaped side information.
#pragma once

#include <variant>

#include "safelog/numerics.hpp"

namespace safelog {

inline constexpr double kPolicyNegativeTol = 1e-12;
inline constexpr double kPolicySumTol = 1e-9;

/// Probability vector over K actions. Construction clamps entries in
/// [-1e-12, 0) to zero and renormalizes sums within 1e-9 of one; anything
/// further off is a ValidationError.
class Policy {
 public:
  explicit Policy(Vector probs);

  static Policy uniform(Eigen::Index k);
  static Policy point_mass(Eigen::Index k, Eigen::Index action);
  /// For solver output: clamps negatives and rescales to sum one. Rejects a
  /// sum more than 1e-6 away from one.
  static Policy renormalized(Vector probs);

  const Vector& probs() const { return probs_; }
  Eigen::Index size() const { return probs_.size(); }
  double operator[](Eigen::Index a) const { return probs_(a); }

 private:
  Vector probs_;
};

/// Coordinate-wise interval [lower, upper] ⊆ [0, 1]^K for the mean rewards.
struct RewardBox {
  Vector lower;
  Vector upper;

  RewardBox(Vector lower_, Vector upper_);
  static RewardBox unit(Eigen::Index k);
  Eigen::Index size() const { return lower.size(); }
};

/// max_a 1/π(a); +∞ when some action has zero mass.
double g_tabular(const Policy& pi);

/// Smallest mixing weight β that keeps β·π0 + (1−β)/K safe without side
/// information. Zero for a uniform π0.
double beta_star(const Policy& pi0, double alpha);

/// β·π0 + (1−β)·1/K.
Policy mixture_policy(const Policy& pi0, double beta);

/// Peel (1−α) of the mass off π0 and pour it onto the lowest-probability
/// actions until the level is exhausted. Maximizes min_a π(a) subject to
/// π ≥ α·π0.
Policy water_fill(const Policy& pi0, double alpha);

/// min over r in the box of (π − α·π0)ᵀ r, evaluated coordinate-wise.
double box_safety_margin(const Policy& pi, const Policy& pi0, double alpha, const RewardBox& box);

struct BoxedDesign {
  Policy policy;
  double gamma;  // min_a policy(a)
};

/// Max-min design under box side information, solved as a single LP over
/// (π, z, γ) with z a coordinate-wise lower bound on the safety terms.
BoxedDesign safe_design_boxed(const Policy& pi0, double alpha, const RewardBox& box);

struct ProvablyOptimal {};
struct SuboptimalWitness {
  Policy policy;
};
using MixtureVerdict = std::variant<ProvablyOptimal, SuboptimalWitness>;

/// Whether the best mixture policy is already optimal. Otherwise returns the
/// water-filling policy, whose g is strictly smaller.
MixtureVerdict mixture_optimality_verdict(const Policy& pi0, double alpha);

void check_alpha(double alpha);

}  // namespace safelog
