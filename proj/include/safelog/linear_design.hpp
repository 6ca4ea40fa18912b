// Linear safe optimal design: the G-optimal objective, its gradient, the
// ellipsoidal safety margin, and a Frank-Wolfe solver with cutting planes.
#pragma once

#include <optional>
#include <vector>

#include "safelog/numerics.hpp"
#include "safelog/tabular.hpp"

namespace safelog {

/// d×K matrix whose column i is the feature vector of action i.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix a);

  const Matrix& matrix() const { return a_; }
  Eigen::Index dim() const { return a_.rows(); }
  Eigen::Index actions() const { return a_.cols(); }

 private:
  Matrix a_;
};

struct DesignProblem {
  FeatureMatrix features;
  Policy pi0;
  double alpha;
  Ellipsoid theta_set;

  void validate() const;
};

struct FwOptions {
  int max_iters = 500;
  double ridge = 1e-9;
  double tol_rel = 1e-6;
  double cut_tolerance = 1e-7;
  int line_search_points = 64;
  /// Consecutive small-improvement iterations required to stop.
  int patience = 5;
};

inline constexpr int kMaxCutsPerSolve = 200;

struct IterateRecord {
  double g_value;
  double safety_margin;
  double step;
};

struct DesignResult {
  Policy policy;
  double g_value;
  double width;
  double safety_margin;
  int iterations = 0;
  int cuts_generated = 0;
  bool converged = false;
  std::vector<IterateRecord> trace;
};

/// max over columns a of aᵀ(G(π) + ridge·I)⁻¹a with G(π) = Σ π(a)·a·aᵀ.
double g_value(const Policy& pi, const FeatureMatrix& features, double ridge = 0.0);

/// H(i) = −(a_maxᵀ G⁻¹ a_i)², a_max the maximizing column (lowest index on ties).
Vector g_gradient(const Policy& pi, const FeatureMatrix& features, double ridge = 0.0);

/// argmax of vᵀθ over the ellipsoid; the center when ‖v‖ ≤ 1e-12.
Vector worst_case_theta(const Vector& v, const Ellipsoid& e);

/// min over θ in the set of (π − α·π0)ᵀAᵀθ, in closed form.
double safety_margin(const Policy& pi, const DesignProblem& prob);

/// (π − α·π0)ᵀAᵀθ̄: the margin at the center only.
double safety_margin_at_center(const Policy& pi, const DesignProblem& prob);

struct InnerSolution {
  Policy policy;
  /// Every cut in force at exit, as θ vectors.
  std::vector<Vector> cuts;
  int new_cuts = 0;
};

/// Minimizes gradientᵀπ over safe policies by cutting planes. Cuts passed in
/// are kept. A zero gradient returns `previous` when given.
InnerSolution solve_inner_lp(const Vector& gradient, const DesignProblem& prob, double cut_tolerance,
                             const std::optional<Policy>& previous = std::nullopt,
                             std::vector<Vector> cuts = {});

DesignResult frank_wolfe_safe(const DesignProblem& prob, const FwOptions& opts = {});

/// Unconstrained G-optimal design, started from the uniform policy.
DesignResult g_optimal(const FeatureMatrix& features, const FwOptions& opts = {});

/// Several contexts sharing one feature matrix. The safety constraint is the
/// context-weighted sum of per-context terms, each with its own ellipsoid;
/// the objective is the largest per-context g.
struct JointDesignProblem {
  FeatureMatrix features;
  std::vector<Policy> pi0;
  Vector weights;
  std::vector<Ellipsoid> theta_sets;
  double alpha;

  void validate() const;
  Eigen::Index contexts() const { return Eigen::Index(pi0.size()); }
};

struct JointDesignResult {
  std::vector<Policy> policies;
  double g_value;
  double width;
  double safety_margin;
  int iterations = 0;
  int cuts_generated = 0;
  bool converged = false;
  std::vector<IterateRecord> trace;
};

/// Σ_x C(x)·[Δ_xᵀAᵀθ̄_x − √(Δ_xᵀAᵀΣ̄_xAΔ_x)], Δ_x = π_x − α·π0_x.
double joint_safety_margin(const std::vector<Policy>& policies, const JointDesignProblem& prob);

JointDesignResult frank_wolfe_joint(const JointDesignProblem& prob, const FwOptions& opts = {});

}  // namespace safelog
