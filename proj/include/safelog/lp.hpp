#pragma once

#include <vector>

#include "safelog/numerics.hpp"

namespace safelog {

/// Absolute tolerance for "constraint satisfied", shared by every LP caller.
inline constexpr double kFeasibilityTol = 1e-7;

/// Hard cap on simplex pivots across both phases.
inline constexpr int kMaxPivots = 100000;

struct LinearConstraint {
  Vector row;
  double rhs = 0.0;
};

/// minimize cᵀx subject to
///   row·x = rhs   for each equality,
///   row·x ≥ rhs   for each inequality,
///   lower ≤ x ≤ upper (empty vectors mean 0 and +∞; ±∞ entries allowed).
struct LinearProgram {
  Vector objective;
  std::vector<LinearConstraint> equalities;
  std::vector<LinearConstraint> inequalities;
  Vector lower;
  Vector upper;

  Eigen::Index num_vars() const { return objective.size(); }
  void add_equality(Vector row, double rhs) { equalities.push_back({std::move(row), rhs}); }
  void add_inequality(Vector row, double rhs) { inequalities.push_back({std::move(row), rhs}); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector point;
  double value = 0.0;

  bool optimal() const { return status == LpStatus::Optimal; }
};

/// Two-phase dense simplex; Dantzig pricing with Bland's rule as the
/// anti-cycling fallback on degenerate stretches. A program whose phase 1 closes
/// only to within kFeasibilityTol and whose recovered point then fails the
/// feasibility check is reported Infeasible. Throws NumericalFailure when the
/// pivot cap is reached or an otherwise clean "optimal" point fails the check.
LpSolution solve_lp(const LinearProgram& program);

/// Largest absolute constraint violation of `x` (bounds included).
double max_violation(const LinearProgram& program, const Vector& x);

}  // namespace safelog
