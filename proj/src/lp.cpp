#include "safelog/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace safelog {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-10;
constexpr double kReducedCostTol = 1e-10;
constexpr int kDegenerateStreak = 50;
constexpr double kDegenerateStep = 1e-11;
constexpr double kHarrisTol = 1e-9;

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// x_j = offset_j + Σ coeff · y_k over the standard-form variables y ≥ 0.
struct VariableMap {
  double offset = 0.0;
  Eigen::Index first = 0;  // index of y_k
  double coeff = 1.0;      // +1 (shifted) or -1 (reflected)
  bool split = false;      // free variable: x = y_k − y_{k+1}
};

struct StandardForm {
  RowMajorMatrix a;  // m x n, n counts structural + slack columns
  Vector b;
  Vector cost;
  double cost_offset = 0.0;
  std::vector<VariableMap> vars;
  std::vector<Eigen::Index> slack_basis;  // per row: slack usable as initial basis, or -1
};

StandardForm to_standard_form(const LinearProgram& p) {
  const Eigen::Index n = p.num_vars();
  const Vector lower = p.lower.size() == n ? p.lower : Vector::Zero(n);
  const Vector upper = p.upper.size() == n ? p.upper : Vector::Constant(n, kInf);

  StandardForm sf;
  sf.vars.resize(static_cast<std::size_t>(n));
  Eigen::Index ny = 0;
  std::vector<std::pair<Eigen::Index, double>> upper_rows;  // (y index, bound)
  for (Eigen::Index j = 0; j < n; ++j) {
    auto& v = sf.vars[static_cast<std::size_t>(j)];
    const double l = lower(j), u = upper(j);
    if (std::isfinite(l)) {
      v = {l, ny++, 1.0, false};
      if (std::isfinite(u)) upper_rows.emplace_back(v.first, u - l);
    } else if (std::isfinite(u)) {
      v = {u, ny++, -1.0, false};
    } else {
      v = {0.0, ny, 1.0, true};
      ny += 2;
    }
  }

  const auto ne = static_cast<Eigen::Index>(p.equalities.size());
  const auto ni = static_cast<Eigen::Index>(p.inequalities.size());
  const auto nu = static_cast<Eigen::Index>(upper_rows.size());
  const Eigen::Index m = ne + ni + nu;
  const Eigen::Index ncols = ny + ni + nu;
  sf.a = RowMajorMatrix::Zero(m, ncols);
  sf.b = Vector::Zero(m);
  sf.slack_basis.assign(static_cast<std::size_t>(m), -1);

  auto map_row = [&](Eigen::Index r, const Vector& row, double rhs) {
    double shift = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = row(j);
      if (c == 0.0) continue;
      const auto& v = sf.vars[static_cast<std::size_t>(j)];
      shift += c * v.offset;
      sf.a(r, v.first) += c * v.coeff;
      if (v.split) sf.a(r, v.first + 1) -= c;
    }
    sf.b(r) = rhs - shift;
  };

  Eigen::Index r = 0;
  for (const auto& c : p.equalities) map_row(r++, c.row, c.rhs);
  for (Eigen::Index i = 0; i < ni; ++i, ++r) {
    map_row(r, p.inequalities[static_cast<std::size_t>(i)].row,
            p.inequalities[static_cast<std::size_t>(i)].rhs);
    sf.a(r, ny + i) = -1.0;  // surplus
  }
  for (Eigen::Index i = 0; i < nu; ++i, ++r) {
    const auto& [k, bound] = upper_rows[static_cast<std::size_t>(i)];
    sf.a(r, k) = 1.0;
    sf.a(r, ny + ni + i) = 1.0;
    sf.b(r) = bound;
  }

  for (Eigen::Index i = 0; i < m; ++i) {
    if (sf.b(i) < 0.0) {
      sf.a.row(i) *= -1.0;
      sf.b(i) = -sf.b(i);
    }
    for (Eigen::Index s = ny; s < ncols; ++s) {
      if (sf.a(i, s) == 1.0) {
        sf.slack_basis[static_cast<std::size_t>(i)] = s;
        break;
      }
    }
  }

  sf.cost = Vector::Zero(ncols);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& v = sf.vars[static_cast<std::size_t>(j)];
    const double c = p.objective(j);
    sf.cost_offset += c * v.offset;
    sf.cost(v.first) += c * v.coeff;
    if (v.split) sf.cost(v.first + 1) -= c;
  }
  return sf;
}

// Tableau with the objective (reduced-cost) row stored last.
class Tableau {
 public:
  Tableau(RowMajorMatrix t, std::vector<Eigen::Index> basis)
      : t_(std::move(t)), basis_(std::move(basis)) {}

  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  const std::vector<Eigen::Index>& basis() const { return basis_; }
  double objective_value() const { return -t_(rows(), cols()); }
  double rhs(Eigen::Index i) const { return t_(i, cols()); }
  double at(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }

  void set_costs(const Vector& cost) {
    t_.row(rows()).setZero();
    t_.row(rows()).head(cols()) = cost.transpose();
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double cb = cost(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(rows()) -= cb * t_.row(i);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index c) {
    t_.row(r) /= t_(r, c);
    for (Eigen::Index i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  void drop_row(Eigen::Index r) {
    RowMajorMatrix next(t_.rows() - 1, t_.cols());
    next.topRows(r) = t_.topRows(r);
    next.bottomRows(t_.rows() - 1 - r) = t_.bottomRows(t_.rows() - 1 - r);
    t_ = std::move(next);
    basis_.erase(basis_.begin() + r);
  }

  enum class Outcome { Optimal, Unbounded };

  /// Dantzig pricing (most negative reduced cost, lowest index on ties).
  /// After kDegenerateStreak pivots without objective progress, Bland's rule
  /// (lowest eligible index) takes over until progress resumes, which rules
  /// out cycling.
  Outcome run(Eigen::Index eligible_cols, int& pivots, double stop_below = -kInf) {
    int degenerate = 0;
    for (;;) {
      if (objective_value() <= stop_below) return Outcome::Optimal;
      const bool bland = degenerate >= kDegenerateStreak;
      Eigen::Index enter = -1;
      double most = -kReducedCostTol;
      for (Eigen::Index j = 0; j < eligible_cols; ++j) {
        const double rc = t_(rows(), j);
        if (rc < most) {
          enter = j;
          if (bland) break;
          most = rc;
        }
      }
      if (enter < 0) return Outcome::Optimal;

      const Eigen::Index leave = bland ? bland_leave(enter) : harris_leave(enter);
      if (leave < 0) return Outcome::Unbounded;
      if (++pivots > kMaxPivots)
        throw NumericalFailure("solve_lp: pivot cap of " + std::to_string(kMaxPivots) + " reached");
      const double step = std::max(rhs(leave), 0.0) / t_(leave, enter);
      degenerate = step <= kDegenerateStep ? degenerate + 1 : 0;
      pivot(leave, enter);
    }
  }

 private:
  /// Minimum ratio, lowest basic index on ties.
  Eigen::Index bland_leave(Eigen::Index enter) const {
    Eigen::Index leave = -1;
    double best = kInf;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double coef = t_(i, enter);
      if (coef <= kPivotTol) continue;
      const double ratio = std::max(rhs(i), 0.0) / coef;
      const double tie = 1e-12 * (1.0 + std::abs(best));
      if (leave < 0 || ratio < best - tie ||
          (ratio <= best + tie && basis_[std::size_t(i)] < basis_[std::size_t(leave)])) {
        if (leave < 0 || ratio < best - tie) best = ratio;
        leave = i;
      }
    }
    return leave;
  }

  /// Harris two-pass test: bound the step with rhs relaxed by kHarrisTol,
  /// then take the largest pivot entry among rows within that bound.
  Eigen::Index harris_leave(Eigen::Index enter) const {
    double bound = kInf;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double coef = t_(i, enter);
      if (coef > kPivotTol) bound = std::min(bound, (std::max(rhs(i), 0.0) + kHarrisTol) / coef);
    }
    if (bound == kInf) return -1;
    Eigen::Index leave = -1;
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double coef = t_(i, enter);
      if (coef <= kPivotTol || std::max(rhs(i), 0.0) / coef > bound) continue;
      if (leave < 0 || coef > t_(leave, enter)) leave = i;
    }
    return leave;
  }

  RowMajorMatrix t_;
  std::vector<Eigen::Index> basis_;
};

Vector recover_point(const LinearProgram& p, const StandardForm& sf, const Vector& y) {
  Vector x(p.num_vars());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const auto& v = sf.vars[static_cast<std::size_t>(j)];
    x(j) = v.offset + v.coeff * y(v.first);
    if (v.split) x(j) -= y(v.first + 1);
  }
  return x;
}

}  // namespace

double max_violation(const LinearProgram& p, const Vector& x) {
  double worst = 0.0;
  for (const auto& c : p.equalities) worst = std::max(worst, std::abs(c.row.dot(x) - c.rhs));
  for (const auto& c : p.inequalities) worst = std::max(worst, c.rhs - c.row.dot(x));
  if (p.lower.size() == x.size())
    worst = std::max(worst, (p.lower - x).maxCoeff());
  else
    worst = std::max(worst, -x.minCoeff());
  if (p.upper.size() == x.size()) worst = std::max(worst, (x - p.upper).maxCoeff());
  return worst;
}

LpSolution solve_lp(const LinearProgram& p) {
  const Eigen::Index n = p.num_vars();
  if (n == 0) throw ValidationError("solve_lp: empty objective");
  if (!p.objective.allFinite()) throw ValidationError("solve_lp: non-finite objective");
  for (const auto* group : {&p.equalities, &p.inequalities})
    for (const auto& c : *group)
      if (c.row.size() != n || !c.row.allFinite() || !std::isfinite(c.rhs))
        throw ValidationError("solve_lp: malformed constraint row");
  if ((p.lower.size() != 0 && p.lower.size() != n) || (p.upper.size() != 0 && p.upper.size() != n))
    throw ValidationError("solve_lp: bound vectors must match the objective length");
  if (p.lower.size() == n && p.upper.size() == n && (p.lower.array() > p.upper.array()).any())
    return {LpStatus::Infeasible, Vector(), 0.0};

  const StandardForm sf = to_standard_form(p);
  const Eigen::Index m = sf.a.rows();
  const Eigen::Index ns = sf.a.cols();

  // Artificial columns for rows without a ready-made slack basis.
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  Eigen::Index nart = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (sf.slack_basis[static_cast<std::size_t>(i)] < 0) ++nart;
  const Eigen::Index ncols = ns + nart;
  RowMajorMatrix t = RowMajorMatrix::Zero(m + 1, ncols + 1);
  t.topLeftCorner(m, ns) = sf.a;
  t.topRightCorner(m, 1) = sf.b;
  Eigen::Index art = ns;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index s = sf.slack_basis[static_cast<std::size_t>(i)];
    if (s >= 0) {
      basis[static_cast<std::size_t>(i)] = s;
    } else {
      t(i, art) = 1.0;
      basis[static_cast<std::size_t>(i)] = art++;
    }
  }
  Tableau tab(std::move(t), std::move(basis));
  int pivots = 0;
  double phase1_residual = 0.0;

  if (nart > 0) {
    Vector phase1 = Vector::Zero(ncols);
    phase1.tail(nart).setOnes();
    tab.set_costs(phase1);
    // Phase 1 is bounded below by zero; noise-level residuals are zero.
    tab.run(ncols, pivots, kDegenerateStep);
    phase1_residual = tab.objective_value();
    if (phase1_residual > kFeasibilityTol) return {LpStatus::Infeasible, Vector(), 0.0};

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are linearly dependent and get dropped.
    for (Eigen::Index i = 0; i < tab.rows();) {
      if (tab.basis()[static_cast<std::size_t>(i)] < ns) {
        ++i;
        continue;
      }
      Eigen::Index col = -1;
      double largest = 1e-9;
      for (Eigen::Index j = 0; j < ns; ++j) {
        if (std::abs(tab.at(i, j)) > largest) {
          largest = std::abs(tab.at(i, j));
          col = j;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
        ++i;
      } else {
        tab.drop_row(i);
      }
    }
  }

  Vector cost = Vector::Zero(ncols);
  cost.head(ns) = sf.cost;
  tab.set_costs(cost);
  if (tab.run(ns, pivots) == Tableau::Outcome::Unbounded)
    return {LpStatus::Unbounded, Vector(), -kInf};

  // Recompute the basic solution from the original data to shed pivot drift.
  Vector y = Vector::Zero(ns);
  const Eigen::Index mb = tab.rows();
  if (mb > 0) {
    // Dropped rows are dependent, so solving the full system over the basic
    // columns in the least-squares sense is exact.
    Matrix basic(m, mb);
    for (Eigen::Index k = 0; k < mb; ++k) basic.col(k) = sf.a.col(tab.basis()[static_cast<std::size_t>(k)]);
    const Vector yb = basic.colPivHouseholderQr().solve(sf.b);
    for (Eigen::Index k = 0; k < mb; ++k) y(tab.basis()[static_cast<std::size_t>(k)]) = yb(k);
    // Fall back to the tableau values if the refinement is worse.
    Vector y_tab = Vector::Zero(ns);
    for (Eigen::Index k = 0; k < mb; ++k) y_tab(tab.basis()[static_cast<std::size_t>(k)]) = tab.rhs(k);
    const double res_ref = (sf.a * y - sf.b).cwiseAbs().maxCoeff() + std::max(0.0, -y.minCoeff());
    const double res_tab =
        (sf.a * y_tab - sf.b).cwiseAbs().maxCoeff() + std::max(0.0, -y_tab.minCoeff());
    if (!(res_ref <= res_tab)) y = y_tab;
    y = y.cwiseMax(0.0);
  }

  LpSolution sol;
  sol.status = LpStatus::Optimal;
  sol.point = recover_point(p, sf, y);
  sol.value = p.objective.dot(sol.point);
  const double viol = max_violation(p, sol.point);
  // Phase 1 only just closed: the program sits on the feasibility boundary
  // and the recovered vertex misses it, so call it infeasible.
  if (viol > kFeasibilityTol && phase1_residual > 1e-12) return {LpStatus::Infeasible, Vector(), 0.0};
  if (viol > kFeasibilityTol)
    throw NumericalFailure("solve_lp: optimal point violates constraints by " + std::to_string(viol));
  return sol;
}

}  // namespace safelog
