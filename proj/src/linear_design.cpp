#include "safelog/linear_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

#include "safelog/lp.hpp"

namespace safelog {

FeatureMatrix::FeatureMatrix(Matrix a) : a_(std::move(a)) {
  if (a_.rows() == 0 || a_.cols() == 0) throw ValidationError("FeatureMatrix: empty");
  if (!a_.allFinite()) throw ValidationError("FeatureMatrix: non-finite entry");
  for (Eigen::Index i = 0; i < a_.cols(); ++i)
    if (a_.col(i).norm() > 1.0 + 1e-9)
      throw ValidationError("FeatureMatrix: column " + std::to_string(i) + " has norm above 1");
}

void DesignProblem::validate() const {
  check_alpha(alpha);
  if (pi0.size() != features.actions()) throw ValidationError("DesignProblem: pi0 size != K");
  if (theta_set.dim() != features.dim()) throw ValidationError("DesignProblem: ellipsoid dimension != d");
}

void JointDesignProblem::validate() const {
  check_alpha(alpha);
  const std::size_t n = pi0.size();
  if (n == 0) throw ValidationError("JointDesignProblem: no contexts");
  if (theta_sets.size() != n || std::size_t(weights.size()) != n)
    throw ValidationError("JointDesignProblem: per-context sizes disagree");
  for (const auto& p : pi0)
    if (p.size() != features.actions()) throw ValidationError("JointDesignProblem: pi0 size != K");
  for (const auto& e : theta_sets)
    if (e.dim() != features.dim()) throw ValidationError("JointDesignProblem: ellipsoid dimension != d");
  if (!weights.allFinite() || weights.minCoeff() < 0.0 || std::abs(weights.sum() - 1.0) > 1e-9)
    throw ValidationError("JointDesignProblem: context weights must be a distribution");
}

namespace {

constexpr std::size_t kCutPoolLimit = 40;
// Cuts one Frank-Wolfe inner solve may add before the barrier takes over.
constexpr int kFwCutBudget = 25;
// Smoothing of the norm in the barrier's margin: ‖z‖ → √(‖z‖² + ε²).
constexpr double kNormSmoothing = 1e-12;

struct GEval {
  double value;
  Eigen::Index arg;
};

Matrix design_matrix(const Matrix& a, const Vector& p, double ridge) {
  Matrix g = a * p.asDiagonal() * a.transpose();
  g = (0.5 * (g + g.transpose())).eval();
  g.diagonal().array() += ridge;
  return g;
}

GEval evaluate_g(const Matrix& a, const Vector& p, double ridge, Matrix* factor = nullptr) {
  Matrix lower = cholesky(design_matrix(a, p, ridge));
  const Matrix m = lower.triangularView<Eigen::Lower>().solve(a);
  const Vector q = m.colwise().squaredNorm().transpose();
  GEval out{q(0), 0};
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > out.value) out = {q(i), i};
  if (factor) *factor = std::move(lower);
  return out;
}

Vector gradient_at(const Matrix& a, const Vector& p, double ridge) {
  Matrix lower;
  const GEval ev = evaluate_g(a, p, ridge, &lower);
  Vector u = lower.triangularView<Eigen::Lower>().solve(a.col(ev.arg));
  lower.transpose().triangularView<Eigen::Upper>().solveInPlace(u);
  return -(a.transpose() * u).array().square().matrix();
}

double margin_term(const Matrix& a, const Vector& delta, const Ellipsoid& e) {
  const Vector w = a * delta;
  return w.dot(e.center()) - std::sqrt(std::max(0.0, w.dot(e.shape() * w)));
}

/// Policies of all contexts stacked into one vector of length X·K.
class Engine {
 public:
  Engine(const JointDesignProblem& prob, bool constrained)
      : prob_(prob), a_(prob.features.matrix()), k_(a_.cols()), x_(prob.contexts()),
        constrained_(constrained) {
    pi0_.resize(x_ * k_);
    for (Eigen::Index c = 0; c < x_; ++c) {
      pi0_.segment(c * k_, k_) = prob.pi0[std::size_t(c)].probs();
      const Ellipsoid& e = prob.theta_sets[std::size_t(c)];
      centers_.push_back(a_.transpose() * e.center());
      spreads_.push_back(e.factor().transpose() * a_);
    }
  }

  Eigen::Index size() const { return x_ * k_; }
  const Vector& pi0() const { return pi0_; }

  double g(const Vector& p, double ridge, Eigen::Index* ctx = nullptr) const {
    double best = -1.0;
    for (Eigen::Index c = 0; c < x_; ++c) {
      const double v = evaluate_g(a_, p.segment(c * k_, k_), ridge).value;
      if (v > best) {
        best = v;
        if (ctx) *ctx = c;
      }
    }
    return best;
  }

  Vector gradient(const Vector& p, double ridge) const {
    Eigen::Index ctx = 0;
    g(p, ridge, &ctx);
    Vector h = Vector::Zero(size());
    h.segment(ctx * k_, k_) = gradient_at(a_, p.segment(ctx * k_, k_), ridge);
    return h;
  }

  double margin(const Vector& p) const {
    double total = 0.0;
    for (Eigen::Index c = 0; c < x_; ++c)
      total += prob_.weights(c) * margin_term(a_, delta(p, c), prob_.theta_sets[std::size_t(c)]);
    return total;
  }

  /// Per-context minimizing θ, stacked (length X·d).
  Vector worst_thetas(const Vector& p) const {
    const Eigen::Index d = a_.rows();
    Vector out(x_ * d);
    for (Eigen::Index c = 0; c < x_; ++c)
      out.segment(c * d, d) = worst_case_theta(-(a_ * delta(p, c)), prob_.theta_sets[std::size_t(c)]);
    return out;
  }

  /// Cut (row, rhs) meaning row·π ≥ rhs for a stacked θ.
  LinearConstraint cut_row(const Vector& thetas) const {
    const Eigen::Index d = a_.rows();
    LinearConstraint c{Vector(size()), 0.0};
    for (Eigen::Index x = 0; x < x_; ++x) {
      const Vector r = prob_.weights(x) * (a_.transpose() * thetas.segment(x * d, d));
      c.row.segment(x * k_, k_) = r;
      c.rhs += prob_.alpha * r.dot(pi0_.segment(x * k_, k_));
    }
    return c;
  }

  /// Linear program over the stacked policy plus `extra` trailing variables.
  LinearProgram simplex_lp(Eigen::Index extra) const {
    const Eigen::Index n = size() + extra;
    LinearProgram lp;
    lp.objective = Vector::Zero(n);
    lp.lower = Vector::Zero(n);
    lp.lower.tail(extra).setConstant(-std::numeric_limits<double>::infinity());
    lp.upper = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 0; c < x_; ++c) {
      Vector row = Vector::Zero(n);
      row.segment(c * k_, k_).setOnes();
      lp.add_equality(std::move(row), 1.0);
    }
    return lp;
  }

  Vector normalize(const Vector& p) const {
    Vector out(size());
    for (Eigen::Index c = 0; c < x_; ++c)
      out.segment(c * k_, k_) = Policy::renormalized(p.segment(c * k_, k_)).probs();
    return out;
  }

  static bool known(const std::vector<Vector>& cuts, const Vector& theta) {
    for (const auto& c : cuts)
      if ((c - theta).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + theta.cwiseAbs().maxCoeff())) return true;
    return false;
  }

  struct Inner {
    Vector point;
    int new_cuts = 0;
    bool exact = true;
  };

  /// Margin with the norm smoothed, which only makes it smaller; optionally
  /// its gradient and Hessian.
  double smooth_margin(const Vector& p, Vector* grad = nullptr, Matrix* hess = nullptr) const {
    double total = 0.0;
    if (grad) *grad = Vector::Zero(size());
    if (hess) *hess = Matrix::Zero(size(), size());
    for (Eigen::Index c = 0; c < x_; ++c) {
      const double w = prob_.weights(c);
      const Vector dl = delta(p, c);
      const Matrix& m = spreads_[std::size_t(c)];
      const Vector z = m * dl;
      const double nz = std::sqrt(z.squaredNorm() + kNormSmoothing * kNormSmoothing);
      total += w * (centers_[std::size_t(c)].dot(dl) - nz);
      if (grad) grad->segment(c * k_, k_) = w * (centers_[std::size_t(c)] - m.transpose() * z / nz);
      if (hess) {
        const Vector mz = m.transpose() * z;
        hess->block(c * k_, c * k_, k_, k_) = -w * (m.transpose() * m / nz - mz * mz.transpose() / (nz * nz * nz));
      }
    }
    return total;
  }

  /// A point with every entry and the smoothed margin strictly positive,
  /// built from `best`, the safest policy known. Nothing if the safe set
  /// looks empty inside.
  std::optional<Vector> interior(const Vector& best) const {
    const double top = smooth_margin(best);
    if (!(top > 1e-9)) return std::nullopt;
    Vector u(size());
    for (Eigen::Index c = 0; c < x_; ++c) u.segment(c * k_, k_).setConstant(1.0 / double(k_));
    for (double kappa = 0.5; kappa > 1e-9; kappa *= 0.5) {
      const Vector z = (1 - kappa) * best + kappa * u;
      if (smooth_margin(z) > 0.25 * top) return z;
    }
    return std::nullopt;
  }

  /// Log-barrier interior-point solve of min fᵀx over x = (policy, extras)
  /// with per-context simplex sums, rows·x > rhs, policy > 0 and the
  /// smoothed margin > 0, started from the strictly feasible x.
  std::optional<Vector> barrier(const Vector& f, const Matrix& rows, const Vector& rhs, Vector x) const {
    const Eigen::Index n = x.size(), s = size(), e = x_;
    auto slack = [&](const Vector& y) { return Vector(rows * y - rhs); };
    auto inside = [&](const Vector& y) {
      return y.head(s).minCoeff() > 0.0 && (rows.rows() == 0 || slack(y).minCoeff() > 0.0) &&
             smooth_margin(y.head(s)) > 0.0;
    };
    if (!inside(x)) return std::nullopt;
    auto phi = [&](const Vector& y, double t) {
      double v = t * f.dot(y) - y.head(s).array().log().sum() - std::log(smooth_margin(y.head(s)));
      if (rows.rows()) v -= slack(y).array().log().sum();
      return v;
    };
    const double terms = double(s + rows.rows() + 1);
    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    Matrix kkt = Matrix::Zero(n + e, n + e);
    for (Eigen::Index c = 0; c < x_; ++c) {
      kkt.block(n + c, c * k_, 1, k_).setOnes();
      kkt.block(c * k_, n + c, k_, 1).setOnes();
    }
    for (double t = 1.0 / scale; terms / t > 1e-10 * scale; t *= 10.0) {
      for (int it = 0; it < 100; ++it) {
        Vector grad = t * f;
        Matrix hess = Matrix::Zero(n, n);
        const Vector inv = x.head(s).cwiseInverse();
        grad.head(s) -= inv;
        hess.diagonal().head(s) += inv.cwiseAbs2();
        if (rows.rows()) {
          const Vector r = slack(x).cwiseInverse();
          grad -= rows.transpose() * r;
          hess += rows.transpose() * r.cwiseAbs2().asDiagonal() * rows;
        }
        Vector gc;
        Matrix hc;
        const double c = smooth_margin(x.head(s), &gc, &hc);
        grad.head(s) -= gc / c;
        hess.topLeftCorner(s, s) += gc * gc.transpose() / (c * c) - hc / c;
        kkt.topLeftCorner(n, n) = hess;
        Vector b = Vector::Zero(n + e);
        b.head(n) = -grad;
        const Vector dx = kkt.partialPivLu().solve(b).head(n);
        const double dec = -grad.dot(dx);
        if (!dx.allFinite()) return std::nullopt;
        if (dec < 1e-10) break;
        double step = 1.0;
        const double f0 = phi(x, t);
        while (step > 1e-14 && (!inside(x + step * dx) || phi(x + step * dx, t) > f0 - 0.25 * step * dec))
          step *= 0.5;
        if (step <= 1e-14) break;
        x += step * dx;
      }
    }
    x.head(s) = normalize(x.head(s));
    return x;
  }

  /// Solves `lp` (stacked policy plus `extra` trailing variables), adding the
  /// most violated safety cut until the policy part is safe within `tol`.
  ///
  /// With an anchor (a safe point, the current iterate) the loop stops after
  /// kFwCutBudget cuts, or when the LP loses accuracy or feasibility, and
  /// hands over to the log barrier started between the anchor and `inside`.
  /// Without an interior point it returns where the segment from the anchor
  /// to the last LP point leaves the safe set: safe but inexact.
  Inner cutting_loop(LinearProgram lp, Eigen::Index extra, double tol, std::vector<Vector>& cuts,
                     const Vector* anchor = nullptr, const Vector* inside = nullptr) const {
    const double level = anchor ? std::min(0.0, margin(*anchor)) : 0.0;
    const std::size_t base = lp.inequalities.size();
    auto add = [&](const Vector& theta) {
      LinearConstraint c = cut_row(theta);
      c.row.conservativeResize(size() + extra);
      c.row.tail(extra).setZero();
      lp.inequalities.push_back(std::move(c));
    };
    for (const auto& t : cuts) add(t);
    Inner out;
    bool have = false;
    auto give_up = [&] {
      out.exact = false;
      if (inside) {
        Matrix rows(static_cast<Eigen::Index>(base), size() + extra);
        Vector rhs(static_cast<Eigen::Index>(base));
        for (std::size_t i = 0; i < base; ++i) {
          rows.row(Eigen::Index(i)) = lp.inequalities[i].row.transpose();
          rhs(Eigen::Index(i)) = lp.inequalities[i].rhs;
        }
        for (const double w : {0.5, 0.1}) {
          Vector x(size() + extra);
          x.head(size()) = (1 - w) * *inside + w * *anchor;
          if (extra) {
            // Trailing variables only appear with positive unit weight.
            const double need = (rhs - rows.leftCols(size()) * x.head(size())).maxCoeff();
            x.tail(extra).setConstant(need + 1.0 + std::abs(need));
          }
          if (auto sol = barrier(lp.objective, rows, rhs, x)) {
            out.point = sol->head(size());
            return out;
          }
        }
      }
      out.point = have ? boundary(*anchor, out.point, level) : *anchor;
      return out;
    };
    const int cap = anchor ? kFwCutBudget : kMaxCutsPerSolve;
    for (;;) {
      LpSolution sol;
      try {
        sol = solve_lp(lp);
      } catch (const NumericalFailure&) {
        if (!anchor) throw;
        return give_up();
      }
      if (!sol.optimal()) {
        if (anchor) return give_up();
        throw InfeasibleProblem("solve_inner_lp: no policy satisfies the cuts");
      }
      out.point = normalize(sol.point.head(size()));
      have = true;
      if (!constrained_ || margin(out.point) >= -tol) return out;
      const Vector theta = worst_thetas(out.point);
      // The LP already honours a known cut up to its own tolerance.
      if (known(cuts, theta)) return anchor ? give_up() : out;
      if (out.new_cuts == cap) {
        if (anchor) return give_up();
        throw CutLimitExceeded("solve_inner_lp: more than " + std::to_string(kMaxCutsPerSolve) + " cuts");
      }
      cuts.push_back(theta);
      add(theta);
      ++out.new_cuts;
    }
  }

  /// Largest step from `from` toward `to` keeping the margin at least `level`.
  Vector boundary(const Vector& from, const Vector& to, double level) const {
    if (margin(to) >= level) return to;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (margin(from + mid * (to - from)) >= level ? lo : hi) = mid;
    }
    return normalize(from + lo * (to - from));
  }

  Inner inner(const Vector& gradient, double tol, std::vector<Vector>& cuts, const Vector* anchor = nullptr,
              const Vector* inside = nullptr) const {
    if (!constrained_) {
      Inner out{Vector::Zero(size()), 0};
      for (Eigen::Index c = 0; c < x_; ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < k_; ++i)
          if (gradient(c * k_ + i) < gradient(c * k_ + best)) best = i;
        out.point(c * k_ + best) = 1.0;
      }
      return out;
    }
    LinearProgram lp = simplex_lp(0);
    lp.objective = gradient;
    return cutting_loop(std::move(lp), 0, tol, cuts, anchor, inside);
  }

  /// Minimizes the largest first-order model g_a(p) + ∇g_a(p)ᵀ(q − p) over
  /// every column term a of every context.
  Inner minimax(const Vector& p, double ridge, double tol, std::vector<Vector>& cuts,
                const Vector* inside = nullptr) const {
    const Eigen::Index s = size();
    LinearProgram lp = simplex_lp(1);
    lp.objective(s) = 1.0;
    for (Eigen::Index c = 0; c < x_; ++c) {
      const Vector pc = p.segment(c * k_, k_);
      const Matrix lower = cholesky(design_matrix(a_, pc, ridge));
      const Matrix m = lower.triangularView<Eigen::Lower>().solve(a_);
      const Matrix cross = m.transpose() * m;  // AᵀG⁻¹A
      for (Eigen::Index a = 0; a < k_; ++a) {
        const Vector h = -cross.row(a).transpose().array().square().matrix();
        Vector row = Vector::Zero(s + 1);
        row.segment(c * k_, k_) = -h;
        row(s) = 1.0;
        lp.add_inequality(std::move(row), cross(a, a) - h.dot(pc));
      }
    }
    return cutting_loop(std::move(lp), 1, tol, cuts, constrained_ ? &p : nullptr, inside);
  }

  /// Keeps the carried pool at kCutPoolLimit by dropping the cuts with the
  /// most slack at `p`. Every cut stays valid, so a dropped one that matters
  /// again is simply rediscovered.
  void prune(const Vector& p, std::vector<Vector>& cuts) const {
    if (cuts.size() <= kCutPoolLimit) return;
    std::vector<std::pair<double, std::size_t>> slack;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      const LinearConstraint c = cut_row(cuts[i]);
      slack.emplace_back(c.row.dot(p) - c.rhs, i);
    }
    std::stable_sort(slack.begin(), slack.end());
    std::vector<Vector> kept;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < kCutPoolLimit; ++i) keep.push_back(slack[i].second);
    std::sort(keep.begin(), keep.end());
    for (const std::size_t i : keep) kept.push_back(std::move(cuts[i]));
    cuts = std::move(kept);
  }

  /// Maximizes the margin by cutting planes; returns the maximizer.
  Vector restore(double tol, std::vector<Vector>& cuts, int& generated) const {
    const Eigen::Index t = size();
    LinearProgram lp = simplex_lp(1);
    lp.objective(t) = -1.0;
    auto add = [&](const Vector& theta) {
      LinearConstraint c = cut_row(theta);
      c.row.conservativeResize(t + 1);
      c.row(t) = -1.0;
      lp.inequalities.push_back(std::move(c));
    };
    if (!known(cuts, worst_thetas(pi0_))) cuts.push_back(worst_thetas(pi0_));
    for (const auto& theta : cuts) add(theta);
    for (int added = 0;; ++added) {
      const LpSolution sol = solve_lp(lp);
      if (!sol.optimal()) throw NumericalFailure("restoration LP failed");
      const double bound = sol.point(t);
      if (bound < -1e-6) throw InfeasibleStart("no policy satisfies the safety constraint");
      const Vector p = normalize(sol.point.head(t));
      const double m = margin(p);
      const Vector theta = worst_thetas(p);
      if (m >= bound - tol || known(cuts, theta)) {
        if (m < -1e-6) throw InfeasibleStart("no policy satisfies the safety constraint");
        return p;
      }
      if (added == kMaxCutsPerSolve) throw CutLimitExceeded("restoration: cut limit reached");
      cuts.push_back(theta);
      add(theta);
      ++generated;
    }
  }

 private:
  Vector delta(const Vector& p, Eigen::Index c) const {
    return p.segment(c * k_, k_) - prob_.alpha * pi0_.segment(c * k_, k_);
  }

  const JointDesignProblem& prob_;
  const Matrix& a_;
  Eigen::Index k_, x_;
  bool constrained_;
  Vector pi0_;
  std::vector<Vector> centers_;  // Aᵀθ̄ per context
  std::vector<Matrix> spreads_;  // LᵀA per context, Σ̄ = LLᵀ
};

// Plain steps gaining less than this many tol_rel also try the minimax model.
constexpr double kFallbackRel = 100.0;

/// Minimizes f on [0, 1]: grid then golden section around the best node.
template <typename F>
std::pair<double, double> line_search(F f, int points, double f0) {
  points = std::max(points, 2);
  double best_eta = 0.0, best = f0;
  int best_i = 0;
  for (int i = 1; i < points; ++i) {
    const double eta = double(i) / double(points - 1);
    const double v = f(eta);
    if (v < best) {
      best = v;
      best_eta = eta;
      best_i = i;
    }
  }
  const double h = 1.0 / double(points - 1);
  double lo = std::max(0.0, double(best_i - 1) * h), hi = std::min(1.0, double(best_i + 1) * h);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > 1e-6) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = f(d);
    }
  }
  const double eta = fc < fd ? c : d;
  const double v = std::min(fc, fd);
  if (v < best) return {eta, v};
  return {best_eta, best};
}

JointDesignResult run_frank_wolfe(const JointDesignProblem& prob, const FwOptions& opts, bool constrained,
                                  const Vector* start) {
  if (opts.max_iters < 0 || opts.ridge < 0.0 || opts.tol_rel < 0.0 || opts.cut_tolerance < 0.0)
    throw ValidationError("frank_wolfe: bad options");
  const Engine engine(prob, constrained);
  std::vector<Vector> cuts;
  JointDesignResult res;

  Vector p = start ? *start : engine.pi0();
  if (constrained && engine.margin(p) < -1e-6) p = engine.restore(opts.cut_tolerance, cuts, res.cuts_generated);

  double g = engine.g(p, opts.ridge);
  auto record = [&](double step) {
    res.trace.push_back({g, constrained ? engine.margin(p) : std::numeric_limits<double>::quiet_NaN(), step});
  };
  record(0.0);

  const double floor_g = double(prob.features.dim()) * (1.0 + opts.tol_rel);
  // Strictly safe point for the barrier fallback.
  const std::optional<Vector> inside = constrained ? engine.interior(p) : std::nullopt;
  const Vector* interior = inside ? &*inside : nullptr;
  int small = 0;
  for (int it = 1; it <= opts.max_iters; ++it) {
    res.iterations = it;
    const Vector h = engine.gradient(p, opts.ridge);
    Vector target = p;
    if (h.cwiseAbs().maxCoeff() > 0.0) {
      const auto inner = engine.inner(h, opts.cut_tolerance, cuts, constrained ? &p : nullptr, interior);
      target = inner.point;
      res.cuts_generated += inner.new_cuts;
    }
    Vector dir = target - p;
    auto search = [&] {
      return line_search([&](double e) { return engine.g(p + e * dir, opts.ridge); }, opts.line_search_points, g);
    };
    auto [eta, g_new] = search();
    if ((g - g_new) / g < kFallbackRel * opts.tol_rel) {
      // Single-column linearization stalls where several columns tie.
      const auto fallback = engine.minimax(p, opts.ridge, opts.cut_tolerance, cuts, interior);
      res.cuts_generated += fallback.new_cuts;
      const Vector plain = dir;
      dir = fallback.point - p;
      const auto [eta_m, g_m] = search();
      if (g_m < g_new) {
        eta = eta_m;
        g_new = g_m;
      } else {
        dir = plain;
      }
    }
    const double rel = (g - g_new) / g;
    if (eta > 0.0) {
      p = engine.normalize(p + eta * dir);
      g = engine.g(p, opts.ridge);
    }
    record(eta);
    engine.prune(p, cuts);
    small = rel < opts.tol_rel ? small + 1 : 0;
    // No design has g below d, so reaching it is optimal.
    if (small >= opts.patience || g <= floor_g) {
      res.converged = true;
      break;
    }
  }

  const Eigen::Index k = prob.features.actions();
  for (Eigen::Index c = 0; c < prob.contexts(); ++c) res.policies.push_back(Policy(p.segment(c * k, k)));
  res.g_value = g;
  res.width = std::sqrt(g);
  res.safety_margin = constrained ? engine.margin(p) : std::numeric_limits<double>::quiet_NaN();
  return res;
}

JointDesignProblem as_joint(const DesignProblem& prob) {
  return {prob.features, {prob.pi0}, Vector::Ones(1), {prob.theta_set}, prob.alpha};
}

DesignResult single(JointDesignResult r) {
  return {r.policies.front(), r.g_value,    r.width, r.safety_margin, r.iterations, r.cuts_generated,
          r.converged,        std::move(r.trace)};
}

}  // namespace

double g_value(const Policy& pi, const FeatureMatrix& features, double ridge) {
  if (pi.size() != features.actions()) throw ValidationError("g_value: policy size != K");
  if (ridge < 0.0) throw ValidationError("g_value: negative ridge");
  return evaluate_g(features.matrix(), pi.probs(), ridge).value;
}

Vector g_gradient(const Policy& pi, const FeatureMatrix& features, double ridge) {
  if (pi.size() != features.actions()) throw ValidationError("g_gradient: policy size != K");
  if (ridge < 0.0) throw ValidationError("g_gradient: negative ridge");
  return gradient_at(features.matrix(), pi.probs(), ridge);
}

Vector worst_case_theta(const Vector& v, const Ellipsoid& e) {
  if (v.size() != e.dim()) throw ValidationError("worst_case_theta: dimension mismatch");
  if (v.norm() <= 1e-12) return e.center();
  const Vector sv = e.shape() * v;
  const double q = v.dot(sv);
  if (!(q > 0.0)) return e.center();
  return e.center() + sv / std::sqrt(q);
}

double safety_margin(const Policy& pi, const DesignProblem& prob) {
  prob.validate();
  if (pi.size() != prob.pi0.size()) throw ValidationError("safety_margin: policy size != K");
  return margin_term(prob.features.matrix(), pi.probs() - prob.alpha * prob.pi0.probs(), prob.theta_set);
}

double safety_margin_at_center(const Policy& pi, const DesignProblem& prob) {
  prob.validate();
  if (pi.size() != prob.pi0.size()) throw ValidationError("safety_margin: policy size != K");
  return (prob.features.matrix() * (pi.probs() - prob.alpha * prob.pi0.probs())).dot(prob.theta_set.center());
}

double joint_safety_margin(const std::vector<Policy>& policies, const JointDesignProblem& prob) {
  prob.validate();
  if (policies.size() != prob.pi0.size()) throw ValidationError("joint_safety_margin: context count mismatch");
  double total = 0.0;
  for (std::size_t c = 0; c < policies.size(); ++c)
    total += prob.weights(Eigen::Index(c)) *
             margin_term(prob.features.matrix(), policies[c].probs() - prob.alpha * prob.pi0[c].probs(),
                         prob.theta_sets[c]);
  return total;
}

InnerSolution solve_inner_lp(const Vector& gradient, const DesignProblem& prob, double cut_tolerance,
                             const std::optional<Policy>& previous, std::vector<Vector> cuts) {
  prob.validate();
  if (gradient.size() != prob.features.actions()) throw ValidationError("solve_inner_lp: gradient size != K");
  if (previous && gradient.cwiseAbs().maxCoeff() == 0.0) return {*previous, std::move(cuts), 0};
  const JointDesignProblem joint = as_joint(prob);
  const Engine engine(joint, true);
  const auto inner = engine.inner(gradient, cut_tolerance, cuts);
  return {Policy(inner.point), std::move(cuts), inner.new_cuts};
}

DesignResult frank_wolfe_safe(const DesignProblem& prob, const FwOptions& opts) {
  prob.validate();
  return single(run_frank_wolfe(as_joint(prob), opts, true, nullptr));
}

DesignResult g_optimal(const FeatureMatrix& features, const FwOptions& opts) {
  const Eigen::Index k = features.actions(), d = features.dim();
  const Policy uniform = Policy::uniform(k);
  const JointDesignProblem joint{features, {uniform}, Vector::Ones(1), {Ellipsoid(Vector::Zero(d), Matrix::Identity(d, d))},
                                 0.0};
  const Vector start = uniform.probs();
  return single(run_frank_wolfe(joint, opts, false, &start));
}

JointDesignResult frank_wolfe_joint(const JointDesignProblem& prob, const FwOptions& opts) {
  prob.validate();
  return run_frank_wolfe(prob, opts, true, nullptr);
}

}  // namespace safelog
