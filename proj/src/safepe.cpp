#include "safelog/safepe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "safelog/errors.hpp"
#include "safelog/lp.hpp"

namespace safelog {

BanditInstance::BanditInstance(Vector means_) : means(std::move(means_)) {
  if (means.size() < 2) throw ValidationError("BanditInstance: need the default and at least one arm");
  for (Eigen::Index a = 0; a < means.size(); ++a)
    if (!(means(a) >= 0.0 && means(a) <= 1.0)) throw ValidationError("BanditInstance: means must lie in [0, 1]");
}

PhaseState PhaseState::initial(Eigen::Index k) {
  PhaseState s;
  for (Eigen::Index a = 0; a <= k; ++a) s.surviving.push_back(a);
  s.lower = Vector::Zero(k + 1);
  s.upper = Vector::Ones(k + 1);
  s.counts = Vector::Zero(k + 1);
  s.means_hat = Vector::Zero(k + 1);
  return s;
}

double g_phase(const Policy& pi, const std::vector<Eigen::Index>& surviving) {
  double g = 0.0, mass = 0.0;
  for (Eigen::Index a : surviving) {
    if (a == 0) continue;
    mass += pi[a];
    g = std::max(g, pi[a] > 0.0 ? 1.0 / pi[a] : std::numeric_limits<double>::infinity());
  }
  return mass > 0.0 ? g : 1.0;
}

Policy phase_design(const PhaseState& state, double r0, double alpha) {
  if (state.surviving.empty() || state.surviving.front() != 0)
    throw ValidationError("phase_design: surviving set must contain action 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("phase_design: alpha must lie in [0, 1]");
  const Eigen::Index k1 = state.lower.size();
  const Eigen::Index m = Eigen::Index(state.surviving.size());
  if (m == 1) return Policy::point_mass(k1, 0);

  // Variables: π over the surviving actions (slot 0 is the default), then γ.
  LinearProgram lp;
  lp.objective = Vector::Zero(m + 1);
  lp.objective(m) = -1.0;
  Vector ones = Vector::Zero(m + 1);
  ones.head(m).setOnes();
  lp.add_equality(ones, 1.0);
  for (Eigen::Index i = 1; i < m; ++i) {
    Vector row = Vector::Zero(m + 1);
    row(i) = 1.0;
    row(m) = -1.0;
    lp.add_inequality(row, 0.0);
  }
  Vector safety = Vector::Zero(m + 1);
  safety(0) = r0;
  for (Eigen::Index i = 1; i < m; ++i) safety(i) = std::clamp(state.lower(state.surviving[std::size_t(i)]), 0.0, 1.0);
  lp.add_inequality(safety, alpha * r0);

  const LpSolution first = solve_lp(lp);
  if (!first.optimal()) throw NumericalFailure("phase_design: max-gamma LP failed");
  const double gamma = first.point(m);

  lp.objective.setZero();
  lp.objective(0) = -1.0;
  lp.lower = Vector::Zero(m + 1);
  lp.lower(m) = gamma * (1.0 - 1e-10);
  const LpSolution second = solve_lp(lp);
  if (!second.optimal()) throw NumericalFailure("phase_design: lexicographic LP failed");

  Vector probs = Vector::Zero(k1);
  for (Eigen::Index i = 0; i < m; ++i)
    probs(state.surviving[std::size_t(i)]) = second.point(i) > 1e-9 ? second.point(i) : 0.0;
  return Policy::renormalized(probs);
}

double safepe_log_term(Eigen::Index k, std::size_t horizon, double delta) {
  const double t = double(horizon);
  return std::log(double(k)) + 4.0 * std::log(t) - std::log(delta);
}

RunLog run_safepe(const BanditInstance& instance, std::size_t horizon, double alpha, double delta, Rng& rng) {
  if (horizon < 1) throw ValidationError("run_safepe: horizon must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("run_safepe: delta must lie in (0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("run_safepe: alpha must lie in [0, 1]");
  const Eigen::Index k = instance.arms();
  const double r0 = instance.default_mean();
  const double log_term = safepe_log_term(k, horizon, delta);

  RunLog log;
  log.actions.reserve(horizon);
  log.rewards.reserve(horizon);
  log.cum_true_mean.reserve(horizon);
  double cum = 0.0;
  std::size_t t = 0;
  PhaseState state = PhaseState::initial(k);

  while (t < horizon) {
    PhaseRecord rec{state, phase_design(state, r0, alpha), Vector::Zero(k + 1), {}, false};
    const double g = g_phase(rec.design, state.surviving);
    Vector sums = Vector::Zero(k + 1);
    for (Eigen::Index a : state.surviving) {
      const double target = std::ceil(0.5 * rec.design[a] * g * log_term / (state.epsilon * state.epsilon) - 1e-9);
      while (rec.pulls(a) < target && t < horizon) {
        const double r = rng.bernoulli(instance.means(a)) ? 1.0 : 0.0;
        cum += instance.means(a);
        log.actions.push_back(a);
        log.rewards.push_back(r);
        log.cum_true_mean.push_back(cum);
        rec.pulls(a) += 1.0;
        sums(a) += r;
        ++t;
      }
    }
    if (t >= horizon) {
      rec.truncated = true;
      log.phases.push_back(std::move(rec));
      break;
    }

    PhaseState next = state;
    next.h = state.h + 1;
    next.epsilon = state.epsilon / 2.0;
    next.counts = rec.pulls;
    next.means_hat(0) = r0;
    double best = r0;
    for (Eigen::Index a : state.surviving) {
      if (a == 0) continue;
      const double n = rec.pulls(a);
      if (n == 0.0) continue;  // unexplored this phase: keep the old interval
      const double hat = sums(a) / n;
      const double half = std::sqrt(log_term / (2.0 * n));
      next.means_hat(a) = hat;
      next.lower(a) = hat - half;
      next.upper(a) = hat + half;
      best = std::max(best, hat);
    }
    next.surviving.clear();
    for (Eigen::Index a : state.surviving) {
      if (a != 0 && rec.pulls(a) > 0.0 && next.means_hat(a) <= best - 2.0 * state.epsilon)
        rec.eliminated.push_back(a);
      else
        next.surviving.push_back(a);
    }
    log.phases.push_back(std::move(rec));
    state = std::move(next);
  }

  log.regret = double(horizon) * instance.means.maxCoeff() - cum;
  log.update_count = audit_updates(log);
  return log;
}

double audit_safety(const RunLog& log, const BanditInstance& instance, double alpha) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < log.rounds(); ++t)
    worst = std::min(worst, log.cum_true_mean[t] - alpha * double(t + 1) * instance.default_mean());
  return worst;
}

std::size_t audit_updates(const RunLog& log) {
  std::size_t n = 0;
  for (std::size_t t = 1; t < log.actions.size(); ++t) n += log.actions[t] != log.actions[t - 1];
  return n;
}

std::size_t update_bound(Eigen::Index k, std::size_t horizon) {
  return std::size_t(k + 1) * std::size_t(std::ceil(std::log2(2.0 * double(horizon)))) + 1;
}

void write_runlog_csv(std::ostream& out, const RunLog& log) {
  out << "round,action,reward,cum_true_mean\n";
  char buf[96];
  for (std::size_t t = 0; t < log.rounds(); ++t) {
    std::snprintf(buf, sizeof buf, "%zu,%ld,%.17g,%.17g\n", t + 1, long(log.actions[t]), log.rewards[t],
                  log.cum_true_mean[t]);
    out << buf;
  }
}

void write_runlog_summary(std::ostream& out, const RunLog& log, double worst_slack) {
  nlohmann::json j;
  j["regret"] = log.regret;
  j["update_count"] = log.update_count;
  j["worst_slack"] = worst_slack;
  j["phases"] = log.phases.size();
  out << j.dump() << '\n';
}

}  // namespace safelog
