// Safe phased elimination on a simulated K-armed bandit with a known
// default arm, plus the safety and policy-update audits.
#pragma once

#include <iosfwd>
#include <vector>

#include "safelog/tabular.hpp"

namespace safelog {

/// Mean rewards over actions 0 … K; action 0 is the default, its mean known
/// to the learner. Rewards are Bernoulli(mean).
struct BanditInstance {
  Vector means;

  explicit BanditInstance(Vector means_);
  Eigen::Index arms() const { return means.size() - 1; }
  double default_mean() const { return means(0); }
};

/// Learner state at the start of phase h. Vectors span all K+1 actions;
/// entries of eliminated actions are meaningless.
struct PhaseState {
  int h = 1;
  std::vector<Eigen::Index> surviving;  // ascending, always holds 0
  double epsilon = 0.5;
  Vector lower;
  Vector upper;
  Vector counts;     // pulls in the previous phase
  Vector means_hat;  // previous-phase estimates

  static PhaseState initial(Eigen::Index k);
};

/// max over surviving non-default actions of 1/π(a); 1 when none of them
/// carries mass.
double g_phase(const Policy& pi, const std::vector<Eigen::Index>& surviving);

/// Minimizes g_phase subject to Σ_{a≠0} π(a)·max(L(a), 0) + π(0)·r0 ≥ α·r0,
/// then maximizes π(0) among the minimizers. Returned over all K+1 actions.
Policy phase_design(const PhaseState& state, double r0, double alpha);

struct PhaseRecord {
  PhaseState state;
  Policy design;
  Vector pulls;                           // this phase, all K+1 actions
  std::vector<Eigen::Index> eliminated;   // at the end of this phase
  bool truncated = false;
};

struct RunLog {
  std::vector<Eigen::Index> actions;
  std::vector<double> rewards;
  std::vector<double> cum_true_mean;  // Σ_{s≤t} r̄(a_s)
  std::vector<PhaseRecord> phases;
  double regret = 0.0;                 // T·max r̄ − Σ r̄(a_t)
  std::size_t update_count = 0;

  std::size_t rounds() const { return actions.size(); }
};

/// log(K·T⁴/δ), the confidence log-term shared by phase lengths and intervals.
double safepe_log_term(Eigen::Index k, std::size_t horizon, double delta);

RunLog run_safepe(const BanditInstance& instance, std::size_t horizon, double alpha, double delta, Rng& rng);

/// min_t Σ_{s≤t} r̄(a_s) − α·t·r̄(0) on the true means.
double audit_safety(const RunLog& log, const BanditInstance& instance, double alpha);

/// Number of rounds whose action differs from the previous round's.
std::size_t audit_updates(const RunLog& log);

/// (K+1)·ceil(log2(2T)) + 1.
std::size_t update_bound(Eigen::Index k, std::size_t horizon);

/// CSV with header round,action,reward,cum_true_mean (rounds from 1).
void write_runlog_csv(std::ostream& out, const RunLog& log);

/// One-line JSON: regret, update_count, worst_slack, phases.
void write_runlog_summary(std::ostream& out, const RunLog& log, double worst_slack);

}  // namespace safelog
