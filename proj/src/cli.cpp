#include "safelog/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "safelog/bench.hpp"
#include "safelog/config.hpp"
#include "safelog/safepe.hpp"

namespace safelog {
namespace {

struct DesignArgs {
  std::string config, pi0, box, ellipsoid, out;
  std::optional<double> alpha;
};

struct SyntheticArgs {
  std::vector<Eigen::Index> d{4};
  std::vector<double> alpha{0.9};
  Eigen::Index k = 100;
  int seeds = 50;
  unsigned threads = 0;
  bool timing = false;
  int gap_runs = 200;
  std::string out, plot;
};

struct MnistArgs {
  std::string images, labels, out, plot;
  std::vector<double> alpha{0.9};
  MnistOptions opts;
  int seeds = 50;
  unsigned threads = 0;
  bool timing = false;
  int gap_runs = 200;
};

struct SafePeArgs {
  Eigen::Index k = 10;
  std::size_t t = 10000;
  double alpha = 0.8, delta = 0.1, r0 = 0.5;
  std::string means, out, log;
  int seeds = 1;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

// Writes to the file when a path is given, else to `out`.
template <typename F>
void emit(const std::string& path, std::ostream& out, F write) {
  if (path.empty()) {
    write(out);
    return;
  }
  std::ofstream f = open_out(path);
  write(f);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v(i));
  return s;
}

Config design_config(const DesignArgs& a) {
  Config cfg;
  if (!a.config.empty()) cfg = Config::load(a.config);
  if (!a.box.empty()) cfg.merge(Config::load(a.box));
  if (!a.ellipsoid.empty()) cfg.merge(Config::load(a.ellipsoid));
  if (!a.pi0.empty()) cfg.set("pi0", parse_numbers(a.pi0));
  if (a.alpha) cfg.set("alpha", Vector::Constant(1, *a.alpha));
  return cfg;
}

void run_design_tabular(const DesignArgs& a, std::ostream& out) {
  const TabularSetup s = tabular_setup(design_config(a));
  nlohmann::ordered_json j;
  Policy pi = s.pi0;
  if (s.box) {
    const BoxedDesign bd = safe_design_boxed(s.pi0, s.alpha, *s.box);
    pi = bd.policy;
    j["method"] = "boxed_lp";
    j["margin"] = box_safety_margin(pi, s.pi0, s.alpha, *s.box);
  } else {
    pi = water_fill(s.pi0, s.alpha);
    j["method"] = "water_fill";
    j["beta_star"] = beta_star(s.pi0, s.alpha);
  }
  j["policy"] = std::vector<double>(pi.probs().begin(), pi.probs().end());
  j["g"] = g_tabular(pi);
  out << "policy " << join(pi.probs()) << "\n"
      << "g " << fmt(g_tabular(pi)) << "\n";
  if (!a.out.empty()) open_out(a.out) << j.dump(2) << "\n";
}

void run_design_linear(const DesignArgs& a, std::ostream& out) {
  const DesignProblem prob = linear_setup(design_config(a));
  const DesignResult r = frank_wolfe_safe(prob);
  out << "policy " << join(r.policy.probs()) << "\n"
      << "g " << fmt(r.g_value) << "\n"
      << "width " << fmt(r.width) << "\n"
      << "safety_margin " << fmt(r.safety_margin) << "\n";
  if (a.out.empty()) return;
  nlohmann::ordered_json j;
  j["policy"] = std::vector<double>(r.policy.probs().begin(), r.policy.probs().end());
  j["g"] = r.g_value;
  j["width"] = r.width;
  j["safety_margin"] = r.safety_margin;
  j["iterations"] = r.iterations;
  j["cuts"] = r.cuts_generated;
  j["converged"] = r.converged;
  open_out(a.out) << j.dump(2) << "\n";
}

void finish_suite(const std::vector<ExperimentRow>& rows, const std::string& path, const std::string& plot,
                  std::ostream& out) {
  emit(path, out, [&](std::ostream& o) { write_experiment_csv(o, rows); });
  if (plot.empty()) return;
  std::ofstream f = open_out(plot);
  write_plot_script(f, path.empty() ? "results.csv" : path);
}

SuiteOptions suite_options(unsigned threads, bool timing, int gap_runs) {
  SuiteOptions o;
  o.threads = threads;
  o.timing = timing;
  o.gap.runs = gap_runs;
  return o;
}

void run_bench_synthetic(const SyntheticArgs& a, std::uint64_t seed, std::ostream& out) {
  std::vector<ExperimentRow> rows;
  const SuiteOptions opts = suite_options(a.threads, a.timing, a.gap_runs);
  for (const Eigen::Index d : a.d)
    for (const double alpha : a.alpha) {
      SyntheticSpec spec;
      spec.d = d;
      spec.k = a.k;
      spec.alpha = alpha;
      spec.seed = seed;
      spec.n_runs = a.seeds;
      const auto part = run_synthetic_suite(spec, opts);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  finish_suite(rows, a.out, a.plot, out);
}

void run_bench_mnist(const MnistArgs& a, std::uint64_t seed, std::ostream& out) {
  const IdxImages images = read_idx_images(a.images);
  const std::vector<std::uint8_t> labels = read_idx_labels(a.labels);
  const SuiteOptions opts = suite_options(a.threads, a.timing, a.gap_runs);
  std::vector<ExperimentRow> rows;
  for (const double alpha : a.alpha) {
    const auto part = run_seeded(seed, a.seeds, opts, [&](std::uint64_t, Rng& rng) {
      return mnist_problem(images, labels, alpha, a.opts, rng);
    });
    rows.insert(rows.end(), part.begin(), part.end());
  }
  finish_suite(rows, a.out, a.plot, out);
}

void run_safepe_cmd(const SafePeArgs& a, std::uint64_t seed, std::ostream& out) {
  Vector means;
  if (!a.means.empty()) {
    means = parse_numbers(a.means);
  } else {
    Rng rng(seed);
    means.resize(a.k + 1);
    means(0) = a.r0;
    for (Eigen::Index i = 1; i <= a.k; ++i) means(i) = rng.uniform();
  }
  const BanditInstance inst(means);
  std::ostringstream summary;
  summary << "seed,regret,update_count,update_bound,worst_slack,phases\n";
  for (int s = 0; s < a.seeds; ++s) {
    Rng rng(seed + std::uint64_t(s) + 1);
    const RunLog log = run_safepe(inst, a.t, a.alpha, a.delta, rng);
    const double slack = audit_safety(log, inst, a.alpha);
    summary << seed + std::uint64_t(s) << "," << fmt(log.regret) << "," << log.update_count << ","
            << update_bound(inst.arms(), a.t) << "," << fmt(slack) << "," << log.phases.size() << "\n";
    if (s == 0 && !a.log.empty()) {
      std::ofstream f = open_out(a.log);
      write_runlog_csv(f, log);
      std::ofstream js = open_out(a.log + ".json");
      write_runlog_summary(js, log, slack);
    }
  }
  emit(a.out, out, [&](std::ostream& o) { o << summary.str(); });
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safe logging policies: design, benchmarks and SafePE", "safelog"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  auto* design = app.add_subcommand("design", "Compute a safe logging policy");
  design->require_subcommand(1);
  DesignArgs da;
  for (auto* sub : {design->add_subcommand("tabular", "Water-filling or boxed LP design"),
                    design->add_subcommand("linear", "Frank-Wolfe design over an ellipsoid")}) {
    sub->add_option("--config", da.config, "key=value problem file")->check(CLI::ExistingFile);
    sub->add_option("--pi0", da.pi0, "Production policy, e.g. 0.2,0.8");
    sub->add_option("--alpha", da.alpha, "Safety level")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--out", da.out, "JSON result file");
  }
  auto* tab = design->get_subcommand("tabular");
  auto* lin = design->get_subcommand("linear");
  tab->add_option("--box", da.box, "File with lower/upper reward bounds")->check(CLI::ExistingFile);
  lin->add_option("--ellipsoid", da.ellipsoid, "File with theta_bar and sigma_bar")->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "Experiment suites (CSV output)");
  bench->require_subcommand(1);
  SyntheticArgs sa;
  auto* syn = bench->add_subcommand("synthetic", "Sphere-feature problems");
  syn->add_option("--d", sa.d, "Feature dimensions")->delimiter(',')->check(CLI::PositiveNumber);
  syn->add_option("--alpha", sa.alpha, "Safety levels")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  syn->add_option("--k", sa.k, "Actions")->check(CLI::PositiveNumber);
  syn->add_option("--seeds", sa.seeds, "Runs per setting")->check(CLI::PositiveNumber);
  syn->add_option("--threads", sa.threads, "Workers (0: all cores)");
  syn->add_option("--gap-runs", sa.gap_runs, "Off-policy gap repetitions")->check(CLI::PositiveNumber);
  syn->add_flag("--timing", sa.timing, "Fill runtime_ms (output is then not reproducible)");
  syn->add_option("--out", sa.out, "CSV file (default: stdout)");
  syn->add_option("--plot", sa.plot, "gnuplot script file");

  MnistArgs ma;
  auto* mn = bench->add_subcommand("mnist", "Problems estimated from IDX digit images");
  mn->add_option("--images", ma.images, "IDX image file")->required()->check(CLI::ExistingFile);
  mn->add_option("--labels", ma.labels, "IDX label file")->required()->check(CLI::ExistingFile);
  mn->add_option("--digit", ma.opts.target_digit, "Digit with reward one")->check(CLI::Range(0, 9));
  mn->add_option("--alpha", ma.alpha, "Safety levels")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  mn->add_option("--pool", ma.opts.pool, "Average-pooling factor")->check(CLI::PositiveNumber);
  mn->add_flag("--force", ma.opts.force, "Allow pooling below 4");
  mn->add_option("--k", ma.opts.k, "Actions")->check(CLI::PositiveNumber);
  mn->add_option("--train", ma.opts.train, "Regression subsample size")->check(CLI::PositiveNumber);
  mn->add_option("--ridge", ma.opts.ridge, "Regression ridge")->check(CLI::NonNegativeNumber);
  mn->add_option("--seeds", ma.seeds, "Runs per setting")->check(CLI::PositiveNumber);
  mn->add_option("--threads", ma.threads, "Workers (0: all cores)");
  mn->add_option("--gap-runs", ma.gap_runs, "Off-policy gap repetitions")->check(CLI::PositiveNumber);
  mn->add_flag("--timing", ma.timing, "Fill runtime_ms");
  mn->add_option("--out", ma.out, "CSV file (default: stdout)");
  mn->add_option("--plot", ma.plot, "gnuplot script file");

  SafePeArgs pa;
  auto* spe = app.add_subcommand("safepe", "Safe phased elimination on a Bernoulli bandit");
  spe->add_option("--k", pa.k, "Non-default arms (random means)")->check(CLI::PositiveNumber);
  spe->add_option("--means", pa.means, "Explicit means, default arm first");
  spe->add_option("--r0", pa.r0, "Default arm mean for random instances")->check(CLI::Range(0.0, 1.0));
  spe->add_option("--t", pa.t, "Horizon")->check(CLI::PositiveNumber);
  spe->add_option("--alpha", pa.alpha, "Safety level")->check(CLI::Range(0.0, 1.0));
  spe->add_option("--delta", pa.delta, "Failure probability")->check(CLI::Range(0.0, 1.0));
  spe->add_option("--seeds", pa.seeds, "Runs")->check(CLI::PositiveNumber);
  spe->add_option("--out", pa.out, "Summary CSV (default: stdout)");
  spe->add_option("--log", pa.log, "Per-round CSV of the first run (plus .json summary)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*tab) run_design_tabular(da, out);
    else if (*lin) run_design_linear(da, out);
    else if (*syn) run_bench_synthetic(sa, seed, out);
    else if (*mn) run_bench_mnist(ma, seed, out);
    else if (*spe) run_safepe_cmd(pa, seed, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace safelog
