// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "safelog/bench.hpp"
#include "safelog/cli.hpp"
#include "safelog/errors.hpp"
#include "safelog/ope.hpp"
#include "safelog/safepe.hpp"
#include "test_support.hpp"

using namespace safelog;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool ok;
  std::string detail;
};

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

DesignProblem illustrative(double t1, double t2) {
  return {FeatureMatrix(Matrix::Identity(2, 2)), Policy(Eigen::Vector2d(0.2, 0.8)), 0.9,
          Ellipsoid(Eigen::Vector2d(t1, t2), 0.1 * Matrix::Identity(2, 2))};
}

Verdict c1() {
  const auto t0 = Clock::now();
  const DesignProblem p = illustrative(1, 2);
  const DesignResult safe = frank_wolfe_safe(p);
  const DesignResult gopt = g_optimal(p.features);
  const double mix = std::sqrt(g_value(mixture_policy(p.pi0, 0.9), p.features));
  const double viol = -safety_margin_at_center(gopt.policy, p);
  const double secs = seconds_since(t0);
  const bool ok = std::abs(safe.policy[0] - 0.330) <= 0.005 && std::abs(safe.policy[1] - 0.670) <= 0.005 &&
                  safe.width >= 1.73 && safe.width <= 1.75 && std::abs(gopt.policy[0] - 0.5) <= 1e-4 &&
                  std::abs(gopt.policy[1] - 0.5) <= 1e-4 && std::abs(gopt.width - 1.4142) <= 1e-3 &&
                  std::abs(mix - 2.085) <= 1e-3 && std::abs(viol - 0.12) <= 1e-6 && secs < 1.0;
  return {ok, fmt("pi_e=(%.4f,%.4f) width=%.4f; G-opt=(%.5f,%.5f) width=%.4f; mixture width=%.4f; "
                  "G-opt violation at center=%.7f; %.3fs",
                  safe.policy[0], safe.policy[1], safe.width, gopt.policy[0], gopt.policy[1], gopt.width, mix, viol,
                  secs)};
}

Verdict c2() {
  const DesignResult r = frank_wolfe_safe(illustrative(2, 1));
  const bool ok = std::abs(r.policy[0] - 0.5) <= 1e-3 && std::abs(r.policy[1] - 0.5) <= 1e-3 &&
                  std::abs(r.width - 1.4142) <= 1e-3;
  return {ok, fmt("pi_e=(%.5f,%.5f) width=%.5f (printed 1.141 read as 1.414)", r.policy[0], r.policy[1], r.width)};
}

Verdict c3() {
  const Policy pi0(Eigen::Vector3d(0.1, 0.3, 0.6));
  const Policy wf = water_fill(pi0, 0.8);
  const double err = (wf.probs() - Eigen::Vector3d(0.26, 0.26, 0.48)).cwiseAbs().maxCoeff();
  const double g_mix = g_tabular(mixture_policy(pi0, beta_star(pi0, 0.8)));
  const double g_wf = g_tabular(wf);
  const bool ok = err <= 1e-12 && std::abs(g_mix - 1 / 0.205) <= 1e-9 && std::abs(g_wf - 1 / 0.26) <= 1e-9 &&
                  g_mix > g_wf;
  return {ok, fmt("water_fill err=%.1e; g(mixture)=%.6f vs 1/0.205=%.6f; g(water)=%.6f vs 1/0.26=%.6f", err, g_mix,
                  1 / 0.205, g_wf, 1 / 0.26)};
}

Verdict c4() {
  Rng rng(400);
  double worst = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const Eigen::Index k = 1 + Eigen::Index(rng.index(6));
    const Policy pi0 = testing::random_policy(rng, k);
    const double alpha = rng.uniform();
    worst = std::max(worst, std::abs(water_fill(pi0, alpha).probs().minCoeff() - testing::max_min_lp(pi0, alpha)));
  }
  return {worst <= 1e-8, fmt("500 instances, max |min water_fill - LP optimum| = %.2e", worst)};
}

Verdict c5() {
  Rng rng(500);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index k = 2 + Eigen::Index(rng.index(5));
    const Policy pi0 = testing::random_policy(rng, k);
    const double alpha = rng.uniform();
    const RewardBox box = testing::random_box(rng, k);
    worst = std::max(worst, std::abs(safe_design_boxed(pi0, alpha, box).gamma - testing::dual_form_gamma(pi0, alpha, box)));
  }
  return {worst <= 1e-7, fmt("200 boxed instances, max |gamma difference| = %.2e", worst)};
}

Verdict c6() {
  Rng rng(600);
  bool ok = true;
  std::string detail;
  for (Eigen::Index d : {2, 4, 8}) {
    for (int rep = 0; rep < 3; ++rep) {
      SyntheticSpec s;
      s.d = d;
      const DesignProblem p = gen_synthetic(s, rng);
      const auto t0 = Clock::now();
      const DesignResult r = g_optimal(p.features);
      const double secs = seconds_since(t0);
      ok = ok && r.g_value <= 1.05 * double(d) && secs < 5.0;
      if (rep == 0) detail += fmt("d=%ld g=%.6f (%.3fs) ", long(d), r.g_value, secs);
    }
  }
  return {ok, detail + "[3 instances per d]"};
}

Verdict c7() {
  SyntheticSpec spec;
  spec.d = 4;
  spec.alpha = 0.9;
  spec.n_runs = 50;
  const auto rows = run_synthetic_suite(spec, {});
  double safe_max = -1e300, mix_max = -1e300;
  for (const auto& r : rows) {
    if (r.method == Method::SafeOD) safe_max = std::max(safe_max, r.safety_violation);
    if (r.method == Method::Mixture) mix_max = std::max(mix_max, r.safety_violation);
  }
  const double gopt_frac = violation_fraction(rows, Method::GOptimal);
  const double mix_frac = violation_fraction(rows, Method::Mixture);
  const double w_g = median_of(rows, Method::GOptimal, &ExperimentRow::width);
  const double w_s = median_of(rows, Method::SafeOD, &ExperimentRow::width);
  const double w_m = median_of(rows, Method::Mixture, &ExperimentRow::width);
  // Both designs reach g = d here; compare at the solver's tol_rel.
  const bool order = w_g <= w_s * (1 + FwOptions{}.tol_rel) && w_s <= w_m;
  const bool ok = safe_max <= 1e-6 && gopt_frac > 0.5 && mix_max <= 0.0 && order;
  return {ok, fmt("SafeOD max violation=%.2e; GOptimal violation fraction=%.2f; Mixture violation fraction=%.2f "
                  "(max %.4f, must be 0); median widths G=%.9f S=%.9f M=%.9f",
                  safe_max, gopt_frac, mix_frac, mix_max, w_g, w_s, w_m)};
}

ContextualPolicy deterministic(Eigen::Index code, Eigen::Index contexts, Eigen::Index k) {
  std::vector<Policy> rows;
  for (Eigen::Index x = 0; x < contexts; ++x, code /= k) rows.push_back(Policy::point_mass(k, code % k));
  return ContextualPolicy(std::move(rows));
}

Verdict c8() {
  const auto t0 = Clock::now();
  Rng rng(800);
  Matrix means(2, 3);
  means << 0.2, 0.5, 0.9, 0.7, 0.4, 0.1;
  const TabularRewardModel model{means};
  const ContextDistribution ctx = ContextDistribution::uniform(2);
  std::vector<Policy> p0{Policy(Eigen::Vector3d(0.1, 0.3, 0.6)), Policy(Eigen::Vector3d(0.6, 0.3, 0.1))};
  const ContextualPolicy logging = contextual_safe_design_tabular(ContextualPolicy(p0), 0.8, {}, ctx, false);
  // The error is linear in the target, so its max over all policies sits on
  // the 9 deterministic ones.
  std::vector<ContextualPolicy> targets;
  for (Eigen::Index c = 0; c < 9; ++c) targets.push_back(deterministic(c, 2, 3));
  const ContextualPolicy probe = ContextualPolicy::uniform(2, 3);
  const std::size_t n = 2000;
  const double bound = ips_error_bound(g_contextual(logging), 2, 3, n, 0.05);
  int covered = 0;
  double sum = 0.0, sum2 = 0.0;
  const double truth = policy_value(model, probe, ctx);
  for (int rep = 0; rep < 500; ++rep) {
    const auto data = collect_dataset(model, logging, ctx, n, rng);
    double worst = 0.0;
    for (const auto& t : targets) worst = std::max(worst, std::abs(ips_value(data, t) - policy_value(model, t, ctx)));
    covered += worst <= bound;
    const double e = ips_value(data, probe) - truth;
    sum += e;
    sum2 += e * e;
  }
  const double bias = sum / 500;
  const double se = std::sqrt((sum2 / 500 - bias * bias) / 499);
  const double secs = seconds_since(t0);
  const bool ok = covered >= 495 && std::abs(bias) <= 3 * se && secs < 30.0;
  return {ok, fmt("coverage %d/500 (bound %.4f); mean bias %.2e, 3 SE %.2e; %.2fs", covered, bound, bias, 3 * se,
                  secs)};
}

Verdict c9() {
  Rng rng(900);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index contexts = 1 + Eigen::Index(rng.index(3)), k = 2 + Eigen::Index(rng.index(4));
    Matrix means(contexts, k);
    for (Eigen::Index i = 0; i < means.size(); ++i) means(i) = rng.uniform();
    std::vector<Policy> lg, tg;
    for (Eigen::Index x = 0; x < contexts; ++x) {
      lg.push_back(testing::random_policy(rng, k));
      tg.push_back(testing::random_policy(rng, k));
    }
    const auto data = collect_dataset(TabularRewardModel{means}, ContextualPolicy(lg),
                                      ContextDistribution::uniform(contexts), 200, rng);
    const ContextualPolicy target(tg);
    worst = std::max(worst, std::abs(pi_value(data, target, FeatureMatrix(Matrix::Identity(k, k))) -
                                     ips_value(data, target)));
  }
  return {worst <= 1e-9, fmt("100 datasets, max |PI - IPS| = %.2e", worst)};
}

Verdict c10() {
  const auto t0 = Clock::now();
  Vector m(11);
  m << 0.3, 0.9, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8;
  const BanditInstance inst(m);
  const std::size_t bound = update_bound(10, 10000);
  std::size_t max_updates = 0;
  int unsafe = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const RunLog log = run_safepe(inst, 10000, 0.8, 0.1, rng);
    max_updates = std::max(max_updates, audit_updates(log));
    unsafe += audit_safety(log, inst, 0.8) < 0.0;
  }
  auto mean_regret = [&](std::size_t horizon) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(1000 + seed);
      total += run_safepe(inst, horizon, 0.8, 0.1, rng).regret;
    }
    return total / 50;
  };
  std::string ratios;
  bool ratio_ok = true;
  for (std::size_t t : {2000u, 4000u, 8000u}) {
    const double r = mean_regret(2 * t) / mean_regret(t);
    ratio_ok = ratio_ok && r <= 1.6;
    ratios += fmt(" T=%zu:%.3f", t, r);
  }
  const double secs = seconds_since(t0);
  const double frac = unsafe / 200.0;
  const bool ok = max_updates <= bound && frac <= 0.15 && ratio_ok && secs < 120.0;
  return {ok, fmt("max updates %zu <= %zu; unsafe fraction %.3f; regret(2T)/regret(T):%s; %.1fs", max_updates, bound,
                  frac, ratios.c_str(), secs)};
}

std::string u32(std::uint32_t v) { return {char(v >> 24), char(v >> 16), char(v >> 8), char(v)}; }

Verdict c11() {
  std::string bytes = u32(0x803) + u32(2) + u32(2) + u32(2);
  for (int c : {0, 17, 128, 255, 1, 2, 3, 4}) bytes.push_back(char(c));
  std::istringstream in(bytes);
  const IdxImages img = read_idx_images(in);
  std::ostringstream out;
  write_idx_images(out, img);
  const bool round = out.str() == bytes && img.pixel(0, 1, 1) == 255 && img.pixel(1, 0, 1) == 2;
  auto throws = [](const std::string& b, auto expected) {
    std::istringstream s(b);
    try {
      read_idx_images(s);
    } catch (const decltype(expected)&) {
      return true;
    } catch (...) {
      return false;
    }
    return false;
  };
  std::string bad = bytes;
  bad[2] = 0x09;
  const bool magic = throws(bad, BadMagic(""));
  const bool trunc = throws(bytes.substr(0, bytes.size() - 3), TruncatedFile("")) &&
                     throws(bytes.substr(0, 6), TruncatedFile(""));
  return {round && magic && trunc, fmt("round trip %s; bad magic -> BadMagic %s; truncation -> TruncatedFile %s",
                                       round ? "exact" : "differs", magic ? "yes" : "no", trunc ? "yes" : "no")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict c12() {
  const auto dir = std::filesystem::temp_directory_path() / "safelog_acceptance";
  std::filesystem::create_directories(dir);
  {
    std::ofstream cfg(dir / "ill.cfg");
    cfg << "alpha = 0.9\npi0 = 0.2 0.8\nfeature = 1 0\nfeature = 0 1\ntheta_bar = 1 2\n"
           "sigma_bar = 0.1 0\nsigma_bar = 0 0.1\n";
    std::ofstream tab(dir / "tab.cfg");
    tab << "alpha = 0.8\npi0 = 0.1 0.3 0.6\nlower = 0.2 0.1 0.3\nupper = 0.6 0.9 0.5\n";
    Rng rng(12);
    IdxImages img;
    img.count = 300;
    img.rows = img.cols = 28;
    img.pixels.resize(300 * 28 * 28);
    std::vector<std::uint8_t> labels(300);
    // Digit l lights up the 4×4 block l on the diagonal, plus noise.
    for (std::size_t i = 0; i < 300; ++i) {
      labels[i] = std::uint8_t(rng.index(10));
      for (std::size_t r = 0; r < 28; ++r)
        for (std::size_t c = 0; c < 28; ++c) {
          const bool lit = r / 4 == labels[i] % 7 && c / 4 == labels[i] % 7;
          img.pixels[(i * 28 + r) * 28 + c] = std::uint8_t(lit ? 200 + rng.index(56) : rng.index(40));
        }
    }
    std::ofstream fi(dir / "img.idx", std::ios::binary), fl(dir / "lab.idx", std::ios::binary);
    write_idx_images(fi, img);
    write_idx_labels(fl, labels);
  }
  const std::string d = dir.string() + "/";
  const std::vector<std::vector<std::string>> calls{
      {"--seed", "3", "design", "linear", "--config", d + "ill.cfg", "--out", d + "OUT"},
      {"--seed", "3", "design", "tabular", "--config", d + "tab.cfg", "--out", d + "OUT"},
      {"--seed", "3", "bench", "synthetic", "--d", "2,4", "--alpha", "0.5,0.9", "--seeds", "5", "--out", d + "OUT"},
      {"--seed", "3", "bench", "mnist", "--images", d + "img.idx", "--labels", d + "lab.idx", "--k", "60", "--train",
       "250", "--seeds", "3", "--out", d + "OUT"},
      {"--seed", "3", "safepe", "--k", "5", "--t", "4000", "--seeds", "4", "--out", d + "OUT"},
  };
  int same = 0;
  std::string codes;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      std::vector<std::string> args{"safelog"};
      for (auto a : calls[i]) {
        if (a == d + "OUT") a = d + "out" + std::to_string(i) + "_" + std::to_string(rep);
        args.push_back(a);
      }
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream o, e;
      const int code = cli_main(int(argv.size()), argv.data(), o, e);
      codes += std::to_string(code);
      outputs[rep] = o.str() + "|" + slurp(args.back());
    }
    same += outputs[0] == outputs[1] && outputs[0].size() > 2;
  }
  const bool ok = same == int(calls.size()) && codes.find_first_not_of('0') == std::string::npos;
  return {ok, fmt("%d/%zu invocations byte-identical on rerun (exit codes %s)", same, calls.size(), codes.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"illustrative example 1", c1},
      {"illustrative example 2", c2},
      {"water-filling exactness", c3},
      {"water-filling equals the max-min LP", c4},
      {"boxed LP forms agree on gamma", c5},
      {"G-optimal design near d", c6},
      {"Frank-Wolfe safety on synthetic problems", c7},
      {"IPS unbiasedness and bound coverage", c8},
      {"PI equals IPS on tabular features", c9},
      {"SafePE audits", c10},
      {"IDX parser", c11},
      {"CLI determinism", c12},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v{false, ""};
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.ok;
    std::printf("criterion %2zu %s: %s -- %s\n", i + 1, v.ok ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed ? 1 : 0;
}
