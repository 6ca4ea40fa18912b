#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "safelog/tabular.hpp"
#include "test_support.hpp"

using namespace safelog;

namespace {
Policy pol(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return Policy(out);
}
}  // namespace

TEST_CASE("policy construction clamps round-off and rejects real errors") {
  CHECK(Policy((Eigen::Vector3d(0.5, 0.5 + 1e-10, -1e-13))).probs().minCoeff() == 0.0);
  CHECK(std::abs(Policy(Eigen::Vector2d(0.5, 0.5 + 5e-10)).probs().sum() - 1.0) < 1e-15);
  CHECK_THROWS_AS(Policy(Eigen::Vector2d(0.5, 0.6)), ValidationError);
  CHECK_THROWS_AS(Policy(Eigen::Vector2d(1.1, -0.1)), ValidationError);
  CHECK_THROWS_AS(RewardBox(Eigen::Vector2d(0.5, 0.2), Eigen::Vector2d(0.4, 0.3)), ValidationError);
}

TEST_CASE("g_tabular") {
  CHECK(g_tabular(Policy::uniform(4)) == doctest::Approx(4.0));
  CHECK(g_tabular(pol({0.26, 0.26, 0.48})) == doctest::Approx(1.0 / 0.26));
  CHECK(std::isinf(g_tabular(pol({0.5, 0.0, 0.5}))));
}

TEST_CASE("beta_star") {
  CHECK(beta_star(pol({0.1, 0.3, 0.6}), 0.8) == doctest::Approx(0.55));
  CHECK(beta_star(Policy::uniform(5), 0.9) == 0.0);
  CHECK(beta_star(Policy::uniform(5), 0.0) == 0.0);

  // The constraint binds at the most likely action: π_β(argmax) = α·π0(argmax).
  const Policy pi0 = pol({0.2, 0.8});
  const double b = beta_star(pi0, 0.9);
  CHECK(b == doctest::Approx((0.9 - 1.0 / 1.6) / (1.0 - 1.0 / 1.6)));
  CHECK(mixture_policy(pi0, b)[1] == doctest::Approx(0.9 * 0.8));
  CHECK(beta_star(pi0, 0.3) == 0.0);
}

TEST_CASE("mixture_policy") {
  const Policy pi0 = pol({0.1, 0.3, 0.6});
  CHECK((mixture_policy(pi0, 1.0).probs() - pi0.probs()).norm() < 1e-15);
  const Policy mixed = mixture_policy(pi0, 0.55);
  CHECK((mixed.probs() - Eigen::Vector3d(0.205, 0.315, 0.48)).cwiseAbs().maxCoeff() < 1e-12);

  const Policy two = mixture_policy(pol({0.2, 0.8}), 0.9);
  CHECK((two.probs() - Eigen::Vector2d(0.23, 0.77)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(1.0 / std::sqrt(two[0]) == doctest::Approx(2.085).epsilon(1e-3));
  CHECK_THROWS_AS(mixture_policy(pi0, 1.5), ValidationError);
}

TEST_CASE("water_fill examples") {
  const Policy pi0 = pol({0.1, 0.3, 0.6});
  const Policy filled = water_fill(pi0, 0.8);
  CHECK((filled.probs() - Eigen::Vector3d(0.26, 0.26, 0.48)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((water_fill(pi0, 0.0).probs() - Vector::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((water_fill(pi0, 1.0).probs() - pi0.probs()).cwiseAbs().maxCoeff() < 1e-15);
  // Order of actions is irrelevant.
  const Policy shuffled = water_fill(pol({0.6, 0.1, 0.3}), 0.8);
  CHECK((shuffled.probs() - Eigen::Vector3d(0.48, 0.26, 0.26)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("water_fill is safe, optimal, and monotone in alpha") {
  Rng rng(1);
  for (int rep = 0; rep < 1000; ++rep) {
    const Eigen::Index k = 2 + Eigen::Index(rng.index(9));
    const Policy pi0 = testing::random_policy(rng, k);
    const double alpha = rng.uniform();
    const Policy filled = water_fill(pi0, alpha);
    CHECK((filled.probs() - alpha * pi0.probs()).minCoeff() >= -1e-12);
    // Untouched actions keep exactly α·π0(a); raised ones share the minimum.
    const double low = filled.probs().minCoeff();
    for (Eigen::Index a = 0; a < k; ++a)
      CHECK((std::abs(filled[a] - alpha * pi0[a]) < 1e-12 || std::abs(filled[a] - low) < 1e-12));

    const double lower_alpha = alpha * rng.uniform();
    CHECK(water_fill(pi0, lower_alpha).probs().minCoeff() >= low - 1e-12);
  }
}

TEST_CASE("water_fill matches the max-min LP") {
  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const Eigen::Index k = 2 + Eigen::Index(rng.index(5));
    const Policy pi0 = testing::random_policy(rng, k);
    const double alpha = rng.uniform();
    CHECK(std::abs(water_fill(pi0, alpha).probs().minCoeff() - testing::max_min_lp(pi0, alpha)) <= 1e-8);
  }
}

TEST_CASE("box_safety_margin") {
  Rng rng(3);
  const Policy pi0 = pol({0.1, 0.3, 0.6});
  CHECK(box_safety_margin(pi0, pi0, 1.0, testing::random_box(rng, 3)) == doctest::Approx(0.0));

  // Unit box: Σ min{0, π(a) − α·π0(a)}.
  const Policy pi = pol({0.5, 0.3, 0.2});
  const double expected = std::min(0.0, 0.5 - 0.08) + std::min(0.0, 0.3 - 0.24) + std::min(0.0, 0.2 - 0.48);
  CHECK(box_safety_margin(pi, pi0, 0.8, RewardBox::unit(3)) == doctest::Approx(expected));
  CHECK(box_safety_margin(water_fill(pi0, 0.8), pi0, 0.8, RewardBox::unit(3)) >= -1e-15);

  for (int rep = 0; rep < 200; ++rep) {
    const Policy p = testing::random_policy(rng, 4), q = testing::random_policy(rng, 4);
    const RewardBox box = testing::random_box(rng, 4);
    const double alpha = rng.uniform();
    double brute = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 16; ++mask) {
      Vector r(4);
      for (int a = 0; a < 4; ++a) r(a) = (mask >> a) & 1 ? box.upper(a) : box.lower(a);
      brute = std::min(brute, (p.probs() - alpha * q.probs()).dot(r));
    }
    CHECK(box_safety_margin(p, q, alpha, box) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("safe_design_boxed") {
  Rng rng(4);
  SUBCASE("unit box recovers water-filling") {
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::Index k = 2 + Eigen::Index(rng.index(8));
      const Policy pi0 = testing::random_policy(rng, k);
      const double alpha = rng.uniform();
      const auto design = safe_design_boxed(pi0, alpha, RewardBox::unit(k));
      CHECK(design.gamma == doctest::Approx(water_fill(pi0, alpha).probs().minCoeff()).epsilon(1e-9));
    }
  }
  SUBCASE("alpha zero gives uniform") {
    const Policy pi0 = testing::random_policy(rng, 5);
    const auto design = safe_design_boxed(pi0, 0.0, testing::random_box(rng, 5));
    CHECK(design.gamma == doctest::Approx(0.2));
    CHECK((design.policy.probs() - Vector::Constant(5, 0.2)).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("K = 3 matches the bisection oracle") {
    for (int rep = 0; rep < 60; ++rep) {
      const Policy pi0 = testing::random_policy(rng, 3);
      const double alpha = rng.uniform();
      const RewardBox box = testing::random_box(rng, 3);
      const auto design = safe_design_boxed(pi0, alpha, box);
      CHECK(std::abs(design.gamma - testing::boxed_gamma_by_bisection(pi0, alpha, box)) <= 1e-7);
      CHECK(std::abs(design.gamma - design.policy.probs().minCoeff()) <= 1e-7);
      CHECK(box_safety_margin(design.policy, pi0, alpha, box) >= -1e-7);
    }
  }
  SUBCASE("dual form agrees") {
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::Index k = 2 + Eigen::Index(rng.index(6));
      const Policy pi0 = testing::random_policy(rng, k);
      const double alpha = rng.uniform();
      const RewardBox box = testing::random_box(rng, k);
      CHECK(std::abs(safe_design_boxed(pi0, alpha, box).gamma - testing::dual_form_gamma(pi0, alpha, box)) <=
            1e-7);
    }
  }
  SUBCASE("shrinking the box never hurts") {
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::Index k = 2 + Eigen::Index(rng.index(6));
      const Policy pi0 = testing::random_policy(rng, k);
      const double alpha = rng.uniform();
      const RewardBox outer = testing::random_box(rng, k);
      Vector l(k), u(k);
      for (Eigen::Index a = 0; a < k; ++a) {
        const double w = outer.upper(a) - outer.lower(a);
        const double x = outer.lower(a) + w * rng.uniform(), y = outer.lower(a) + w * rng.uniform();
        l(a) = std::min(x, y);
        u(a) = std::max(x, y);
      }
      const RewardBox inner(l, u);
      CHECK(safe_design_boxed(pi0, alpha, inner).gamma >= safe_design_boxed(pi0, alpha, outer).gamma - 1e-8);
    }
  }
}

TEST_CASE("mixture_optimality_verdict") {
  CHECK(std::holds_alternative<ProvablyOptimal>(mixture_optimality_verdict(Policy::uniform(4), 0.9)));
  CHECK(std::holds_alternative<ProvablyOptimal>(mixture_optimality_verdict(pol({0.2, 0.2, 0.6}), 0.9)));

  const auto verdict = mixture_optimality_verdict(pol({0.1, 0.3, 0.6}), 0.8);
  REQUIRE(std::holds_alternative<SuboptimalWitness>(verdict));
  const Policy& witness = std::get<SuboptimalWitness>(verdict).policy;
  CHECK(g_tabular(witness) == doctest::Approx(1.0 / 0.26));
  CHECK(g_tabular(witness) < 1.0 / 0.205);

  // Three distinct values, α just above the threshold 1/(K·max π0).
  const Policy pi0 = pol({0.1, 0.3, 0.6});
  const double threshold = 1.0 / (3 * 0.6);
  CHECK(std::holds_alternative<ProvablyOptimal>(mixture_optimality_verdict(pi0, threshold)));
  const double alpha = threshold + 0.01;
  const auto near = mixture_optimality_verdict(pi0, alpha);
  REQUIRE(std::holds_alternative<SuboptimalWitness>(near));
  const double g_mix = g_tabular(mixture_policy(pi0, beta_star(pi0, alpha)));
  CHECK(g_tabular(std::get<SuboptimalWitness>(near).policy) < g_mix - 1e-9);
}
