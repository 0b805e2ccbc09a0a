#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hypstab/charfn.hpp"
#include "hypstab/marginal.hpp"

using namespace hypstab;

namespace {

// Smallest height over gains admitting a curve; +inf on a curve-free column.
double column_height(const std::vector<MarginalCurve>& curves, double k) {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& c : curves)
        if (c.contains(k))
            h = std::min(h, c.eval(k));
    return h;
}

} // namespace

TEST_SUITE("marginal") {

TEST_CASE("positive-product family: pinned values and spacing") {
    auto curves = marginal_curves(1.0, 1.0, 1.0, 10.0);
    REQUIRE(curves.size() == 3); // infima pi/2 + n pi <= 10 for n = 0..2
    CHECK(curves[0].branch_index == 0);
    CHECK(curves[2].branch_index == 2);

    // arccot((k+1)/(k-1)) at k = 0 is 3 pi / 4.
    CHECK(curves[0].eval(0.0) ==
          doctest::Approx(2.356194490192344929).epsilon(1e-14));

    // (-1,-1): arccot(1/3) = atan(3) at k = -0.5.
    auto neg = marginal_curves(-1.0, -1.0, 1.0, 10.0);
    REQUIRE(!neg.empty());
    CHECK(neg[0].eval(-0.5) ==
          doctest::Approx(1.249045772398254426).epsilon(1e-14));

    // Successive branches are parallel with gap pi sqrt(lambda/ab).
    std::mt19937 rng(77001);
    std::uniform_real_distribution<double> dk(-0.99, 0.99);
    auto c23 = marginal_curves(2.0, 1.5, 3.0, 25.0);
    REQUIRE(c23.size() >= 3);
    const double gap = M_PI * std::sqrt(3.0 / 3.0);
    for (int i = 0; i < 50; ++i) {
        const double k = dk(rng);
        CHECK(c23[1].eval(k) - c23[0].eval(k) ==
              doctest::Approx(gap).epsilon(1e-12));
        CHECK(c23[2].eval(k) - c23[1].eval(k) ==
              doctest::Approx(gap).epsilon(1e-12));
    }
}

TEST_CASE("negative-product family: domains and pinned values") {
    // a = -4, b = 1: full gain interval, decreasing branch.
    auto c1 = marginal_curves(-4.0, 1.0, 1.0, 10.0);
    REQUIRE(c1.size() == 1);
    CHECK(c1[0].k_min == -1.0);
    CHECK(c1[0].k_max == 1.0);
    CHECK(c1[0].eval(0.0) ==
          doctest::Approx(0.274653072167027423).epsilon(1e-14));

    // a = 1, b = -4: branch lives only on (1/2, 1).
    auto c2 = marginal_curves(1.0, -4.0, 1.0, 10.0);
    REQUIRE(c2.size() == 1);
    CHECK(c2[0].k_min == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c2[0].k_max == 1.0);
    CHECK(!c2[0].contains(0.25));
    CHECK(c2[0].contains(0.75));
    CHECK(c2[0].eval(0.75) ==
          doctest::Approx(0.127706405941497671).epsilon(1e-14));

    // a = 1, b = -0.5 (so 0 > b >= -lambda a): no marginal branch.
    CHECK(marginal_curves(1.0, -0.5, 1.0, 10.0).empty());

    // Degenerate boundary b = -lambda a: the would-be branch sits at
    // infinite height everywhere, so nothing is returned.
    CHECK(marginal_curves(-1.0, 2.0, 2.0, 1e4).empty());

    // a = -1, b = 2: branch on (-1, k1) with k1 = -sqrt(1/2).
    auto c3 = marginal_curves(-1.0, 2.0, 1.0, 10.0);
    REQUIRE(c3.size() == 1);
    CHECK(c3[0].k_min == -1.0);
    CHECK(c3[0].k_max == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("degenerate-product family") {
    // a = 0, b > 0: branch on (-1, 0], diverging at k = 0.
    auto c1 = marginal_curves(0.0, 1.0, 1.0, 10.0);
    REQUIRE(c1.size() == 1);
    CHECK(c1[0].k_min == -1.0);
    CHECK(c1[0].k_max == 0.0);
    CHECK(c1[0].closed_max);
    CHECK(c1[0].eval(-1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(c1[0].eval(-0.5) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(std::isinf(c1[0].eval(0.0)));

    // a = 0, b < 0: mirrored branch on [0, 1).
    auto c2 = marginal_curves(0.0, -1.0, 1.0, 10.0);
    REQUIRE(c2.size() == 1);
    CHECK(c2[0].k_min == 0.0);
    CHECK(c2[0].closed_min);
    CHECK(c2[0].eval(0.5) == doctest::Approx(1.0).epsilon(1e-15));

    // b = 0, a < 0: straight line L = (1 - k)/|a| over the whole interval.
    auto c3 = marginal_curves(-1.0, 0.0, 1.0, 10.0);
    REQUIRE(c3.size() == 1);
    CHECK(c3[0].eval(-0.5) == doctest::Approx(1.5).epsilon(1e-15));

    // b = 0, a >= 0: nothing.
    CHECK(marginal_curves(1.0, 0.0, 1.0, 10.0).empty());
    CHECK(marginal_curves(0.0, 0.0, 1.0, 10.0).empty());
}

TEST_CASE("height cap filters branches by their infimum") {
    // Lowest (1,1,1) branch never descends below pi/2.
    CHECK(marginal_curves(1.0, 1.0, 1.0, 1.0).empty());
    CHECK(marginal_curves(1.0, 1.0, 1.0, 1.6).size() == 1);
    // The (-4,1,1) branch descends to zero, so any cap keeps it.
    CHECK(marginal_curves(-4.0, 1.0, 1.0, 0.1).size() == 1);
}

TEST_CASE("points on a marginal curve are roots of the boundary determinant") {
    // Independent cross-check: the curves were derived in closed form, the
    // determinant is evaluated by the series/exponential kernel. On every
    // curve the determinant must vanish at sigma = 0.
    struct Regime { double a, b, lambda; };
    const Regime regimes[] = {
        {1.0, 1.0, 1.0},   {2.0, 1.5, 3.0},  {-1.0, -2.0, 1.0},
        {-4.0, 1.0, 1.0},  {1.0, -4.0, 1.0}, {-1.0, 2.0, 1.0},
        {0.0, 1.0, 1.0},   {0.0, -2.0, 0.5}, {-1.5, 0.0, 1.0},
    };
    std::mt19937 rng(77002);
    for (const auto& r : regimes) {
        auto curves = marginal_curves(r.a, r.b, r.lambda, 12.0);
        REQUIRE(!curves.empty());
        for (const auto& c : curves) {
            const double span = c.k_max - c.k_min;
            std::uniform_real_distribution<double> dk(c.k_min + 0.05 * span,
                                                      c.k_max - 0.05 * span);
            for (int i = 0; i < 20; ++i) {
                const double k = dk(rng);
                const double L = c.eval(k);
                if (!std::isfinite(L) || L > 12.0)
                    continue;
                SystemParams p{r.a, r.b, r.lambda, L, k};
                CHECK(std::abs(eval_char(p, Complex(0.0, 0.0))) < 1e-9);
            }
        }
    }
}

TEST_CASE("critical length: closed forms") {
    // Both couplings positive.
    CHECK(critical_length(1.0, 2.0, 3.0).value() ==
          doctest::Approx(3.847649490485592287).epsilon(1e-14));
    CHECK(critical_length(1.0, 1.0, 1.0).value() ==
          doctest::Approx(M_PI).epsilon(1e-14));
    // Both negative.
    CHECK(critical_length(-1.0, -1.0, 1.0).value() ==
          doctest::Approx(M_PI / 2).epsilon(1e-14));
    // Mixed with -lambda a > b > 0.
    CHECK(critical_length(-4.0, 1.0, 1.0).value() ==
          doctest::Approx(0.549306144334054846).epsilon(1e-14));
    // One-sided coupling.
    CHECK(critical_length(-1.0, 0.0, 1.0).value() ==
          doctest::Approx(2.0).epsilon(1e-15));
    // Every remaining sign pattern is stabilizable at all lengths.
    CHECK(!critical_length(1.0, -4.0, 1.0).has_value());
    CHECK(!critical_length(0.0, 1.0, 1.0).has_value());
    CHECK(!critical_length(0.0, -1.0, 1.0).has_value());
    CHECK(!critical_length(1.0, 0.0, 1.0).has_value());
    CHECK(!critical_length(0.0, 0.0, 1.0).has_value());
    CHECK(!critical_length(1.0, -0.5, 1.0).has_value());
}

TEST_CASE("critical length equals the tallest stabilizable column") {
    struct Regime { double a, b, lambda; };
    const Regime finite[] = {
        {1.0, 2.0, 3.0}, {-1.0, -1.0, 1.0}, {-4.0, 1.0, 1.0},
        {-1.0, 0.0, 1.0}, {2.5, 0.7, 1.3}, {-0.8, -2.2, 0.6},
        {-3.0, 0.5, 2.0},
    };
    for (const auto& r : finite) {
        const double lc = critical_length(r.a, r.b, r.lambda).value();
        auto curves = marginal_curves(r.a, r.b, r.lambda, 4.0 * lc + 10.0);
        double sup = 0.0;
        const int m = 20000;
        for (int i = 0; i <= m; ++i) {
            const double k =
                -1.0 + 1e-13 + (2.0 - 2e-13) * double(i) / m;
            const double h = column_height(curves, k);
            REQUIRE(std::isfinite(h)); // finite regime: every column capped
            sup = std::max(sup, h);
        }
        CHECK(sup == doctest::Approx(lc).epsilon(1e-6));
    }

    // Infinite regimes must expose a curve-free column.
    const Regime infinite[] = {
        {1.0, -4.0, 1.0}, {0.0, 1.0, 1.0}, {0.0, -1.0, 1.0},
        {1.0, 0.0, 1.0}, {1.0, -0.5, 1.0},
    };
    for (const auto& r : infinite) {
        REQUIRE(!critical_length(r.a, r.b, r.lambda).has_value());
        auto curves = marginal_curves(r.a, r.b, r.lambda, 1e6);
        bool free_column = false;
        const int m = 20000;
        for (int i = 0; i <= m && !free_column; ++i) {
            const double k =
                -1.0 + 1e-13 + (2.0 - 2e-13) * double(i) / m;
            free_column = !std::isfinite(column_height(curves, k));
        }
        CHECK(free_column);
    }
}

TEST_CASE("block index counts curves strictly below the length") {
    CHECK(block_index({-4.0, 1.0, 1.0, 1.0, 0.0}).value() == 1);
    CHECK(block_index({1.0, 1.0, 1.0, 1.0, 0.0}).value() == 0);
    CHECK(block_index({1.0, 1.0, 1.0, 2.5, 0.0}).value() == 1);
    CHECK(block_index({1.0, 1.0, 1.0, 6.0, 0.0}).value() == 2);
    // Exactly on a curve: no block is assigned.
    CHECK(!block_index({1.0, 1.0, 1.0, 2.356194490192344929, 0.0})
               .has_value());
    CHECK_THROWS_AS(block_index({1.0, 1.0, 1.0, 1.0, 1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(block_index({1.0, 1.0, 1.0, 1.0, -1.5}),
                    std::invalid_argument);
}

TEST_CASE("block index jumps by one across a curve") {
    struct Probe { double a, b, lambda; };
    const Probe probes[] = {{1.0, 1.0, 1.0}, {-4.0, 1.0, 1.0},
                            {-1.0, -2.0, 1.0}, {0.0, 1.0, 1.0}};
    std::mt19937 rng(77003);
    for (const auto& pr : probes) {
        auto curves = marginal_curves(pr.a, pr.b, pr.lambda, 12.0);
        REQUIRE(!curves.empty());
        const auto& c = curves.front();
        const double span = c.k_max - c.k_min;
        std::uniform_real_distribution<double> dk(c.k_min + 0.1 * span,
                                                  c.k_max - 0.1 * span);
        int tested = 0;
        for (int i = 0; i < 40 && tested < 10; ++i) {
            const double k = dk(rng);
            const double L = c.eval(k);
            if (!std::isfinite(L) || L > 11.0 || L < 0.05)
                continue;
            const double eps = 0.01;
            auto below = block_index({pr.a, pr.b, pr.lambda, L - eps, k});
            auto above = block_index({pr.a, pr.b, pr.lambda, L + eps, k});
            REQUIRE(below.has_value());
            REQUIRE(above.has_value());
            CHECK(*above - *below == 1);
            ++tested;
        }
        CHECK(tested == 10);
    }
}

TEST_CASE("gain threshold: crossings with pinned locations") {
    // Increasing rational branch: (k-1)/k = 2.5 at k = -2/3.
    auto t1 = threshold_k(0.0, 1.0, 1.0, 2.5);
    REQUIRE(t1.kind == ThresholdKind::Crossing);
    CHECK(t1.k == doctest::Approx(-2.0 / 3.0).epsilon(1e-9));
    CHECK(t1.stable_above);

    // Decreasing mirrored branch: (1-k)/k = 0.5 at k = 2/3.
    auto t2 = threshold_k(0.0, -1.0, 1.0, 0.5);
    REQUIRE(t2.kind == ThresholdKind::Crossing);
    CHECK(t2.k == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(!t2.stable_above);

    // arccot branch of (1,1,1) crosses L = 2.8 at cot-solved gain.
    auto t3 = threshold_k(1.0, 1.0, 1.0, 2.8);
    REQUIRE(t3.kind == ThresholdKind::Crossing);
    CHECK(t3.k == doctest::Approx(0.475437834934103).epsilon(1e-9));
    CHECK(t3.stable_above);

    // The acceptance regime: decreasing branch, stable side below.
    auto t4 = threshold_k(-1.0, -2.0, 1.0, 0.9);
    REQUIRE(t4.kind == ThresholdKind::Crossing);
    CHECK(t4.k == doctest::Approx(-0.232348288535669052).epsilon(1e-8));
    CHECK(!t4.stable_above);
}

TEST_CASE("gain threshold: no crossing") {
    CHECK(threshold_k(1.0, 1.0, 1.0, 1.0).kind == ThresholdKind::AllStable);
    CHECK(threshold_k(1.0, -0.5, 1.0, 5.0).kind == ThresholdKind::AllStable);
    CHECK(threshold_k(-1.0, 0.0, 1.0, 3.0).kind ==
          ThresholdKind::AllUnstable);
    CHECK(threshold_k(0.0, 1.0, 1.0, 1.5).kind == ThresholdKind::AllStable);
}

TEST_CASE("gain threshold agrees with the block index on both sides") {
    struct Probe { double a, b, lambda, L; };
    const Probe probes[] = {{0.0, 1.0, 1.0, 2.5},
                            {1.0, 1.0, 1.0, 2.8},
                            {-1.0, -2.0, 1.0, 0.9},
                            {-4.0, 1.0, 1.0, 0.3},
                            {2.0, 1.5, 3.0, 2.8}};
    for (const auto& pr : probes) {
        auto t = threshold_k(pr.a, pr.b, pr.lambda, pr.L);
        REQUIRE(t.kind == ThresholdKind::Crossing);
        const double d = 0.01;
        const double ks = t.stable_above ? t.k + d : t.k - d;
        const double ku = t.stable_above ? t.k - d : t.k + d;
        CHECK(block_index({pr.a, pr.b, pr.lambda, pr.L, ks}).value() == 0);
        CHECK(block_index({pr.a, pr.b, pr.lambda, pr.L, ku}).value() >= 1);
        // And the curve itself passes through (k*, L).
        auto curves = marginal_curves(pr.a, pr.b, pr.lambda, pr.L + 1.0);
        CHECK(std::abs(curves.front().eval(t.k) - pr.L) < 1e-7);
    }
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(marginal_curves(1.0, 1.0, 0.0, 10.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(marginal_curves(1.0, 1.0, 1.0, -2.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(critical_length(1.0, 1.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(threshold_k(1.0, 1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(threshold_k(1.0, 1.0, -1.0, 1.0), std::invalid_argument);
}

} // TEST_SUITE
