#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "hypstab/charfn.hpp"
#include "hypstab/errors.hpp"
#include "hypstab/marginal.hpp"
#include "hypstab/spectral.hpp"

using namespace hypstab;

TEST_SUITE("spectral") {

TEST_CASE("pinned unstable counts") {
    auto r0 = count_unstable({1.0, 1.0, 1.0, 1.0, 0.0});
    CHECK(r0.n_unstable == 0);
    CHECK(r0.verdict == Verdict::Stable);
    CHECK(r0.radius_used > 0.0);
    CHECK(r0.min_abs_on_contour > 0.0);

    auto r1 = count_unstable({1.0, 1.0, 1.0, 2.5, 0.0});
    CHECK(r1.n_unstable == 1);
    CHECK(r1.verdict == Verdict::Unstable);

    CHECK(count_unstable({1.0, 1.0, 1.0, 4.0, 0.0}).n_unstable == 1);
    CHECK(count_unstable({1.0, 1.0, 1.0, 6.0, 0.0}).n_unstable == 2);
    CHECK(count_unstable({-4.0, 1.0, 1.0, 1.0, 0.0}).n_unstable == 1);

    // Zero-length interval: the determinant is constant.
    auto rz = count_unstable({3.0, -2.0, 0.7, 0.0, 0.3});
    CHECK(rz.n_unstable == 0);
    CHECK(rz.verdict == Verdict::Stable);
}

TEST_CASE("refined real roots match the counted blocks") {
    // One real unstable root for L = 2.5 and L = 4, two for L = 6.
    const SystemParams p25{1.0, 1.0, 1.0, 2.5, 0.0};
    const Complex s25 = refine_root(p25, Complex(0.2, 0.0), 1e-12);
    CHECK(s25.real() ==
          doctest::Approx(0.192693320349535086).epsilon(1e-9));
    CHECK(std::abs(s25.imag()) < 1e-9);
    CHECK(std::abs(eval_char(p25, s25)) < 1e-12);

    const SystemParams p4{1.0, 1.0, 1.0, 4.0, 0.0};
    const Complex s4 = refine_root(p4, Complex(0.7, 0.0), 1e-12);
    CHECK(s4.real() == doctest::Approx(0.723636965708008125).epsilon(1e-9));

    const SystemParams p6{1.0, 1.0, 1.0, 6.0, 0.0};
    const Complex s6a = refine_root(p6, Complex(0.3, 0.0), 1e-12);
    const Complex s6b = refine_root(p6, Complex(0.9, 0.0), 1e-12);
    CHECK(s6a.real() == doctest::Approx(0.329217568465003).epsilon(1e-9));
    CHECK(s6b.real() == doctest::Approx(0.876328165450192).epsilon(1e-9));
}

TEST_CASE("marginal verdicts on the curves") {
    // (1,1,1) lowest curve at k = 0 sits at L = 3 pi / 4.
    auto m1 = count_unstable({1.0, 1.0, 1.0, 3.0 * M_PI / 4.0, 0.0});
    CHECK(m1.verdict == Verdict::Marginal);
    // (0,1,1) curve through (k, L) = (-1/2, 3).
    auto m2 = count_unstable({0.0, 1.0, 1.0, 3.0, -0.5});
    CHECK(m2.verdict == Verdict::Marginal);
}

TEST_CASE("winding count is stable under radius doubling") {
    const SystemParams probes[] = {{1.0, 1.0, 1.0, 2.5, 0.0},
                                   {1.0, 1.0, 1.0, 1.0, 0.0},
                                   {-4.0, 1.0, 1.0, 1.0, 0.0},
                                   {-1.0, -2.0, 1.0, 0.9, -0.5},
                                   {2.0, 1.5, 3.0, 2.0, 0.4}};
    for (const auto& p : probes) {
        const auto r = count_unstable(p);
        ContourSpec cs;
        cs.radius = 2.0 * r.radius_used;
        const auto r2 = count_unstable(p, cs);
        CHECK(r2.n_unstable == r.n_unstable);
    }
}

TEST_CASE("count is constant along paths inside one block") {
    // A path strictly below the first (1,1,1) curve ...
    for (int i = 0; i <= 6; ++i) {
        const double t = double(i) / 6.0;
        const SystemParams p{1.0, 1.0, 1.0, 1.0 + 0.4 * t,
                             -0.5 + 1.0 * t};
        CHECK(count_unstable(p).n_unstable == 0);
    }
    // ... and one between the first and second curves.
    for (int i = 0; i <= 6; ++i) {
        const double t = double(i) / 6.0;
        const SystemParams p{1.0, 1.0, 1.0, 3.3 + 1.2 * t,
                             -0.5 + 1.0 * t};
        CHECK(count_unstable(p).n_unstable == 1);
    }
}

TEST_CASE("count increments by one across a marginal curve") {
    auto curves = marginal_curves(1.0, 1.0, 1.0, 10.0);
    REQUIRE(!curves.empty());
    const auto& c0 = curves.front();
    for (int i = 0; i < 10; ++i) {
        const double k = -0.8 + 1.6 * double(i) / 9.0;
        const double L0 = c0.eval(k);
        const auto below =
            count_unstable({1.0, 1.0, 1.0, L0 - 0.01, k});
        const auto above =
            count_unstable({1.0, 1.0, 1.0, L0 + 0.01, k});
        CHECK(above.n_unstable - below.n_unstable == 1);
    }
}

TEST_CASE("winding count agrees with the closed-form block index") {
    std::mt19937 rng(88001);
    std::uniform_real_distribution<double> da(-3.0, 3.0);
    std::uniform_real_distribution<double> dl(0.25, 4.0);
    std::uniform_real_distribution<double> dL(0.2, 5.0);
    std::uniform_real_distribution<double> dk(-0.95, 0.95);
    int tested = 0;
    while (tested < 60) {
        SystemParams p{da(rng), da(rng), dl(rng), dL(rng), dk(rng)};
        // Stay clearly off the marginal set so both routes are defined.
        auto curves = marginal_curves(p.a, p.b, p.lambda, p.L + 2.0);
        double dist = std::numeric_limits<double>::infinity();
        for (const auto& c : curves)
            if (c.contains(p.k))
                dist = std::min(dist, std::abs(c.eval(p.k) - p.L));
        if (dist < 0.02 * (1.0 + p.L))
            continue;
        auto bi = block_index(p);
        REQUIRE(bi.has_value());
        auto rep = count_unstable(p);
        CHECK(rep.verdict != Verdict::Marginal);
        CHECK(rep.n_unstable == *bi);
        ++tested;
    }
}

TEST_CASE("asymptotic seeds for |k| > 1") {
    auto s1 = seed_unstable_roots({1.0, 1.0, 1.0, 1.0, 2.0}, 0, 0);
    REQUIRE(s1.size() == 1);
    CHECK(s1[0].real() == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
    CHECK(s1[0].imag() == doctest::Approx(0.0));

    auto s2 = seed_unstable_roots({1.0, 1.0, 1.0, 1.0, -2.0}, 0, 0);
    REQUIRE(s2.size() == 1);
    CHECK(s2[0].real() == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
    CHECK(s2[0].imag() == doctest::Approx(0.5 * M_PI).epsilon(1e-15));

    auto s3 = seed_unstable_roots({1.0, 1.0, 2.0, 2.0, 2.0}, 1, 1);
    REQUIRE(s3.size() == 1);
    CHECK(s3[0].real() ==
          doctest::Approx(std::log(2.0) / 3.0).epsilon(1e-15));
    CHECK(s3[0].imag() == doctest::Approx(2.0 * M_PI / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(seed_unstable_roots({1.0, 1.0, 1.0, 1.0, 0.5}, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(seed_unstable_roots({1.0, 1.0, 1.0, 0.0, 2.0}, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(seed_unstable_roots({1.0, 1.0, 1.0, 1.0, 2.0}, 3, 1),
                    std::invalid_argument);
}

TEST_CASE("refinement lands on genuine unstable roots with conjugates") {
    const SystemParams p{1.0, 1.0, 1.0, 1.0, 2.0};
    auto seeds = seed_unstable_roots(p, 2, 6);
    for (const auto& s : seeds) {
        const Complex root = refine_root(p, s, 1e-10);
        CHECK(root.real() > 0.0);
        CHECK(std::abs(eval_char(p, root)) < 1e-10);
        // Conjugate pairing.
        CHECK(std::abs(eval_char(p, std::conj(root))) < 1e-10);
        // The seed is asymptotically sharp: the polish is a small move.
        CHECK(std::abs(root - s) < 0.25);
    }
}

TEST_CASE("refinement finds the k = 1 root at the origin") {
    const SystemParams p{1.0, 1.0, 1.0, M_PI, 1.0};
    // The origin is a double root here (a merging conjugate pair), so the
    // residual bound pins the location only to about sqrt(tol).
    const Complex root = refine_root(p, Complex(0.0, 0.1), 1e-13);
    CHECK(std::abs(root) < 1e-5);
    CHECK(std::abs(eval_char(p, root)) < 1e-13);
}

TEST_CASE("refinement never returns a silent bad value") {
    const SystemParams p{1.0, 1.0, 1.0, 1.0, 0.0};
    try {
        const Complex root = refine_root(p, Complex(50.0, 50.0), 1e-10);
        CHECK(std::abs(eval_char(p, root)) < 1e-10);
    } catch (const NumericalError&) {
        // NoConvergence / DerivativeVanishes are acceptable outcomes.
    }
    CHECK_THROWS_AS(refine_root(p, Complex(0.1, 0.0), -1.0),
                    std::invalid_argument);
}

TEST_CASE("explicit k = 1 root family") {
    const SystemParams p{1.0, 1.0, 1.0, M_PI, 1.0};
    auto roots = k1_imaginary_roots(p, 2);
    REQUIRE(roots.size() == 3);
    CHECK(roots[0] == Complex(1.0, 0.0));
    CHECK(std::abs(roots[1]) < 1e-15);
    CHECK(roots[2].real() == doctest::Approx(0.0));
    CHECK(roots[2].imag() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));

    // n >= 1 entries are genuine determinant roots; the n = 0 entry solves
    // only the factored form (its linear cofactor is nonzero here).
    CHECK(std::abs(eval_char(p, roots[1])) < 1e-9);
    CHECK(std::abs(eval_char(p, roots[2])) < 1e-9);
    CHECK(std::abs(eval_char(p, roots[0])) > 1.0);

    const SystemParams q{1.0, 1.0, 1.0, 1.0, 1.0};
    auto r2 = k1_imaginary_roots(q, 1);
    REQUIRE(r2.size() == 2);
    CHECK(r2[1].imag() ==
          doctest::Approx(std::sqrt(M_PI * M_PI - 1.0)).epsilon(1e-15));
    CHECK(std::abs(eval_char(q, r2[1])) < 1e-9);

    CHECK_THROWS_AS(k1_imaginary_roots({1.0, 1.0, 1.0, 1.0, 0.9}, 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(k1_imaginary_roots({1.0, 1.0, 1.0, 0.0, 1.0}, 2),
                    std::invalid_argument);
}

TEST_CASE("argument and contour validation") {
    CHECK_THROWS_AS(count_unstable({1.0, 1.0, 1.0, 1.0, 1.5}),
                    std::invalid_argument);
    ContourSpec bad_counts;
    bad_counts.radius = 10.0;
    bad_counts.n_arc = 32;
    CHECK_THROWS_AS(count_unstable({1.0, 1.0, 1.0, 1.0, 0.0}, bad_counts),
                    std::invalid_argument);
    ContourSpec bad_radius;
    bad_radius.radius = -1.0;
    CHECK_THROWS_AS(count_unstable({1.0, 1.0, 1.0, 1.0, 0.0}, bad_radius),
                    std::invalid_argument);
}

} // TEST_SUITE
