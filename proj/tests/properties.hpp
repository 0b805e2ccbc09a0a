#pragma once

// Randomized property checks shared by the unit suites and the acceptance
// runner. Each returns ok/detail instead of asserting so the acceptance
// binary can print one line per criterion. Seeds are fixed: reruns are
// bit-identical.

#include "hypstab/backstepping.hpp"
#include "hypstab/charfn.hpp"
#include "hypstab/sweep.hpp"
#include "hypstab/system.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace hypstab_tests {

struct PropertyResult {
    bool ok = true;
    std::string detail;
};

inline hypstab::SystemParams draw_params(std::mt19937& gen) {
    std::uniform_real_distribution<double> coup(-3.0, 3.0);
    std::uniform_real_distribution<double> speed(0.25, 4.0);
    std::uniform_real_distribution<double> len(0.0, 3.0);
    std::uniform_real_distribution<double> gain(-2.0, 2.0);
    return {coup(gen), coup(gen), speed(gen), len(gen), gain(gen)};
}

inline hypstab::Complex draw_sigma(std::mt19937& gen, double box = 10.0) {
    std::uniform_real_distribution<double> d(-box, box);
    return {d(gen), d(gen)};
}

// eval_char(p, conj sigma) == conj(eval_char(p, sigma)) for real parameters.
inline PropertyResult prop_conjugate_symmetry(int ndraws) {
    std::mt19937 gen(2024001);
    double worst = 0.0;
    for (int i = 0; i < ndraws; ++i) {
        const auto p = draw_params(gen);
        const auto sigma = draw_sigma(gen);
        const auto lhs = hypstab::eval_char(p, std::conj(sigma));
        const auto rhs = std::conj(hypstab::eval_char(p, sigma));
        const double scale = std::max(1e-300, std::abs(rhs));
        worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
    std::ostringstream os;
    os << "worst relative asymmetry " << worst << " over " << ndraws
       << " draws";
    return {worst < 1e-13, os.str()};
}

// cosh(eta L) and sinh(eta L)/(eta L) computed as functions of (eta L)^2
// match the direct hyperbolic evaluation at both square roots.
inline PropertyResult prop_branch_evenness(int ndraws) {
    std::mt19937 gen(2024002);
    std::uniform_real_distribution<double> mag(-8.0, 2.0); // log10 |w|
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    double worst = 0.0;
    for (int i = 0; i < ndraws; ++i) {
        const hypstab::Complex w =
            std::pow(10.0, mag(gen)) *
            std::exp(hypstab::Complex(0.0, ang(gen)));
        const auto [ch, sc] = hypstab::cosh_sinhc(w);
        for (const double sign : {1.0, -1.0}) {
            const hypstab::Complex z = sign * std::sqrt(w);
            const hypstab::Complex ch_ref = std::cosh(z);
            const hypstab::Complex sc_ref = std::sinh(z) / z;
            worst = std::max(worst,
                             std::abs(ch - ch_ref) / std::abs(ch_ref));
            worst = std::max(worst,
                             std::abs(sc - sc_ref) / std::abs(sc_ref));
        }
    }
    std::ostringstream os;
    os << "worst relative branch disagreement " << worst << " over "
       << ndraws << " draws";
    return {worst < 1e-12, os.str()};
}

// Control transformation followed by its inverse reproduces a random smooth
// field to solver tolerance on freshly solved kernels.
inline PropertyResult prop_transform_roundtrip(int ndraws) {
    std::mt19937 gen(2024004);
    std::uniform_real_distribution<double> coup(-2.0, 2.0);
    std::uniform_real_distribution<double> speed(0.5, 2.5);
    std::uniform_real_distribution<double> len(0.5, 2.5);
    std::uniform_real_distribution<double> freq(0.5, 4.0);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    constexpr int mesh = 48;
    double worst = 0.0;
    for (int i = 0; i < ndraws; ++i) {
        hypstab::SystemParams p{coup(gen), coup(gen), speed(gen), len(gen),
                                0.0};
        const auto kg = hypstab::solve_kernels(p, mesh);
        std::vector<double> y1(mesh + 1), y2(mesh + 1), z, w, r1, r2;
        const double w1 = freq(gen), w2 = freq(gen);
        const double a1 = amp(gen), a2 = amp(gen), c = amp(gen);
        for (int m = 0; m <= mesh; ++m) {
            const double x = p.L * m / mesh;
            y1[m] = a1 * std::sin(w1 * x) + c;
            y2[m] = a2 * std::cos(w2 * x) - c * x / p.L;
        }
        hypstab::control_transform(kg, y1, y2, z, w);
        hypstab::control_inverse(kg, z, w, r1, r2);
        double num = 0.0, den = 0.0;
        for (int m = 0; m <= mesh; ++m) {
            num += (r1[m] - y1[m]) * (r1[m] - y1[m]) +
                   (r2[m] - y2[m]) * (r2[m] - y2[m]);
            den += y1[m] * y1[m] + y2[m] * y2[m];
        }
        worst = std::max(worst, std::sqrt(num / std::max(den, 1e-30)));
    }
    std::ostringstream os;
    os << "worst relative round-trip error " << worst << " over " << ndraws
       << " draws";
    return {worst < 1e-6, os.str()};
}

// At L = 0 the characteristic function is the constant k - 1.
inline PropertyResult prop_L0_constancy(int ndraws) {
    std::mt19937 gen(2024003);
    double worst = 0.0;
    for (int i = 0; i < ndraws; ++i) {
        auto p = draw_params(gen);
        p.L = 0.0;
        const auto sigma = draw_sigma(gen, 50.0);
        worst = std::max(
            worst, std::abs(hypstab::eval_char(p, sigma) - (p.k - 1.0)));
    }
    std::ostringstream os;
    os << "worst |F - (k-1)| = " << worst << " over " << ndraws << " draws";
    return {worst < 1e-13, os.str()};
}

// Identical sweep specs export identical CSV bytes for every worker count,
// and any cell recomputed in isolation reproduces its in-sweep value.
inline PropertyResult prop_sweep_determinism(int ndraws) {
    std::mt19937 gen(2024005);
    std::uniform_real_distribution<double> coup(-2.0, 2.0);
    std::uniform_real_distribution<double> speed(0.5, 2.0);
    std::uniform_real_distribution<double> gain(-0.9, 0.9);
    std::uniform_real_distribution<double> len(0.2, 3.0);
    std::uniform_int_distribution<int> nodes(2, 4);
    std::uniform_int_distribution<int> margin_pick(0, 2);
    std::uniform_int_distribution<int> job_pick(2, 7);

    for (int i = 0; i < ndraws; ++i) {
        hypstab::SweepSpec spec;
        spec.a = coup(gen);
        spec.b = coup(gen);
        spec.lambda = speed(gen);
        double k1 = gain(gen), k2 = gain(gen);
        if (k1 == k2)
            k2 += 0.05;
        spec.k_min = std::min(k1, k2);
        spec.k_max = std::max(k1, k2);
        double L1 = len(gen), L2 = len(gen);
        if (L1 == L2)
            L2 += 0.05;
        spec.L_min = std::min(L1, L2);
        spec.L_max = std::max(L1, L2);
        spec.k_count = nodes(gen);
        spec.L_count = nodes(gen);
        const double margins[] = {0.0, 0.02, 0.1};
        spec.exclusion_margin = margins[margin_pick(gen)];
        if (i % 10 == 9) {
            spec.method = hypstab::SweepMethod::Simulation;
            spec.k_count = 2;
            spec.L_count = 2;
            spec.sim_cells = 20;
            spec.sim_t_final = 4.0;
        }
        const int jobs = job_pick(gen);

        const auto serial = hypstab::run_sweep(spec, 1);
        const auto parallel = hypstab::run_sweep(spec, jobs);
        const std::string csv1 = hypstab::sweep_csv(serial);
        const std::string csv2 = hypstab::sweep_csv(parallel);
        if (csv1 != csv2) {
            std::ostringstream os;
            os << "draw " << i << ": CSV differs between 1 and " << jobs
               << " workers";
            return {false, os.str()};
        }

        std::uniform_int_distribution<int> pick_k(0, spec.k_count - 1);
        std::uniform_int_distribution<int> pick_L(0, spec.L_count - 1);
        const int ik = pick_k(gen), il = pick_L(gen);
        const auto lone = hypstab::evaluate_cell(spec, ik, il);
        const auto& ref = serial.at(ik, il);
        const bool same =
            lone.k == ref.k && lone.L == ref.L &&
            lone.marginal == ref.marginal &&
            lone.n_unstable == ref.n_unstable && lone.rate == ref.rate &&
            lone.agree == ref.agree && lone.error == ref.error;
        if (!same) {
            std::ostringstream os;
            os << "draw " << i << ": cell (" << ik << "," << il
               << ") recomputed in isolation differs from its sweep value";
            return {false, os.str()};
        }
    }
    std::ostringstream os;
    os << ndraws << " random sweeps byte-identical across worker counts";
    return {true, os.str()};
}

} // namespace hypstab_tests
