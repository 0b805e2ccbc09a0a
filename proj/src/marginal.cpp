#include "hypstab/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hypstab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOnCurveTol = 1e-9;
constexpr double kBisectTol = 1e-10;

// arccot with range (0, pi): the angle of the point (x, 1). Continuous
// across x = 0 and exact at +-infinity, which makes endpoint limits of the
// curves evaluate cleanly.
double arccot(double x) { return std::atan2(1.0, x); }

// coth^{-1}(x) for x > 1; diverges as x -> 1+.
double acoth(double x) { return std::atanh(1.0 / x); }

// Every branch is monotone in k (the sign of d(eval)/dk is constant per
// family), so the infimum over the domain sits at an endpoint. Open
// endpoints are probed a hair inside.
double infimum_height(const MarginalCurve& c) {
    const double nudge = 1e-13 * (c.k_max - c.k_min);
    const double lo = c.closed_min ? c.k_min : c.k_min + nudge;
    const double hi = c.closed_max ? c.k_max : c.k_max - nudge;
    return std::min(c.eval(lo), c.eval(hi));
}

} // namespace

std::vector<MarginalCurve> marginal_curves(double a, double b, double lambda,
                                           double max_height) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be strictly positive");
    if (!(max_height > 0.0) || !std::isfinite(max_height))
        throw std::invalid_argument("max_height must be positive and finite");

    std::vector<MarginalCurve> out;
    const double ab = a * b;

    if (ab == 0.0) {
        MarginalCurve c;
        c.eval = [a, b, lambda](double k) {
            const double den = k * b / lambda + a;
            if (den == 0.0)
                return kInf;
            return (k - 1.0) / den;
        };
        if (a == 0.0 && b > 0.0) {
            c.k_min = -1.0;
            c.k_max = 0.0;
            c.closed_max = true; // height diverges at k = 0 itself
        } else if (a == 0.0 && b < 0.0) {
            c.k_min = 0.0;
            c.k_max = 1.0;
            c.closed_min = true;
        } else if (b == 0.0 && a < 0.0) {
            c.k_min = -1.0;
            c.k_max = 1.0;
        } else {
            return out; // a >= 0, b = 0: no marginal branch at all
        }
        if (infimum_height(c) <= max_height)
            out.push_back(std::move(c));
        return out;
    }

    if (ab > 0.0) {
        // L_{k,n} = sqrt(lambda/ab) (arccot(c(k)) + n pi) on (-1, 1).
        const double s = std::sqrt(lambda / ab);
        const double r = std::sqrt(ab / lambda);
        for (int n = 0; n * M_PI * s <= max_height; ++n) {
            MarginalCurve c;
            c.branch_index = n;
            c.eval = [a, b, lambda, s, r, n](double k) {
                const double cot = (k * b / lambda + a) / ((k - 1.0) * r);
                return s * (arccot(cot) + n * M_PI);
            };
            if (infimum_height(c) > max_height)
                break; // higher branches only rise further
            out.push_back(std::move(c));
        }
        return out;
    }

    // ab < 0: at most one branch, L_k = sqrt(-lambda/ab) coth^{-1}(h(k)),
    // defined exactly where h(k) > 1; the admissible gain interval follows
    // the sign pattern of (a, b) with pivot k1 = sqrt(-lambda a/b) sgn(a).
    const double r = std::sqrt(-ab / lambda);
    const double s = std::sqrt(-lambda / ab);
    MarginalCurve c;
    c.eval = [a, b, lambda, r, s](double k) {
        const double h = (k * b / lambda + a) / ((k - 1.0) * r);
        if (!(h > 1.0))
            return kInf;
        return s * acoth(h);
    };
    const double k1 = std::sqrt(-lambda * a / b) * (a > 0 ? 1.0 : -1.0);
    const double nla = -lambda * a;
    if (nla >= b && b > 0.0) {
        c.k_min = -1.0;
        c.k_max = 1.0;
    } else if (0.0 > nla && nla > b) {
        c.k_min = k1;
        c.k_max = 1.0;
    } else if (b > nla && nla > 0.0) {
        c.k_min = -1.0;
        c.k_max = k1;
    } else {
        return out; // 0 > b >= -lambda a: empty marginal set
    }
    if (infimum_height(c) <= max_height)
        out.push_back(std::move(c));
    return out;
}

std::optional<double> critical_length(double a, double b, double lambda) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be strictly positive");
    if (a > 0.0 && b > 0.0)
        return std::sqrt(lambda / (a * b)) * M_PI;
    if (a < 0.0 && b < 0.0)
        return std::sqrt(lambda / (a * b)) *
               arccot((b - lambda * a) / (2.0 * std::sqrt(lambda * a * b)));
    if (-lambda * a > b && b > 0.0)
        return std::sqrt(-lambda / (a * b)) *
               acoth((b - lambda * a) /
                     (2.0 * std::sqrt(-lambda * a * b)));
    if (b == 0.0 && a < 0.0)
        return -2.0 / a;
    return std::nullopt; // stabilizable for every interval length
}

std::optional<int> block_index(const SystemParams& p) {
    p.validate();
    if (!(std::abs(p.k) < 1.0))
        throw std::invalid_argument("block index requires |k| < 1");
    int n = 0;
    for (const auto& c : marginal_curves(p.a, p.b, p.lambda, p.L + 1.0)) {
        if (!c.contains(p.k))
            continue;
        const double v = c.eval(p.k);
        if (std::abs(p.L - v) < kOnCurveTol)
            return std::nullopt;
        if (v < p.L)
            ++n;
    }
    return n;
}

GainThreshold threshold_k(double a, double b, double lambda, double L) {
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be strictly positive");
    if (!(L > 0.0))
        throw std::invalid_argument("L must be strictly positive");

    const auto curves = marginal_curves(a, b, lambda, L + 1.0);
    if (curves.empty())
        return {ThresholdKind::AllStable};
    const MarginalCurve& low = curves.front();

    const double span = low.k_max - low.k_min;
    const double nudge = 1e-12 * span;
    const double lo = low.closed_min ? low.k_min : low.k_min + nudge;
    const double hi = low.closed_max ? low.k_max : low.k_max - nudge;

    // The branch is monotone, so one scan plus bisection finds the single
    // crossing when there is one.
    const int m = 2048;
    auto above = [&](double k) { return low.eval(k) - L > 0.0; };
    double prev_k = lo;
    bool prev_above = above(lo);
    bool crossing = false;
    double blo = 0.0, bhi = 0.0;
    for (int i = 1; i <= m; ++i) {
        const double k = lo + (hi - lo) * double(i) / m;
        const bool cur = above(k);
        if (cur != prev_above) {
            blo = prev_k;
            bhi = k;
            crossing = true;
            break;
        }
        prev_k = k;
        prev_above = cur;
    }
    if (!crossing)
        return {prev_above ? ThresholdKind::AllStable
                           : ThresholdKind::AllUnstable};

    const bool lo_above = above(blo);
    while (bhi - blo > kBisectTol) {
        const double mid = 0.5 * (blo + bhi);
        if (above(mid) == lo_above)
            blo = mid;
        else
            bhi = mid;
    }
    GainThreshold t;
    t.kind = ThresholdKind::Crossing;
    t.k = 0.5 * (blo + bhi);
    const double d = std::max(1e-7 * span, 1e-9);
    t.stable_above = low.eval(std::min(t.k + d, hi)) >
                     low.eval(std::max(t.k - d, lo));
    return t;
}

} // namespace hypstab
