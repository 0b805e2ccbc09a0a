#include "hypstab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hypstab/charfn.hpp"
#include "hypstab/errors.hpp"

namespace hypstab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSigmaZeroTol = 1e-9;  // |F(0)| threshold, scaled by 1+|a|+|b|
constexpr int kMaxDoublings = 8;

struct Probe {
    double theta;  // argument of F: Im(eta L) plus the remainder's argument
    double abs_h;  // |h|, the exponent-free remainder
    double abs_f;  // exact |F| (infinite when the exponent is out of range)
};

Probe probe(const SystemParams& p, Complex sigma) {
    const ScaledChar s = eval_char_scaled(p, sigma);
    Probe r;
    r.theta = std::imag(s.exponent) + std::arg(s.h);
    r.abs_h = std::abs(s.h);
    const double re = std::real(s.exponent);
    r.abs_f = re < 700.0 ? std::exp(re) * r.abs_h / 2.0
                         : std::numeric_limits<double>::infinity();
    return r;
}

double wrap_to_pi(double x) {
    x = std::fmod(x, 2.0 * kPi);
    if (x > kPi)
        x -= 2.0 * kPi;
    if (x <= -kPi)
        x += 2.0 * kPi;
    return x;
}

struct WalkOutcome {
    bool marginal = false;   // axis modulus under the floor, or phase
                             // unresolvable: the cell sits on a curve
    bool consistent = false; // accumulated phase lands on a usable integer
    int n = 0;
    double arc_min_h = std::numeric_limits<double>::infinity();
    double min_abs = std::numeric_limits<double>::infinity();
};

// Walk one leg of the contour, accumulating wrapped phase increments and
// bisecting every segment whose increment is not safely below pi/2.
// Returns false when the leg shows the determinant (numerically) vanishing
// on the contour, which classifies the cell as marginal.
template <typename Map>
bool walk_leg(const SystemParams& p, Map&& at, int n_init, bool on_axis,
              double floor_abs, WalkOutcome& out, double& delta) {
    struct Node {
        double t;
        Probe pr;
    };
    auto record = [&](const Node& nd) {
        if (on_axis) {
            out.min_abs = std::min(out.min_abs, nd.pr.abs_f);
            return nd.pr.abs_f >= floor_abs;
        }
        out.arc_min_h = std::min(out.arc_min_h, nd.pr.abs_h);
        out.min_abs = std::min(out.min_abs, nd.pr.abs_h / 2.0);
        return true;
    };

    Node prev{0.0, probe(p, at(0.0))};
    if (!record(prev))
        return false;
    std::vector<std::pair<Node, Node>> stack;
    for (int i = 1; i <= n_init; ++i) {
        const double t = double(i) / n_init;
        Node cur{t, probe(p, at(t))};
        if (!record(cur))
            return false;
        stack.emplace_back(prev, cur);
        while (!stack.empty()) {
            auto [a, b] = stack.back();
            stack.pop_back();
            const double w = wrap_to_pi(b.pr.theta - a.pr.theta);
            if (std::abs(w) < kPi / 2.0) {
                delta += w;
                continue;
            }
            if (b.t - a.t < 1e-12) // ~40 bisection levels exhausted
                return false;
            Node mid{0.5 * (a.t + b.t), probe(p, at(0.5 * (a.t + b.t)))};
            if (!record(mid))
                return false;
            stack.emplace_back(a, mid);
            stack.emplace_back(mid, b);
        }
        prev = cur;
    }
    return true;
}

// One full half-contour pass at radius R.  By conjugate symmetry the
// winding over the closed contour is twice the phase change along the
// quarter arc (sigma = R -> iR) plus the upper half axis (iR -> 0); both
// endpoints are points where F is real, so N = (delta_arc + delta_axis)/pi.
WalkOutcome walk(const SystemParams& p, double R, int n_arc, int n_axis,
                 double floor_abs) {
    WalkOutcome out;
    double d_arc = 0.0, d_axis = 0.0;
    auto arc = [R](double t) {
        const double th = t * kPi / 2.0;
        return Complex(R * std::cos(th), R * std::sin(th));
    };
    auto axis = [R](double t) { return Complex(0.0, (1.0 - t) * R); };
    if (!walk_leg(p, arc, n_arc, false, floor_abs, out, d_arc) ||
        !walk_leg(p, axis, n_axis, true, floor_abs, out, d_axis)) {
        out.marginal = true;
        return out;
    }
    const double x = (d_arc + d_axis) / kPi;
    const long long n = std::llround(x);
    out.consistent = std::abs(x - double(n)) < 0.25 && n >= 0;
    out.n = int(n);
    return out;
}

} // namespace

SpectralReport count_unstable(const SystemParams& p,
                              std::optional<ContourSpec> spec) {
    p.validate();
    if (!(std::abs(p.k) < 1.0))
        throw std::invalid_argument(
            "winding count requires |k| < 1; use seed_unstable_roots beyond");
    if (spec && (!(spec->radius > 0.0) || spec->n_arc < 64 ||
                 spec->n_axis < 64 || !(spec->min_modulus_floor > 0.0)))
        throw std::invalid_argument("malformed contour specification");

    SpectralReport rep;
    if (p.L == 0.0) {
        // F is the constant k - 1: nothing to enclose.
        rep.min_abs_on_contour = std::abs(1.0 - p.k);
        return rep;
    }

    const double f0 = std::abs(eval_char(p, Complex(0.0, 0.0)));
    if (f0 < kSigmaZeroTol * (1.0 + std::abs(p.a) + std::abs(p.b))) {
        rep.verdict = Verdict::Marginal;
        rep.min_abs_on_contour = f0;
        return rep;
    }

    const double floor_abs = spec ? spec->min_modulus_floor : 1e-12;
    const int n_arc = spec ? spec->n_arc : 256;
    const int n_axis = spec ? spec->n_axis : 256;
    const double lam = p.lambda;
    double R = spec ? spec->radius
                    : 2.0 * lam / (lam + 1.0) *
                              std::sqrt(std::abs(p.a * p.b) / lam) +
                          2.0 * lam / ((lam + 1.0) * p.L) *
                              (std::abs(std::log(1.0 - std::abs(p.k))) +
                               2.0 * kPi) +
                          1.0;
    // Away from the marginal set the rescaled remainder is bounded below by
    // 2 - 2|k| at infinity; require a quarter of that on the whole arc.
    const double arc_floor = 0.5 * (1.0 - std::abs(p.k));

    int prev = -1;
    for (int pass = 0; pass <= kMaxDoublings; ++pass) {
        const WalkOutcome w = walk(p, R, n_arc, n_axis, floor_abs);
        if (w.marginal) {
            rep.verdict = Verdict::Marginal;
            rep.radius_used = R;
            rep.min_abs_on_contour = w.min_abs;
            return rep;
        }
        const bool settled =
            spec ? w.consistent
                 : (w.consistent && w.arc_min_h > arc_floor && w.n == prev);
        if (settled) {
            rep.n_unstable = w.n;
            rep.radius_used = R;
            rep.min_abs_on_contour = w.min_abs;
            rep.verdict = w.n == 0 ? Verdict::Stable : Verdict::Unstable;
            return rep;
        }
        if (spec)
            throw RadiusExhausted(
                "phase accumulation inconsistent at the requested radius");
        prev = w.consistent ? w.n : -1;
        R *= 2.0;
    }
    throw RadiusExhausted("no enclosing radius found after 8 doublings");
}

std::vector<Complex> seed_unstable_roots(const SystemParams& p, int n_min,
                                         int n_max) {
    p.validate();
    if (!(std::abs(p.k) > 1.0))
        throw std::invalid_argument("asymptotic seeds require |k| > 1");
    if (!(p.L > 0.0))
        throw std::invalid_argument("asymptotic seeds require L > 0");
    if (n_min < 0 || n_min > n_max)
        throw std::invalid_argument("need 0 <= n_min <= n_max");
    const double scale = p.lambda / ((p.lambda + 1.0) * p.L);
    const double half = p.k < -1.0 ? 0.5 : 0.0;
    std::vector<Complex> out;
    out.reserve(n_max - n_min + 1);
    for (int n = n_min; n <= n_max; ++n)
        out.emplace_back(scale * std::log(std::abs(p.k)),
                         scale * 2.0 * (n + half) * kPi);
    return out;
}

Complex refine_root(const SystemParams& p, Complex seed, double tol) {
    p.validate();
    if (!std::isfinite(seed.real()) || !std::isfinite(seed.imag()))
        throw std::invalid_argument("seed must be finite");
    if (!(tol > 0.0))
        throw std::invalid_argument("tolerance must be positive");

    Complex sigma = seed;
    Complex f_cur = eval_char(p, sigma);
    double fabs_cur = std::abs(f_cur);
    for (int iter = 0; iter < 100; ++iter) {
        if (fabs_cur < tol)
            return sigma;
        const double step = 1e-7 * std::max(1.0, std::abs(sigma));
        const Complex d = (eval_char(p, sigma + step) -
                           eval_char(p, sigma - step)) /
                          (2.0 * step);
        const Complex delta = f_cur / d;
        if (!std::isfinite(delta.real()) || !std::isfinite(delta.imag()) ||
            std::abs(delta) > 1e8 * std::max(1.0, std::abs(sigma)))
            throw DerivativeVanishes("derivative estimate unusably small");
        bool accepted = false;
        double alpha = 1.0;
        for (int j = 0; j < 30; ++j, alpha *= 0.5) {
            const Complex trial = sigma - alpha * delta;
            Complex f_trial;
            try {
                f_trial = eval_char(p, trial);
            } catch (const OverflowError&) {
                continue; // wandered out of range; shorten the step
            }
            if (std::abs(f_trial) < fabs_cur) {
                sigma = trial;
                f_cur = f_trial;
                fabs_cur = std::abs(f_trial);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw NoConvergence("Newton step yields no residual decrease");
    }
    throw NoConvergence("root refinement did not converge in 100 iterations");
}

std::vector<Complex> k1_imaginary_roots(const SystemParams& p, int n_max) {
    p.validate();
    if (p.k != 1.0)
        throw std::invalid_argument("explicit root family requires k = 1");
    if (!(p.L > 0.0))
        throw std::invalid_argument("explicit root family requires L > 0");
    if (n_max < 0)
        throw std::invalid_argument("n_max must be nonnegative");
    const double scale = 2.0 * p.lambda / (p.lambda + 1.0);
    std::vector<Complex> out;
    out.reserve(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        const double w =
            p.a * p.b / p.lambda - double(n) * n * kPi * kPi / (p.L * p.L);
        out.push_back(scale * std::sqrt(Complex(w, 0.0)));
    }
    return out;
}

} // namespace hypstab
