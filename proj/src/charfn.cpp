#include "hypstab/charfn.hpp"

#include "hypstab/errors.hpp"

#include <cmath>
#include <utility>

namespace hypstab {

namespace {

// Crossover on |w| = |(eta L)^2| between the even power series and the
// exponential form. Both paths agree to 1e-12 relative on the overlap, so
// evaluation stays analytic in w across the degenerate locus eta = 0.
constexpr double kSeriesCrossover = 1e-4;
constexpr double kExpRangeLimit = 700.0;

// (1 - exp(-x))/x, the value 1 at x = 0. Series below the same crossover
// as cosh_sinhc, closed form above; no overflow for Re(x) >= 0.
Complex phi(Complex x) {
    if (std::abs(x) < kSeriesCrossover) {
        // sum_{m>=0} (-x)^m/(m+1)!
        static constexpr double kInvFact[6] = {
            1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720};
        Complex acc = 0.0, xm = 1.0;
        for (int m = 0; m < 6; ++m) {
            acc += kInvFact[m] * xm;
            xm *= -x;
        }
        return acc;
    }
    return (1.0 - std::exp(-x)) / x;
}

// (k+1)(lambda+1)/(2 lambda) sigma + (k b/lambda + a), the sinhc coefficient.
Complex sinhc_coef(const SystemParams& p, Complex sigma) {
    return (p.k + 1.0) * (p.lambda + 1.0) / (2.0 * p.lambda) * sigma +
           (p.k * p.b / p.lambda + p.a);
}

Complex eta_squared(const SystemParams& p, Complex sigma) {
    const Complex s = (p.lambda + 1.0) * sigma;
    return (s * s - 4.0 * p.lambda * p.a * p.b) /
           (4.0 * p.lambda * p.lambda);
}

} // namespace

std::pair<Complex, Complex> cosh_sinhc(Complex w) {
    if (std::abs(w) < kSeriesCrossover) {
        // cosh(sqrt w) = sum w^m/(2m)!,  sinh(sqrt w)/sqrt w = sum w^m/(2m+1)!
        static constexpr double kCosh[6] = {
            1.0, 1.0 / 2, 1.0 / 24, 1.0 / 720, 1.0 / 40320, 1.0 / 3628800};
        static constexpr double kSinhc[6] = {
            1.0, 1.0 / 6, 1.0 / 120, 1.0 / 5040, 1.0 / 362880, 1.0 / 39916800};
        Complex ch = 0.0, sc = 0.0, wm = 1.0;
        for (int m = 0; m < 6; ++m) {
            ch += kCosh[m] * wm;
            sc += kSinhc[m] * wm;
            wm *= w;
        }
        return {ch, sc};
    }
    const Complex z = std::sqrt(w); // principal; the results are even in z
    if (std::abs(z.real()) > kExpRangeLimit)
        throw OverflowError("cosh argument exceeds the double exponent range");
    const Complex ep = std::exp(z), em = std::exp(-z);
    return {0.5 * (ep + em), 0.5 * (ep - em) / z};
}

CharParts char_parts(const SystemParams& p, Complex sigma) {
    p.validate();
    CharParts parts;
    parts.eta_sq = eta_squared(p, sigma);
    parts.xi = -(p.lambda - 1.0) * sigma / (2.0 * p.lambda);
    auto [ch, sc] = cosh_sinhc(parts.eta_sq * (p.L * p.L));
    parts.cosh_etaL = ch;
    parts.sinhc_etaL = p.L * sc; // sinh(eta L)/eta = L * sinh(eta L)/(eta L)
    return parts;
}

Complex eval_char(const SystemParams& p, Complex sigma) {
    const CharParts parts = char_parts(p, sigma);
    return (p.k - 1.0) * parts.cosh_etaL -
           sinhc_coef(p, sigma) * parts.sinhc_etaL;
}

double ScaledChar::log_abs() const {
    return exponent.real() + std::log(0.5 * std::abs(h));
}

double ScaledChar::arg() const { return exponent.imag() + std::arg(h); }

ScaledChar eval_char_scaled(const SystemParams& p, Complex sigma) {
    p.validate();
    const Complex eta_sq = eta_squared(p, sigma);
    const Complex eta = std::sqrt(eta_sq); // principal, Re >= 0
    const Complex etaL = eta * p.L;
    // cosh(eta L) = e^{eta L} (1 + e^{-2 eta L})/2 and
    // sinh(eta L)/eta = e^{eta L} L phi(2 eta L), so F = e^{eta L} h / 2 with
    // the h below. |e^{-2 eta L}| <= 1, so h never overflows.
    const Complex em = std::exp(-2.0 * etaL);
    const Complex h = (p.k - 1.0) * (1.0 + em) -
                      sinhc_coef(p, sigma) * 2.0 * p.L * phi(2.0 * etaL);
    return {h, etaL};
}

Complex eval_char_normalized(const SystemParams& p, Complex sigma) {
    p.validate();
    if (sigma.real() < 0.0)
        throw BranchViolation("normalized form requires Re(sigma) >= 0");
    const double sep =
        8.0 * p.lambda * std::abs(p.a * p.b) /
        ((p.lambda + 1.0) * (p.lambda + 1.0));
    if (std::norm(sigma) < sep)
        throw BranchViolation(
            "normalized form requires |sigma|^2 >= 8 lambda |ab|/(lambda+1)^2");
    return eval_char_scaled(p, sigma).h;
}

} // namespace hypstab
