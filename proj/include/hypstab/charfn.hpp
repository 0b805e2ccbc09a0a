#pragma once

#include "hypstab/system.hpp"

namespace hypstab {

// Eigenvalues sigma of the closed-loop system are the right-half-plane
// zeros of the characteristic function
//
//   F(sigma) = (k-1) cosh(eta L)
//            - [ (k+1) (lambda+1)/(2 lambda) sigma + (k b / lambda + a) ]
//              * sinh(eta L)/eta
//
// with eta^2 = ((lambda+1)^2 sigma^2 - 4 lambda a b) / (4 lambda^2).
// Both cosh(eta L) and sinh(eta L)/eta are even in eta, so F is a
// single-valued analytic function of sigma despite the square root;
// sinh(eta L)/eta takes the value L at eta = 0.

// Ingredients of F at one point.
struct CharParts {
    Complex eta_sq;     // ((lambda+1)^2 sigma^2 - 4 lambda a b)/(4 lambda^2)
    Complex xi;         // -(lambda-1) sigma / (2 lambda)
    Complex cosh_etaL;  // cosh(eta L)
    Complex sinhc_etaL; // sinh(eta L)/eta, = L at eta = 0
};

// cosh(z) and sinh(z)/z for z = sqrt(w), evaluated as functions of w so the
// square-root branch never matters. Below |w| = 1e-4 a 6-term even power
// series is used; above it, exponentials of the principal root. The two
// paths agree to 1e-12 relative on the overlap.
// first = cosh(sqrt(w)), second = sinh(sqrt(w))/sqrt(w).
// Throws OverflowError when |Re sqrt(w)| > 700.
std::pair<Complex, Complex> cosh_sinhc(Complex w);

// Throws OverflowError when |Re(eta L)| > 700.
CharParts char_parts(const SystemParams& p, Complex sigma);

// F(sigma). Throws OverflowError as char_parts does.
Complex eval_char(const SystemParams& p, Complex sigma);

// Overflow-free representation F = exp(exponent) * h / 2 with
// exponent = eta L for the principal root (Re eta >= 0), so
// |exp(-2 eta L)| <= 1 inside h and neither factor can overflow.
// log|F| = Re(exponent) + log(|h|/2); arg F = Im(exponent) + arg h (mod 2pi).
struct ScaledChar {
    Complex h;
    Complex exponent;

    double log_abs() const;
    // One representative of arg F; only differences mod 2pi are meaningful.
    double arg() const;
};

ScaledChar eval_char_scaled(const SystemParams& p, Complex sigma);

// The normalized form H(sigma) = 2 exp(-Q L) F(sigma) with Q the principal
// branch of eta (Re Q >= 0, Q/sigma -> (lambda+1)/(2 lambda) at infinity).
// Valid on Re(sigma) >= 0 with |sigma|^2 >= 8 lambda |ab| / (lambda+1)^2,
// which keeps Q away from the branch points; throws BranchViolation
// otherwise. On large contours H stays O(1) where F overflows.
Complex eval_char_normalized(const SystemParams& p, Complex sigma);

} // namespace hypstab
