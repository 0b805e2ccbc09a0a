#pragma once

#include <complex>

namespace hypstab {

using Complex = std::complex<double>;

// Parameters of the closed-loop 2x2 hyperbolic system on (0, L):
//
//   d_t y1 + d_x y1 + a y2 = 0        (rightward speed 1)
//   d_t y2 - lambda d_x y2 + b y1 = 0 (leftward speed lambda)
//   y1(t,0) = k y2(t,0),  y1(t,L) = y2(t,L)
//
// a, b couple the two fields, lambda > 0 is the leftward transport speed,
// and k is the proportional boundary feedback gain.
struct SystemParams {
    double a = 0.0;
    double b = 0.0;
    double lambda = 1.0;
    double L = 1.0;
    double k = 0.0;

    // Throws std::invalid_argument unless lambda > 0, L >= 0 and all
    // fields are finite.
    void validate() const;
};

// Rescales a system with rightward speed lambda1 and leftward speed lambda2
// to the unit rightward speed used everywhere else (x -> x / lambda1).
// Couplings are unchanged, lambda = lambda2/lambda1, L' = L/lambda1. The
// feedback gain is dimensionless and passes through untouched.
SystemParams reduce_general(double lambda1, double lambda2,
                            double a, double b, double L, double k = 0.0);

} // namespace hypstab
