#pragma once

// Right-half-plane eigenvalue counting for the boundary-feedback system.
//
// The closed-loop spectrum is the zero set of the boundary determinant
// F(sigma).  For |k| < 1 the number N of zeros with Re sigma > 0 is finite
// and equals the winding number of F along the D-shaped contour made of the
// semicircular arc sigma = R e^{i theta} and the imaginary segment
// sigma = i beta, beta: R -> -R, for any R large enough to enclose them all.
// The phase is accumulated with adaptive bisection so that every wrapped
// increment is smaller than pi/2, which pins the branch of the argument;
// conjugate symmetry F(conj sigma) = conj F(sigma) halves the walk.
//
// For |k| > 1 there are infinitely many unstable roots; their asymptotic
// locations sigma_{k,n} serve as Newton seeds.  For k = 1 the spectrum
// degenerates to an explicit family that is eventually purely imaginary.

#include <optional>
#include <vector>

#include "hypstab/system.hpp"

namespace hypstab {

struct ContourSpec {
    double radius = 0.0;             // enclosing radius R (must be > 0)
    int n_arc = 256;                 // initial samples on the quarter arc
    int n_axis = 256;                // initial samples on the half axis
    double min_modulus_floor = 1e-12; // smallest |F| tolerated on the axis
};

enum class Verdict { Stable, Unstable, Marginal };

struct SpectralReport {
    int n_unstable = 0;          // zeros of F with Re sigma > 0
    double radius_used = 0.0;    // radius of the accepted contour
    // Smallest modulus seen along the walk: exact |F| on the axis, the
    // exponentially rescaled remainder |h|/2 on the arc (a lower bound for
    // |F| there, where the raw value overflows).
    double min_abs_on_contour = 0.0;
    Verdict verdict = Verdict::Stable;
};

// Count unstable eigenvalues by contour winding.  Requires |k| < 1.  With
// no ContourSpec the radius starts at a scale-aware default and doubles
// (at most 8 times) until two consecutive counts agree and the arc stays
// safely away from zero; an explicit ContourSpec fixes the radius and
// sampling.  Returns verdict Marginal when sigma = 0 is (numerically) a
// root or the axis modulus dips below the floor — such cells sit on a
// marginal curve and have no well-defined count.
// Throws RadiusExhausted when no radius yields a consistent count.
SpectralReport count_unstable(const SystemParams& p,
                              std::optional<ContourSpec> spec = std::nullopt);

// Asymptotic unstable-root locations for |k| > 1:
//   sigma_{k,n} = lambda/((lambda+1) L) (ln|k| + 2 nhat pi i),
// nhat = n for k > 1 and n + 1/2 for k < -1, for n in [n_min, n_max].
std::vector<Complex> seed_unstable_roots(const SystemParams& p, int n_min,
                                         int n_max);

// Polish a root seed by damped Newton iteration with a central-difference
// derivative until |F| < tol.  Throws NoConvergence after 100 iterations,
// DerivativeVanishes if the local derivative estimate is unusably small.
Complex refine_root(const SystemParams& p, Complex seed, double tol);

// The explicit k = 1 spectrum: sigma_n = (2 lambda/(lambda+1))
// sqrt(ab/lambda - n^2 pi^2 / L^2) for n = 0..n_max, purely imaginary once
// the radicand turns negative.  (The n = 0 entry solves the factored form
// of the determinant but is a genuine root of F only when the accompanying
// linear factor vanishes too.)
std::vector<Complex> k1_imaginary_roots(const SystemParams& p, int n_max);

} // namespace hypstab
