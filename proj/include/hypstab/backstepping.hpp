#pragma once

// Observer-based output-feedback stabilization in finite time.
//
// Plant orientation for this module (control at the right end):
//   dt y1 - dx y1 + a y2 = 0,   y2(t,0) = y1(t,0),
//   dt y2 + lambda dx y2 + b y1 = 0,   y1(t,L) = U(t),
// with measured output Y(t) = y2(t,L).
//
// An observer copies the plant and injects Gamma_i(x) (Y - yhat2(t,L)).
// The estimation error is mapped by a Volterra transformation with kernels
// P1, P2 (posed on the triangle 0 <= x <= xi <= L) onto a cascade that
// vanishes by T_opt1 = (lambda+1) L / lambda; the injection gains are
// Gamma_i(x) = lambda P^i(x, L).  The observer state is then mapped by a
// second transformation with kernels K11..K22 (on 0 <= xi <= x <= L) onto
// a transport cascade; its inverse kernels M11..M22 give the control law
//   U(t) = int_0^L [ M11(L,xi) z + M12(L,xi) w ] dxi,
// which zeroes the plant output for t >= T_opt = 2 (lambda+1) L / lambda.
//
// All kernels solve Volterra-type integral equations along characteristics
// and are computed by successive approximation on a uniform triangular
// mesh.  The inverse kernels use composition weights chosen so that the
// discrete inverse transform undoes the discrete forward transform to
// solver tolerance (plain trapezoid everywhere except the zero-length and
// boundary endpoints, where the exact discrete composition differs).

#include <optional>
#include <vector>

#include "hypstab/simulate.hpp"
#include "hypstab/system.hpp"

namespace hypstab {

struct KernelGrid {
    SystemParams params;
    int mesh = 0;    // M: nodes x_i = i L / M, i = 0..M on each axis
    double residual = 0.0; // last sup-norm update of the slowest family

    // Square row-major arrays of (M+1)^2 values, index i*(M+1)+j for the
    // node (x_i, xi_j); only the triangle each kernel lives on is filled.
    std::vector<double> p1, p2;             // observer kernels, x <= xi
    std::vector<double> q1, q2;             // error-target couplings, x <= xi
    std::vector<double> k11, k12, k21, k22; // control kernels, xi <= x
    std::vector<double> m11, m12, m21, m22; // inverse kernels, xi <= x

    std::vector<double> gamma1, gamma2; // lambda P^i(x_i, L) per node
    std::vector<double> gfun;           // g(x_i) = K21(x_i, 0)
    std::vector<double> cw1, cw2;       // M11(L, xi_j), M12(L, xi_j)

    // Triangle-aware linear interpolation of one stored kernel; `upper`
    // selects the x <= xi triangle (observer kernels) or its mirror.
    double value(const std::vector<double>& a, double x, double xi,
                 bool upper) const;
};

// Solve every kernel family on a mesh with mesh_size cells per axis by
// successive approximation (sup-norm update below 1e-11, at most 200
// sweeps).  Throws NoKernelConvergence with the last residual otherwise.
KernelGrid solve_kernels(const SystemParams& p, int mesh_size);

// Forward control transformation (y1, y2) -> (z, w) and its inverse, both
// by trapezoid quadrature on the kernel mesh nodes; fields must be sampled
// on exactly that grid (MeshMismatch otherwise).
void control_transform(const KernelGrid& kg, const std::vector<double>& y1,
                       const std::vector<double>& y2, std::vector<double>& z,
                       std::vector<double>& w);
void control_inverse(const KernelGrid& kg, const std::vector<double>& z,
                     const std::vector<double>& w, std::vector<double>& y1,
                     std::vector<double>& y2);

// The control functional evaluated two ways that agree analytically:
// through the inverse kernels on the transformed state (the defining law)
// and directly as the K-transform boundary row.  Kept separate so tests
// can compare the routes.
double control_law(const KernelGrid& kg, const std::vector<double>& yhat1,
                   const std::vector<double>& yhat2);
double control_law_direct(const KernelGrid& kg,
                          const std::vector<double>& yhat1,
                          const std::vector<double>& yhat2);

struct ClosedLoopConfig {
    SystemParams params; // a, b, lambda, L (the gain k plays no role here)
    double dt = 0.0;     // 0 selects dx = L / mesh
    double t_final = 0.0; // 0 selects 1.2 * T_opt
    // Plant starts from the built-in profile when absent; observer from 0.
    std::optional<SimState> plant_initial;
    std::optional<SimState> observer_initial;
};

struct ClosedLoopResult {
    EnergyTrace plant;           // plant field energy
    EnergyTrace error;           // energy of (y - yhat)
    std::vector<double> control; // U at the trace times
    SimState plant_final;
    SimState observer_final;
    double t_opt1 = 0.0;
    double t_opt = 0.0;
};

// Co-simulate plant and observer with the implicit upwind scheme on the
// kernel mesh; the output injection and the control row are solved
// implicitly inside one constant sparse matrix, factored once.
ClosedLoopResult run_closed_loop(const KernelGrid& kg,
                                 const ClosedLoopConfig& cfg);

enum class TargetKind {
    ErrorTarget,    // (alpha, beta): observer-error cascade
    ObserverTarget, // (z, w): post-convergence control cascade
};

// Explicit characteristic simulation of the chosen cascade target on the
// kernel mesh (dt = dx, the unit-speed component advances by exact shift).
// Demonstrates the finite-time structure: the first component dies by
// t = L, the second by t = L + L/lambda.
SimResult run_target_system(const KernelGrid& kg, TargetKind which,
                            double t_final,
                            std::optional<SimState> initial = std::nullopt);

} // namespace hypstab
