#pragma once

// Implicit upwind finite-difference simulation of the open-loop system
//
//   dt y1 - dx y1 = a y2,      y1(t, L) = y2(t, L),
//   dt y2 + lambda dx y2 = b y1,  y1(t, 0) = k y2(t, 0),
//
// on a uniform grid x_j = j dx, dx = L/N.  Both transport terms are
// differenced against their inflow side and evaluated at the new time
// level, so each step solves one constant (2N+2)x(2N+2) sparse system;
// the matrix is factored once.  The recorded energy is the composite
// trapezoid approximation of the integral of y1^2 + y2^2 over [0, L].

#include <optional>
#include <vector>

#include "hypstab/system.hpp"

namespace hypstab {

struct SimState {
    std::vector<double> u; // y1 at the N+1 nodes
    std::vector<double> v; // y2 at the N+1 nodes
    double t = 0.0;
};

struct EnergyTrace {
    std::vector<double> times;
    std::vector<double> energies;
};

struct SimConfig {
    SystemParams params;
    int n_cells = 100;    // N; nodes are 0..N
    double dt = 0.0;      // time step; 0 selects the default 2 L / N
    double t_final = 30.0;
    // Starting state; when absent the built-in profile below is used.
    std::optional<SimState> initial;
    int snapshot_every = 0; // keep every m-th state (0: none)
};

struct SimResult {
    EnergyTrace trace;
    SimState final_state;
    std::vector<SimState> snapshots;
};

// The built-in initial profile u = x + sin^2 x with v matched so that the
// free end is compatible: v = ((L + sin^2 L)/(L + L^2)) (x^2 + x).
SimState default_initial_data(double L, int n_cells);

// Trapezoid-rule field energy of a state on [0, L].
double trapezoid_energy(const SimState& s, double L);

// Advance the implicit scheme to t_final.  Throws SingularStepMatrix if
// the step matrix cannot be factored and NonFiniteState if the solution
// leaves the range of double (the message names the step).
SimResult run_simulation(const SimConfig& cfg);

// Least-squares slope of ln E versus t over the trailing half [T/2, T] of
// the trace, skipping samples below 1e-30 times the initial energy.  The
// returned value is the energy rate (the field decays at half of it).
// Throws InsufficientData when fewer than 10 samples exist, the trace has
// decayed below representability, or fewer than two usable points remain.
double fit_decay_rate(const EnergyTrace& trace);

} // namespace hypstab
