#pragma once

// Parallel stability sweeps over the (k, L) gain/length plane and SVG
// rendering of the resulting region picture.
//
// A sweep fixes the couplings (a, b, lambda) and evaluates every node of a
// rectangular (k, L) grid independently: the unstable eigenvalue count by
// contour winding, the fitted energy decay rate of a simulation, or both.
// Nodes closer to a marginal curve than the exclusion margin are tagged
// marginal and left out of the spectral/simulation agreement accounting,
// since on the curves the count is undefined and the rate straddles zero.
// Cells are distributed over a worker pool; each cell depends only on its
// own parameters, so the result is identical for any worker count.

#include "hypstab/marginal.hpp"
#include "hypstab/system.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hypstab {

enum class SweepMethod { Spectral, Simulation, Both };

struct SweepSpec {
    double a = 0.0;
    double b = 0.0;
    double lambda = 1.0;

    double k_min = -0.9;
    double k_max = 0.9;
    int k_count = 11;

    double L_min = 0.2;
    double L_max = 3.0;
    int L_count = 11;

    SweepMethod method = SweepMethod::Spectral;

    // Euclidean distance from a marginal curve below which a cell is
    // tagged marginal. Zero disables the tagging.
    double exclusion_margin = 0.0;

    // Simulation knobs, used when method involves Simulation.
    int sim_cells = 100;
    double sim_t_final = 30.0;

    // Throws std::invalid_argument on unordered ranges, counts < 2,
    // lambda <= 0, or a spectral sweep whose gains leave (-1, 1).
    void validate() const;
};

struct SweepCell {
    double k = 0.0;
    double L = 0.0;
    bool marginal = false;              // within the exclusion margin
    std::optional<int> n_unstable;      // winding count, when computed
    std::optional<double> rate;         // fitted energy rate, when computed
    std::optional<bool> agree;          // (N == 0) == (rate < 0), off-margin
    std::string error;                  // failure name, empty when clean
};

struct SweepResult {
    SweepSpec spec;
    // Row-major, k outer and L inner: cells[ik * L_count + il].
    std::vector<SweepCell> cells;

    const SweepCell& at(int ik, int il) const;
};

// Grid coordinates; index i in [0, count) maps linearly onto [lo, hi].
double grid_value(double lo, double hi, int count, int i);

// Evaluate the whole grid on `jobs` worker threads (values < 1 mean 1).
// Per-cell failures are recorded in the cell's error field and never
// abort the sweep.
SweepResult run_sweep(const SweepSpec& spec, int jobs = 1);

// One cell evaluated in isolation; run_sweep produces exactly this value
// at the matching grid node.
SweepCell evaluate_cell(const SweepSpec& spec, int ik, int il);

// CSV export with header k,L,N,rate,flag. N and rate are empty when not
// computed; flag is one of agree/disagree/marginal/ok or error:<name>.
// The bytes are a pure function of the result.
std::string sweep_csv(const SweepResult& r);

// Self-contained SVG picture of the sweep: one rectangle per cell,
// coloured by the unstable count (discrete palette) or by the fitted rate
// (diverging palette) when only simulation data exists, with the marginal
// curves overlaid as polylines and axes labeled k and L. Rendering the
// same result twice yields identical bytes.
std::string render_heatmap_svg(const SweepResult& r);

// render_heatmap_svg written to a file. Throws std::runtime_error when the
// file cannot be written.
void render_heatmap(const SweepResult& r, const std::string& path);

} // namespace hypstab
