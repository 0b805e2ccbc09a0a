#include "hypstab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "hypstab/errors.hpp"

namespace hypstab {

namespace {

void validate_config(const SimConfig& cfg) {
    cfg.params.validate();
    if (!(cfg.params.L > 0.0))
        throw std::invalid_argument("simulation requires L > 0");
    if (cfg.n_cells < 4)
        throw std::invalid_argument("need at least 4 cells");
    if (cfg.dt < 0.0 || !std::isfinite(cfg.dt))
        throw std::invalid_argument("dt must be nonnegative");
    if (!(cfg.t_final > 0.0))
        throw std::invalid_argument("t_final must be positive");
    if (cfg.snapshot_every < 0)
        throw std::invalid_argument("snapshot_every must be nonnegative");
    if (cfg.initial) {
        const auto n = size_t(cfg.n_cells) + 1;
        if (cfg.initial->u.size() != n || cfg.initial->v.size() != n)
            throw std::invalid_argument(
                "initial data size does not match n_cells + 1 nodes");
    }
}

} // namespace

SimState default_initial_data(double L, int n_cells) {
    if (!(L > 0.0))
        throw std::invalid_argument("L must be positive");
    if (n_cells < 1)
        throw std::invalid_argument("need at least one cell");
    SimState s;
    s.u.resize(n_cells + 1);
    s.v.resize(n_cells + 1);
    const double sl = std::sin(L);
    const double match = (L + sl * sl) / (L + L * L);
    for (int j = 0; j <= n_cells; ++j) {
        const double x = L * double(j) / n_cells;
        const double sx = std::sin(x);
        s.u[j] = x + sx * sx;
        s.v[j] = match * (x * x + x);
    }
    return s;
}

double trapezoid_energy(const SimState& s, double L) {
    const size_t n = s.u.size();
    if (n < 2 || s.v.size() != n)
        throw std::invalid_argument("state needs matching u/v with >= 2 nodes");
    const double dx = L / double(n - 1);
    double e = 0.0;
    for (size_t j = 0; j < n; ++j) {
        const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
        e += w * (s.u[j] * s.u[j] + s.v[j] * s.v[j]);
    }
    return e * dx;
}

SimResult run_simulation(const SimConfig& cfg) {
    validate_config(cfg);
    const int N = cfg.n_cells;
    const auto& p = cfg.params;
    const double dx = p.L / N;
    const double dt = cfg.dt > 0.0 ? cfg.dt : 2.0 * p.L / N;

    SimState state = cfg.initial ? *cfg.initial
                                 : default_initial_data(p.L, N);

    // Unknowns interleaved as u_0, v_0, u_1, v_1, ... for a narrow band.
    const int dim = 2 * (N + 1);
    auto iu = [](int j) { return 2 * j; };
    auto iv = [](int j) { return 2 * j + 1; };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(size_t(3) * dim);
    // Leftward transport of u, differenced against the left neighbour.
    for (int j = 1; j <= N; ++j) {
        trip.emplace_back(iu(j), iu(j), 1.0 / dt + 1.0 / dx);
        trip.emplace_back(iu(j), iu(j - 1), -1.0 / dx);
        trip.emplace_back(iu(j), iv(j), p.a);
    }
    // Rightward transport of v, differenced against the right neighbour.
    for (int j = 0; j < N; ++j) {
        trip.emplace_back(iv(j), iv(j), 1.0 / dt + p.lambda / dx);
        trip.emplace_back(iv(j), iv(j + 1), -p.lambda / dx);
        trip.emplace_back(iv(j), iu(j), p.b);
    }
    // Boundary rows: u_0 = k v_0 and u_N = v_N at the new level.
    trip.emplace_back(iu(0), iu(0), 1.0);
    trip.emplace_back(iu(0), iv(0), -p.k);
    trip.emplace_back(iv(N), iu(N), 1.0);
    trip.emplace_back(iv(N), iv(N), -1.0);

    Eigen::SparseMatrix<double> A(dim, dim);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw SingularStepMatrix("implicit step matrix is not invertible");

    const double t0 = state.t;
    const long n_steps = std::max<long>(
        1, long(std::ceil((cfg.t_final - t0) / dt - 1e-12)));

    SimResult res;
    res.trace.times.reserve(n_steps + 1);
    res.trace.energies.reserve(n_steps + 1);
    res.trace.times.push_back(state.t);
    res.trace.energies.push_back(trapezoid_energy(state, p.L));
    if (cfg.snapshot_every > 0)
        res.snapshots.push_back(state);

    Eigen::VectorXd rhs(dim), sol(dim);
    for (long step = 1; step <= n_steps; ++step) {
        for (int j = 0; j <= N; ++j) {
            rhs[iu(j)] = state.u[j] / dt;
            rhs[iv(j)] = state.v[j] / dt;
        }
        rhs[iu(0)] = 0.0; // boundary rows replace the transport balance
        rhs[iv(N)] = 0.0;
        sol = lu.solve(rhs);
        for (int j = 0; j <= N; ++j) {
            state.u[j] = sol[iu(j)];
            state.v[j] = sol[iv(j)];
            if (!std::isfinite(state.u[j]) || !std::isfinite(state.v[j]))
                throw NonFiniteState("state left double range at step " +
                                     std::to_string(step));
        }
        state.t = t0 + double(step) * dt;
        res.trace.times.push_back(state.t);
        res.trace.energies.push_back(trapezoid_energy(state, p.L));
        if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0)
            res.snapshots.push_back(state);
    }
    res.final_state = std::move(state);
    return res;
}

double fit_decay_rate(const EnergyTrace& trace) {
    const size_t n = trace.times.size();
    if (n != trace.energies.size())
        throw std::invalid_argument("trace arrays differ in length");
    if (n < 10)
        throw InsufficientData("need at least 10 trace samples");
    const double e0 = trace.energies.front();
    if (*std::max_element(trace.energies.begin(), trace.energies.end()) <
        1e-300)
        throw InsufficientData("energy trace is entirely below 1e-300");

    const double t_end = trace.times.back();
    const double t_begin = trace.times.front();
    const double window = t_begin + 0.5 * (t_end - t_begin);
    double st = 0, sy = 0, stt = 0, sty = 0;
    long m = 0;
    for (size_t i = 0; i < n; ++i) {
        const double t = trace.times[i];
        const double e = trace.energies[i];
        if (t < window - 1e-12 || e < 1e-30 * e0 || e <= 0.0)
            continue;
        const double y = std::log(e);
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        ++m;
    }
    if (m < 2)
        throw InsufficientData("fewer than two usable samples in the window");
    const double det = double(m) * stt - st * st;
    if (det <= 0.0)
        throw InsufficientData("degenerate time samples in the window");
    return (double(m) * sty - st * sy) / det;
}

} // namespace hypstab
