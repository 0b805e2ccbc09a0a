#include "hypstab/backstepping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "hypstab/errors.hpp"

namespace hypstab {

namespace {

constexpr double kSweepTol = 1e-11;
constexpr int kMaxSweeps = 200;

// Trapezoid weight of node `m` on the interval [0, x_n] (n cells of width h).
double trap_w(int m, int n, double h) {
    if (n <= 0) return 0.0;
    return (m == 0 || m == n) ? 0.5 * h : h;
}

bool finite_state(const std::vector<double>& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

double KernelGrid::value(const std::vector<double>& a, double x, double xi,
                         bool upper) const {
    const int m = mesh;
    const double h = params.L / m;
    const auto at = [&](int i, int j) { return a[i * (m + 1) + j]; };
    double uf = std::clamp(x / h, 0.0, double(m));
    double vf = std::clamp(xi / h, 0.0, double(m));
    int i = std::min(int(uf), m - 1);
    int j = std::min(int(vf), m - 1);
    double u = uf - i, v = vf - j;
    if (upper) {
        if (j >= i + 1) // cell fully above the diagonal
            return (1 - u) * (1 - v) * at(i, j) + u * (1 - v) * at(i + 1, j) +
                   (1 - u) * v * at(i, j + 1) + u * v * at(i + 1, j + 1);
        // diagonal cell: linear on the triangle (i,j), (i,j+1), (i+1,j+1)
        return at(i, j) * (1 - v) + at(i, j + 1) * (v - u) +
               at(i + 1, j + 1) * u;
    }
    if (i >= j + 1)
        return (1 - u) * (1 - v) * at(i, j) + u * (1 - v) * at(i + 1, j) +
               (1 - u) * v * at(i, j + 1) + u * v * at(i + 1, j + 1);
    // diagonal cell: linear on the triangle (i,j), (i+1,j), (i+1,j+1)
    return at(i, j) * (1 - u) + at(i + 1, j) * (u - v) + at(i + 1, j + 1) * v;
}

namespace {

// Shared bookkeeping for the successive-approximation sweeps.
struct SweepGuard {
    const char* family;
    double last = 0.0;
    int sweeps = 0;
    bool step(double update) {
        last = update;
        if (update < kSweepTol) return true;
        if (++sweeps >= kMaxSweeps)
            throw NoKernelConvergence(std::string(family) +
                                      " iteration stalled, last update " +
                                      std::to_string(update));
        return false;
    }
};

// Number of quadrature steps for a characteristic segment of length s.
int char_steps(double s, double h) {
    return std::max(1, int(std::ceil(s / h - 1e-9)));
}

} // namespace

KernelGrid solve_kernels(const SystemParams& p, int mesh_size) {
    p.validate();
    if (p.L <= 0.0)
        throw std::invalid_argument("solve_kernels: domain length must be positive");
    if (mesh_size < 32)
        throw std::invalid_argument("solve_kernels: mesh_size must be at least 32");

    KernelGrid kg;
    kg.params = p;
    kg.mesh = mesh_size;
    const int M = mesh_size;
    const int S = M + 1;
    const double h = p.L / M;
    const double a = p.a, b = p.b, lam = p.lambda;
    const auto id = [S](int i, int j) { return i * S + j; };

    for (auto* arr : {&kg.p1, &kg.p2, &kg.q1, &kg.q2, &kg.k11, &kg.k12,
                      &kg.k21, &kg.k22, &kg.m11, &kg.m12, &kg.m21, &kg.m22})
        arr->assign(size_t(S) * S, 0.0);

    // --- observer kernels P1, P2 on {x <= xi} -------------------------------
    //   P1(x,xi) = -a/(1+lam) - a * int_0^{s0} P2(x+s, xi-lam s) ds,
    //       s0 = (xi-x)/(1+lam)  (characteristic back to the diagonal)
    //   P2(x,xi) = P1(0, xi-x) - (b/lam) * int_0^{x} P1(x-s, xi-s) ds
    // Nodes are swept by the gap g = j-i so every strictly-smaller-gap value
    // is already updated; the same-point trapezoid endpoints are lagged one
    // sweep, which is what the successive approximation iterates away.
    {
        SweepGuard guard{"observer kernel"};
        for (;;) {
            double update = 0.0;
            for (int g = 0; g <= M; ++g) {
                for (int i = 0; i + g <= M; ++i) {
                    const int j = i + g;
                    const double x = i * h, xi = j * h;
                    double p1n;
                    if (g == 0) {
                        p1n = -a / (1.0 + lam);
                    } else {
                        const double s0 = (xi - x) / (1.0 + lam);
                        const int nq = char_steps(s0, h);
                        const double hs = s0 / nq;
                        double acc = 0.5 * kg.p2[id(i, j)];
                        for (int r = 1; r < nq; ++r)
                            acc += kg.value(kg.p2, x + r * hs, xi - lam * r * hs,
                                            true);
                        acc += 0.5 * kg.value(kg.p2, x + s0, xi - lam * s0, true);
                        p1n = -a / (1.0 + lam) - a * hs * acc;
                    }
                    update = std::max(update, std::abs(p1n - kg.p1[id(i, j)]));
                    kg.p1[id(i, j)] = p1n;

                    double p2n;
                    if (i == 0) {
                        p2n = kg.p1[id(0, j)];
                    } else {
                        double acc = 0.5 * (kg.p1[id(i, j)] + kg.p1[id(0, g)]);
                        for (int r = 1; r < i; ++r)
                            acc += kg.p1[id(i - r, j - r)];
                        p2n = kg.p1[id(0, g)] - (b / lam) * h * acc;
                    }
                    update = std::max(update, std::abs(p2n - kg.p2[id(i, j)]));
                    kg.p2[id(i, j)] = p2n;
                }
            }
            if (guard.step(update)) break;
        }
        kg.residual = guard.last;
    }

    // --- error-target couplings Q2 (Volterra in its own values), then Q1 ----
    //   Q2(x,xi) = -b P2(x,xi) - int_x^xi P2(x,s) Q2(s,xi) ds
    //   Q1(x,xi) = -b P1(x,xi) - int_x^xi P1(x,s) Q2(s,xi) ds
    {
        for (int g = 0; g <= M; ++g)
            for (int i = 0; i + g <= M; ++i)
                kg.q2[id(i, i + g)] = -b * kg.p2[id(i, i + g)];
        SweepGuard guard{"target coupling"};
        for (;;) {
            double update = 0.0;
            for (int g = 1; g <= M; ++g) {
                for (int i = 0; i + g <= M; ++i) {
                    const int j = i + g;
                    double acc = 0.5 * (kg.p2[id(i, i)] * kg.q2[id(i, j)] +
                                        kg.p2[id(i, j)] * kg.q2[id(j, j)]);
                    for (int r = i + 1; r < j; ++r)
                        acc += kg.p2[id(i, r)] * kg.q2[id(r, j)];
                    const double q2n = -b * kg.p2[id(i, j)] - h * acc;
                    update = std::max(update, std::abs(q2n - kg.q2[id(i, j)]));
                    kg.q2[id(i, j)] = q2n;
                }
            }
            if (guard.step(update)) break;
        }
        kg.residual = std::max(kg.residual, guard.last);
        for (int i = 0; i <= M; ++i) {
            for (int j = i; j <= M; ++j) {
                double acc = 0.0;
                if (j > i) {
                    acc = 0.5 * (kg.p1[id(i, i)] * kg.q2[id(i, j)] +
                                 kg.p1[id(i, j)] * kg.q2[id(j, j)]);
                    for (int r = i + 1; r < j; ++r)
                        acc += kg.p1[id(i, r)] * kg.q2[id(r, j)];
                }
                kg.q1[id(i, j)] = -b * kg.p1[id(i, j)] - h * acc;
            }
        }
    }

    // --- control kernels K11..K22 on {xi <= x} ------------------------------
    //   K12(x,xi) =  a/(1+lam) - a * int_0^{s1} K11(x-s, xi+lam s) ds
    //   K21(x,xi) = -b/(1+lam) + b * int_0^{s2} K22(x-lam s, xi+s) ds
    //       s1 = s2 = (x-xi)/(1+lam)
    //   K11(x,xi) = lam K12(x-xi, 0) - b * int_0^xi K12(x-s, xi-s) ds
    //   K22(x,xi) = (a/lam) * int_0^xi K21(x-s, xi-s) ds
    // K11/K22 integrate along the constant-gap diagonal, so each gap level
    // refreshes K12/K21 first and then closes K11/K22 with no lag at all.
    {
        SweepGuard guard{"control kernel"};
        for (;;) {
            double update = 0.0;
            for (int g = 0; g <= M; ++g) {
                for (int i = g; i <= M; ++i) {
                    const int j = i - g;
                    const double x = i * h, xi = j * h;
                    double k12n, k21n;
                    if (g == 0) {
                        k12n = a / (1.0 + lam);
                        k21n = -b / (1.0 + lam);
                    } else {
                        const double s1 = (x - xi) / (1.0 + lam);
                        const int nq = char_steps(s1, h);
                        const double hs = s1 / nq;
                        double acc = 0.5 * kg.k11[id(i, j)];
                        for (int r = 1; r < nq; ++r)
                            acc += kg.value(kg.k11, x - r * hs, xi + lam * r * hs,
                                            false);
                        acc += 0.5 * kg.value(kg.k11, x - s1, xi + lam * s1, false);
                        k12n = a / (1.0 + lam) - a * hs * acc;

                        acc = 0.5 * kg.k22[id(i, j)];
                        for (int r = 1; r < nq; ++r)
                            acc += kg.value(kg.k22, x - lam * r * hs, xi + r * hs,
                                            false);
                        acc += 0.5 * kg.value(kg.k22, x - lam * s1, xi + s1, false);
                        k21n = -b / (1.0 + lam) + b * hs * acc;
                    }
                    update = std::max(update, std::abs(k12n - kg.k12[id(i, j)]));
                    update = std::max(update, std::abs(k21n - kg.k21[id(i, j)]));
                    kg.k12[id(i, j)] = k12n;
                    kg.k21[id(i, j)] = k21n;
                }
                for (int i = g; i <= M; ++i) {
                    const int j = i - g;
                    double k11n, k22n;
                    if (j == 0) {
                        k11n = lam * kg.k12[id(i, 0)];
                        k22n = 0.0;
                    } else {
                        double acc = 0.5 * (kg.k12[id(i, j)] + kg.k12[id(g, 0)]);
                        for (int r = 1; r < j; ++r)
                            acc += kg.k12[id(i - r, j - r)];
                        k11n = lam * kg.k12[id(g, 0)] - b * h * acc;

                        acc = 0.5 * (kg.k21[id(i, j)] + kg.k21[id(g, 0)]);
                        for (int r = 1; r < j; ++r)
                            acc += kg.k21[id(i - r, j - r)];
                        k22n = (a / lam) * h * acc;
                    }
                    update = std::max(update, std::abs(k11n - kg.k11[id(i, j)]));
                    update = std::max(update, std::abs(k22n - kg.k22[id(i, j)]));
                    kg.k11[id(i, j)] = k11n;
                    kg.k22[id(i, j)] = k22n;
                }
            }
            if (guard.step(update)) break;
        }
        kg.residual = std::max(kg.residual, guard.last);
    }

    // --- inverse kernels M = K + M * K --------------------------------------
    // The composition weight of node s in (M*K)(x_i, xi_j) is chosen as
    // w(s; 0..i) * w(j; 0..s) / w(j; 0..i) -- exactly the coefficient the
    // composed discrete transforms produce -- so the discrete inverse undoes
    // the discrete forward transform to iteration tolerance.  It coincides
    // with the plain trapezoid rule except at xi = 0 (the s = 0 endpoint
    // drops) and on the zero-length diagonal.
    {
        kg.m11 = kg.k11;
        kg.m12 = kg.k12;
        kg.m21 = kg.k21;
        kg.m22 = kg.k22;
        SweepGuard guard{"inverse kernel"};
        for (;;) {
            double update = 0.0;
            for (int g = 0; g <= M; ++g) {
                for (int i = std::max(g, 1); i <= M; ++i) {
                    const int j = i - g;
                    const double wij = trap_w(j, i, h);
                    double c11 = 0, c12 = 0, c21 = 0, c22 = 0;
                    for (int s = j; s <= i; ++s) {
                        const double w = trap_w(s, i, h) * trap_w(j, s, h) / wij;
                        if (w == 0.0) continue;
                        const double k11v = kg.k11[id(s, j)],
                                     k12v = kg.k12[id(s, j)],
                                     k21v = kg.k21[id(s, j)],
                                     k22v = kg.k22[id(s, j)];
                        c11 += w * (kg.m11[id(i, s)] * k11v +
                                    kg.m12[id(i, s)] * k21v);
                        c12 += w * (kg.m11[id(i, s)] * k12v +
                                    kg.m12[id(i, s)] * k22v);
                        c21 += w * (kg.m21[id(i, s)] * k11v +
                                    kg.m22[id(i, s)] * k21v);
                        c22 += w * (kg.m21[id(i, s)] * k12v +
                                    kg.m22[id(i, s)] * k22v);
                    }
                    const double n11 = kg.k11[id(i, j)] + c11;
                    const double n12 = kg.k12[id(i, j)] + c12;
                    const double n21 = kg.k21[id(i, j)] + c21;
                    const double n22 = kg.k22[id(i, j)] + c22;
                    update = std::max({update, std::abs(n11 - kg.m11[id(i, j)]),
                                       std::abs(n12 - kg.m12[id(i, j)]),
                                       std::abs(n21 - kg.m21[id(i, j)]),
                                       std::abs(n22 - kg.m22[id(i, j)])});
                    kg.m11[id(i, j)] = n11;
                    kg.m12[id(i, j)] = n12;
                    kg.m21[id(i, j)] = n21;
                    kg.m22[id(i, j)] = n22;
                }
            }
            if (guard.step(update)) break;
        }
        kg.residual = std::max(kg.residual, guard.last);
    }

    kg.gamma1.resize(S);
    kg.gamma2.resize(S);
    kg.gfun.resize(S);
    kg.cw1.resize(S);
    kg.cw2.resize(S);
    for (int i = 0; i <= M; ++i) {
        kg.gamma1[i] = lam * kg.p1[id(i, M)];
        kg.gamma2[i] = lam * kg.p2[id(i, M)];
        kg.gfun[i] = kg.k21[id(i, 0)];
        kg.cw1[i] = kg.m11[id(M, i)];
        kg.cw2[i] = kg.m12[id(M, i)];
    }
    return kg;
}

namespace {

void require_mesh(const KernelGrid& kg, size_t n, const char* who) {
    if (n != size_t(kg.mesh) + 1)
        throw MeshMismatch(std::string(who) + ": field has " +
                           std::to_string(n) + " nodes, kernel mesh wants " +
                           std::to_string(kg.mesh + 1));
}

} // namespace

void control_transform(const KernelGrid& kg, const std::vector<double>& y1,
                       const std::vector<double>& y2, std::vector<double>& z,
                       std::vector<double>& w) {
    require_mesh(kg, y1.size(), "control_transform");
    require_mesh(kg, y2.size(), "control_transform");
    const int M = kg.mesh, S = M + 1;
    const double h = kg.params.L / M;
    const auto id = [S](int i, int j) { return i * S + j; };
    z.assign(S, 0.0);
    w.assign(S, 0.0);
    for (int i = 0; i <= M; ++i) {
        double az = 0.0, aw = 0.0;
        for (int j = 0; j <= i; ++j) {
            const double wt = trap_w(j, i, h);
            az += wt * (kg.k11[id(i, j)] * y1[j] + kg.k12[id(i, j)] * y2[j]);
            aw += wt * (kg.k21[id(i, j)] * y1[j] + kg.k22[id(i, j)] * y2[j]);
        }
        z[i] = y1[i] - az;
        w[i] = y2[i] - aw;
    }
}

void control_inverse(const KernelGrid& kg, const std::vector<double>& z,
                     const std::vector<double>& w, std::vector<double>& y1,
                     std::vector<double>& y2) {
    require_mesh(kg, z.size(), "control_inverse");
    require_mesh(kg, w.size(), "control_inverse");
    const int M = kg.mesh, S = M + 1;
    const double h = kg.params.L / M;
    const auto id = [S](int i, int j) { return i * S + j; };
    y1.assign(S, 0.0);
    y2.assign(S, 0.0);
    for (int i = 0; i <= M; ++i) {
        double a1 = 0.0, a2 = 0.0;
        for (int j = 0; j <= i; ++j) {
            const double wt = trap_w(j, i, h);
            a1 += wt * (kg.m11[id(i, j)] * z[j] + kg.m12[id(i, j)] * w[j]);
            a2 += wt * (kg.m21[id(i, j)] * z[j] + kg.m22[id(i, j)] * w[j]);
        }
        y1[i] = z[i] + a1;
        y2[i] = w[i] + a2;
    }
}

double control_law(const KernelGrid& kg, const std::vector<double>& yhat1,
                   const std::vector<double>& yhat2) {
    std::vector<double> z, w;
    control_transform(kg, yhat1, yhat2, z, w);
    const int M = kg.mesh;
    const double h = kg.params.L / M;
    double u = 0.0;
    for (int j = 0; j <= M; ++j)
        u += trap_w(j, M, h) * (kg.cw1[j] * z[j] + kg.cw2[j] * w[j]);
    return u;
}

double control_law_direct(const KernelGrid& kg,
                          const std::vector<double>& yhat1,
                          const std::vector<double>& yhat2) {
    require_mesh(kg, yhat1.size(), "control_law_direct");
    require_mesh(kg, yhat2.size(), "control_law_direct");
    const int M = kg.mesh, S = M + 1;
    const double h = kg.params.L / M;
    double u = 0.0;
    for (int j = 0; j <= M; ++j)
        u += trap_w(j, M, h) *
             (kg.k11[M * S + j] * yhat1[j] + kg.k12[M * S + j] * yhat2[j]);
    return u;
}

ClosedLoopResult run_closed_loop(const KernelGrid& kg,
                                 const ClosedLoopConfig& cfg) {
    cfg.params.validate();
    const SystemParams& p = cfg.params;
    if (p.a != kg.params.a || p.b != kg.params.b ||
        p.lambda != kg.params.lambda || p.L != kg.params.L)
        throw MeshMismatch("run_closed_loop: kernels were solved for different "
                           "system parameters");
    if (!std::isfinite(cfg.dt) || cfg.dt < 0.0)
        throw std::invalid_argument("run_closed_loop: dt must be finite and >= 0");
    if (!std::isfinite(cfg.t_final) || cfg.t_final < 0.0)
        throw std::invalid_argument("run_closed_loop: t_final must be finite and >= 0");

    const int N = kg.mesh;
    const double L = p.L, lam = p.lambda;
    const double dx = L / N;
    const double dt = cfg.dt > 0.0 ? cfg.dt : dx;
    const double t_opt1 = (lam + 1.0) * L / lam;
    const double t_opt = 2.0 * t_opt1;
    const double t_final = cfg.t_final > 0.0 ? cfg.t_final : 1.2 * t_opt;

    SimState plant = cfg.plant_initial ? *cfg.plant_initial
                                       : default_initial_data(L, N);
    SimState obs;
    if (cfg.observer_initial) {
        obs = *cfg.observer_initial;
    } else {
        obs.u.assign(N + 1, 0.0);
        obs.v.assign(N + 1, 0.0);
        obs.t = plant.t;
    }
    require_mesh(kg, plant.u.size(), "run_closed_loop plant");
    require_mesh(kg, plant.v.size(), "run_closed_loop plant");
    require_mesh(kg, obs.u.size(), "run_closed_loop observer");
    require_mesh(kg, obs.v.size(), "run_closed_loop observer");

    // U as an explicit linear functional of the observer state: compose the
    // inverse-kernel boundary row with the forward transformation once.
    const int S = N + 1;
    const auto id = [S](int i, int j) { return i * S + j; };
    std::vector<double> w1(S, 0.0), w2(S, 0.0);
    for (int m = 0; m <= N; ++m) {
        const double wm = trap_w(m, N, dx);
        w1[m] = wm * kg.cw1[m];
        w2[m] = wm * kg.cw2[m];
    }
    for (int j = 0; j <= N; ++j) {
        const double wj = trap_w(j, N, dx);
        for (int m = 0; m <= j; ++m) {
            const double wm = trap_w(m, j, dx);
            w1[m] -= wj * wm *
                     (kg.cw1[j] * kg.k11[id(j, m)] + kg.cw2[j] * kg.k21[id(j, m)]);
            w2[m] -= wj * wm *
                     (kg.cw1[j] * kg.k12[id(j, m)] + kg.cw2[j] * kg.k22[id(j, m)]);
        }
    }

    // Unknown layout: 4 per node -- plant y1, plant y2, observer y1, observer
    // y2.  Both transports are implicit upwind; the output injection and the
    // control row couple everything into one constant matrix.
    const auto py1 = [](int j) { return 4 * j; };
    const auto py2 = [](int j) { return 4 * j + 1; };
    const auto oy1 = [](int j) { return 4 * j + 2; };
    const auto oy2 = [](int j) { return 4 * j + 3; };
    const int n_unknown = 4 * S;
    const double c_t = 1.0 / dt, c_x = 1.0 / dx, c_lx = lam / dx;

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(size_t(14) * S);
    for (int j = 0; j < N; ++j) { // y1 transports leftward, inflow at x = L
        trips.emplace_back(py1(j), py1(j), c_t + c_x);
        trips.emplace_back(py1(j), py1(j + 1), -c_x);
        trips.emplace_back(py1(j), py2(j), p.a);
        trips.emplace_back(oy1(j), oy1(j), c_t + c_x);
        trips.emplace_back(oy1(j), oy1(j + 1), -c_x);
        trips.emplace_back(oy1(j), oy2(j), p.a);
        trips.emplace_back(oy1(j), py2(N), -kg.gamma1[j]);
        trips.emplace_back(oy1(j), oy2(N), kg.gamma1[j]);
    }
    for (int j = 1; j <= N; ++j) { // y2 transports rightward, inflow at x = 0
        trips.emplace_back(py2(j), py2(j), c_t + c_lx);
        trips.emplace_back(py2(j), py2(j - 1), -c_lx);
        trips.emplace_back(py2(j), py1(j), p.b);
        trips.emplace_back(oy2(j), oy2(j), c_t + c_lx);
        trips.emplace_back(oy2(j), oy2(j - 1), -c_lx);
        trips.emplace_back(oy2(j), oy1(j), p.b);
        trips.emplace_back(oy2(j), py2(N), -kg.gamma2[j]);
        trips.emplace_back(oy2(j), oy2(N), kg.gamma2[j]);
    }
    trips.emplace_back(py2(0), py2(0), 1.0); // reflection y2(0) = y1(0)
    trips.emplace_back(py2(0), py1(0), -1.0);
    trips.emplace_back(oy2(0), oy2(0), 1.0);
    trips.emplace_back(oy2(0), oy1(0), -1.0);
    trips.emplace_back(py1(N), py1(N), 1.0); // y1(L) = U[observer state]
    trips.emplace_back(oy1(N), oy1(N), 1.0);
    for (int m = 0; m <= N; ++m) {
        if (w1[m] != 0.0) {
            trips.emplace_back(py1(N), oy1(m), -w1[m]);
            trips.emplace_back(oy1(N), oy1(m), -w1[m]);
        }
        if (w2[m] != 0.0) {
            trips.emplace_back(py1(N), oy2(m), -w2[m]);
            trips.emplace_back(oy1(N), oy2(m), -w2[m]);
        }
    }

    Eigen::SparseMatrix<double> A(n_unknown, n_unknown);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw SingularStepMatrix("run_closed_loop: implicit step matrix could "
                                 "not be factorized");

    ClosedLoopResult res;
    res.t_opt1 = t_opt1;
    res.t_opt = t_opt;
    const auto record = [&](double t, double u_val) {
        SimState err;
        err.u.resize(S);
        err.v.resize(S);
        for (int j = 0; j <= N; ++j) {
            err.u[j] = plant.u[j] - obs.u[j];
            err.v[j] = plant.v[j] - obs.v[j];
        }
        res.plant.times.push_back(t);
        res.plant.energies.push_back(trapezoid_energy(plant, L));
        res.error.times.push_back(t);
        res.error.energies.push_back(trapezoid_energy(err, L));
        res.control.push_back(u_val);
    };
    double u_now = 0.0;
    for (int m = 0; m <= N; ++m)
        u_now += w1[m] * obs.u[m] + w2[m] * obs.v[m];
    record(plant.t, u_now);

    const double t0 = plant.t;
    const long n_steps = std::max(1L, long(std::ceil((t_final - t0) / dt - 1e-12)));
    Eigen::VectorXd rhs(n_unknown), sol(n_unknown);
    for (long s = 0; s < n_steps; ++s) {
        for (int j = 0; j <= N; ++j) {
            rhs[py1(j)] = j < N ? c_t * plant.u[j] : 0.0;
            rhs[py2(j)] = j > 0 ? c_t * plant.v[j] : 0.0;
            rhs[oy1(j)] = j < N ? c_t * obs.u[j] : 0.0;
            rhs[oy2(j)] = j > 0 ? c_t * obs.v[j] : 0.0;
        }
        sol = lu.solve(rhs);
        for (int j = 0; j <= N; ++j) {
            plant.u[j] = sol[py1(j)];
            plant.v[j] = sol[py2(j)];
            obs.u[j] = sol[oy1(j)];
            obs.v[j] = sol[oy2(j)];
        }
        plant.t = obs.t = t0 + (s + 1) * dt;
        if (!finite_state(plant.u) || !finite_state(plant.v) ||
            !finite_state(obs.u) || !finite_state(obs.v))
            throw NonFiniteState("run_closed_loop: state left double range at "
                                 "step " + std::to_string(s + 1));
        // the control row pins the new boundary value to U(t)
        record(plant.t, plant.u[N]);
    }
    res.plant_final = std::move(plant);
    res.observer_final = std::move(obs);
    return res;
}

SimResult run_target_system(const KernelGrid& kg, TargetKind which,
                            double t_final, std::optional<SimState> initial) {
    if (!std::isfinite(t_final) || t_final <= 0.0)
        throw std::invalid_argument("run_target_system: t_final must be positive");
    const int N = kg.mesh, S = N + 1;
    const double L = kg.params.L, lam = kg.params.lambda, b = kg.params.b;
    const double dx = L / N;
    const double dt = dx; // unit-speed component advances by exact shift
    const auto id = [S](int i, int j) { return i * S + j; };

    SimState st = initial ? *initial : default_initial_data(L, N);
    require_mesh(kg, st.u.size(), "run_target_system");
    require_mesh(kg, st.v.size(), "run_target_system");

    SimResult out;
    out.trace.times.push_back(st.t);
    out.trace.energies.push_back(trapezoid_energy(st, L));

    std::vector<double> nu(S), nv(S), src(S);
    const long n_steps = std::max(1L, long(std::ceil((t_final - st.t) / dt - 1e-12)));
    for (long s = 0; s < n_steps; ++s) {
        if (which == TargetKind::ErrorTarget) {
            // d_t alpha - d_x alpha + int_x^L Q1(x,xi) alpha(xi) dxi = 0
            // d_t beta + lam d_x beta + int_x^L Q2(x,xi) alpha(xi) dxi
            //                         + b alpha = 0
            // alpha(t,L) = 0, beta(t,0) = alpha(t,0)
            const auto sub_w = [&](int r, int m) { // node r on [x_m, L]
                if (m >= N) return 0.0;
                return (r == m || r == N) ? 0.5 * dx : dx;
            };
            for (int m = 0; m <= N; ++m) {
                double acc = 0.0;
                for (int r = m; r <= N; ++r)
                    acc += sub_w(r, m) * kg.q1[id(m, r)] * st.u[r];
                src[m] = m < N ? acc : 0.0;
            }
            nu[N] = 0.0;
            for (int j = 0; j < N; ++j)
                nu[j] = st.u[j + 1] - dt * src[j + 1];
            for (int j = 1; j <= N; ++j) {
                const double foot = std::max(0.0, j * dx - lam * dt);
                const double f = foot / dx;
                const int i0 = std::min(int(f), N - 1);
                const double th = f - i0;
                double q2a = 0.0;
                for (int r = j; r <= N; ++r)
                    q2a += sub_w(r, j) * kg.q2[id(j, r)] * st.u[r];
                nv[j] = (1.0 - th) * st.v[i0] + th * st.v[i0 + 1] -
                        dt * (q2a + b * st.u[j]);
            }
            nv[0] = nu[0];
        } else {
            // d_t z - d_x z = 0,  d_t w + lam d_x w = g(x) w(t,0)
            // z(t,L) = 0, w(t,0) = z(t,0)
            nu[N] = 0.0;
            for (int j = 0; j < N; ++j)
                nu[j] = st.u[j + 1];
            for (int j = 1; j <= N; ++j) {
                const double foot = std::max(0.0, j * dx - lam * dt);
                const double f = foot / dx;
                const int i0 = std::min(int(f), N - 1);
                const double th = f - i0;
                nv[j] = (1.0 - th) * st.v[i0] + th * st.v[i0 + 1] +
                        dt * kg.gfun[j] * st.v[0];
            }
            nv[0] = nu[0];
        }
        st.u = nu;
        st.v = nv;
        st.t += dt;
        if (!finite_state(st.u) || !finite_state(st.v))
            throw NonFiniteState("run_target_system: state left double range "
                                 "at step " + std::to_string(s + 1));
        out.trace.times.push_back(st.t);
        out.trace.energies.push_back(trapezoid_energy(st, L));
    }
    out.final_state = std::move(st);
    return out;
}

} // namespace hypstab
