#include "hypstab/sweep.hpp"

#include "hypstab/errors.hpp"
#include "hypstab/simulate.hpp"
#include "hypstab/spectral.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace hypstab {

namespace {

// Marginal curves reduced to polylines for distance queries. Each branch
// is sampled densely over its gain domain; heights beyond the relevant
// window are clamped so that asymptotes become near-vertical segments with
// the correct horizontal position. The construction is a pure function of
// the spec, so a cell evaluated in isolation tags exactly like one
// evaluated inside a sweep.
class CurveSampler {
  public:
    CurveSampler(const SweepSpec& spec) : margin_(spec.exclusion_margin) {
        if (margin_ <= 0.0)
            return;
        curves_ = marginal_curves(spec.a, spec.b, spec.lambda,
                                  spec.L_max + margin_ + 1e-9);
        const double cap = spec.L_max + 10.0 * margin_ + 1.0;
        const int n_seg = 4096;
        for (const auto& c : curves_) {
            const double span = c.k_max - c.k_min;
            const double lo = c.closed_min ? c.k_min : c.k_min + 1e-12 * span;
            const double hi = c.closed_max ? c.k_max : c.k_max - 1e-12 * span;
            std::vector<std::array<double, 2>> poly;
            poly.reserve(n_seg + 1);
            for (int i = 0; i <= n_seg; ++i) {
                const double k = lo + (hi - lo) * i / n_seg;
                double L = c.eval(k);
                if (!std::isfinite(L))
                    L = cap;
                poly.push_back({k, std::min(L, cap)});
            }
            polys_.push_back(std::move(poly));
        }
    }

    bool within_margin(double k, double L) const {
        if (margin_ <= 0.0)
            return false;
        for (const auto& c : curves_) {
            if (!c.contains(k))
                continue;
            const double v = c.eval(k);
            if (std::isfinite(v) && std::abs(L - v) <= margin_)
                return true;
        }
        const double m2 = margin_ * margin_;
        for (const auto& poly : polys_)
            for (std::size_t i = 0; i + 1 < poly.size(); ++i)
                if (segment_dist2(k, L, poly[i], poly[i + 1]) <= m2)
                    return true;
        return false;
    }

  private:
    static double segment_dist2(double px, double py,
                                const std::array<double, 2>& a,
                                const std::array<double, 2>& b) {
        const double dx = b[0] - a[0];
        const double dy = b[1] - a[1];
        const double len2 = dx * dx + dy * dy;
        double t = 0.0;
        if (len2 > 0.0)
            t = std::clamp(((px - a[0]) * dx + (py - a[1]) * dy) / len2,
                           0.0, 1.0);
        const double ex = px - (a[0] + t * dx);
        const double ey = py - (a[1] + t * dy);
        return ex * ex + ey * ey;
    }

    double margin_;
    std::vector<MarginalCurve> curves_;
    std::vector<std::vector<std::array<double, 2>>> polys_;
};

SweepCell evaluate_cell_impl(const SweepSpec& spec, const CurveSampler& curves,
                             int ik, int il) {
    SweepCell cell;
    cell.k = grid_value(spec.k_min, spec.k_max, spec.k_count, ik);
    cell.L = grid_value(spec.L_min, spec.L_max, spec.L_count, il);
    cell.marginal = curves.within_margin(cell.k, cell.L);

    SystemParams p;
    p.a = spec.a;
    p.b = spec.b;
    p.lambda = spec.lambda;
    p.L = cell.L;
    p.k = cell.k;

    if (spec.method != SweepMethod::Simulation) {
        try {
            const SpectralReport rep = count_unstable(p);
            if (rep.verdict == Verdict::Marginal)
                cell.marginal = true; // sigma = 0 is numerically a root
            else
                cell.n_unstable = rep.n_unstable;
        } catch (const NumericalError& e) {
            cell.error = e.kind();
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    }
    if (spec.method != SweepMethod::Spectral) {
        try {
            SimConfig sc;
            sc.params = p;
            sc.n_cells = spec.sim_cells;
            sc.t_final = spec.sim_t_final;
            cell.rate = fit_decay_rate(run_simulation(sc).trace);
        } catch (const NumericalError& e) {
            if (cell.error.empty())
                cell.error = e.kind();
        } catch (const std::exception& e) {
            if (cell.error.empty())
                cell.error = e.what();
        }
    }
    if (!cell.marginal && cell.n_unstable.has_value() && cell.rate.has_value())
        cell.agree = (*cell.n_unstable == 0) == (*cell.rate < 0.0);
    return cell;
}

std::string cell_flag(const SweepCell& c) {
    if (c.marginal)
        return "marginal";
    if (!c.error.empty())
        return "error:" + c.error;
    if (c.agree.has_value())
        return *c.agree ? "agree" : "disagree";
    return "ok";
}

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

void SweepSpec::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("lambda must be strictly positive");
    if (!std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("couplings must be finite");
    if (!(k_min < k_max) || !std::isfinite(k_min) || !std::isfinite(k_max))
        throw std::invalid_argument("gain range must be ordered and finite");
    if (!(L_min < L_max) || !(L_min > 0.0) || !std::isfinite(L_max))
        throw std::invalid_argument(
            "length range must be ordered, positive and finite");
    if (k_count < 2 || L_count < 2)
        throw std::invalid_argument("grid needs at least 2 nodes per axis");
    if (!(exclusion_margin >= 0.0) || !std::isfinite(exclusion_margin))
        throw std::invalid_argument("exclusion margin must be >= 0");
    if (method != SweepMethod::Simulation &&
        !(k_min > -1.0 && k_max < 1.0))
        throw std::invalid_argument(
            "spectral sweeps require gains inside (-1, 1)");
    if (method != SweepMethod::Spectral) {
        if (sim_cells < 2)
            throw std::invalid_argument("sim_cells must be at least 2");
        if (!(sim_t_final > 0.0) || !std::isfinite(sim_t_final))
            throw std::invalid_argument("sim_t_final must be positive");
    }
}

double grid_value(double lo, double hi, int count, int i) {
    if (count < 2 || i < 0 || i >= count)
        throw std::invalid_argument("grid index out of range");
    if (i == count - 1)
        return hi;
    return lo + (hi - lo) * i / (count - 1);
}

const SweepCell& SweepResult::at(int ik, int il) const {
    if (ik < 0 || ik >= spec.k_count || il < 0 || il >= spec.L_count)
        throw std::invalid_argument("cell index out of range");
    return cells[static_cast<std::size_t>(ik) * spec.L_count + il];
}

SweepCell evaluate_cell(const SweepSpec& spec, int ik, int il) {
    spec.validate();
    if (ik < 0 || ik >= spec.k_count || il < 0 || il >= spec.L_count)
        throw std::invalid_argument("cell index out of range");
    const CurveSampler curves(spec);
    return evaluate_cell_impl(spec, curves, ik, il);
}

SweepResult run_sweep(const SweepSpec& spec, int jobs) {
    spec.validate();
    const CurveSampler curves(spec);

    SweepResult result;
    result.spec = spec;
    const std::size_t total =
        static_cast<std::size_t>(spec.k_count) * spec.L_count;
    result.cells.resize(total);

    const int workers = std::max(
        1, std::min(jobs, static_cast<int>(total)));
    if (workers == 1) {
        for (std::size_t idx = 0; idx < total; ++idx)
            result.cells[idx] = evaluate_cell_impl(
                spec, curves, static_cast<int>(idx) / spec.L_count,
                static_cast<int>(idx) % spec.L_count);
        return result;
    }

    // Cells are pure functions of their own parameters and land in
    // disjoint slots, so scheduling cannot change the result.
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= total)
                return;
            result.cells[idx] = evaluate_cell_impl(
                spec, curves, static_cast<int>(idx) / spec.L_count,
                static_cast<int>(idx) % spec.L_count);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    return result;
}

std::string sweep_csv(const SweepResult& r) {
    std::string out = "k,L,N,rate,flag\n";
    for (const auto& c : r.cells) {
        append_g17(out, c.k);
        out += ',';
        append_g17(out, c.L);
        out += ',';
        if (c.n_unstable.has_value())
            out += std::to_string(*c.n_unstable);
        out += ',';
        if (c.rate.has_value())
            append_g17(out, *c.rate);
        out += ',';
        out += cell_flag(c);
        out += '\n';
    }
    return out;
}

} // namespace hypstab
