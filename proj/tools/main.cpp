// Command-line surface for the stability toolkit: single-point queries,
// curve tables, simulations, backstepping runs, parallel (k, L) sweeps and
// figure emission. Exit codes: 0 success, 1 usage error, 2 numerical
// failure (the error name goes to stderr).

#include "hypstab/backstepping.hpp"
#include "hypstab/charfn.hpp"
#include "hypstab/errors.hpp"
#include "hypstab/marginal.hpp"
#include "hypstab/simulate.hpp"
#include "hypstab/spectral.hpp"
#include "hypstab/sweep.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace {

using hypstab::SystemParams;
using json = nlohmann::json;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct OutputOpts {
    std::string format = "csv";
    std::string path; // empty: stdout
};

// Every subcommand accepts --config <file>. The file holds key=value lines
// whose keys are long option names; values from the file only fill options
// that were not given explicitly, so command-line flags always win. The
// merge happens before parsing (see merge_config_into), the option here
// carries the path and the --help text.
void add_config_opt(CLI::App* sub) {
    sub->add_option("--config",
                    "key=value configuration file; explicit flags take "
                    "precedence");
}

std::string trim(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos)
        return "";
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

void merge_config_into(const CLI::App& app, std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            break;
        }
    }
    if (path.empty())
        return;
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot read config file " + path);

    const CLI::App* sub = nullptr;
    std::set<std::string> given;
    for (const auto& t : args) {
        if (t.rfind("--", 0) == 0)
            given.insert(t.substr(0, t.find('=')));
        else if (!sub && !t.empty() && t[0] != '-')
            sub = app.get_subcommand_no_throw(t);
    }

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": empty key");
        const std::string flag = "--" + key;
        if (flag == "--config" || given.count(flag))
            continue;
        const CLI::Option* opt =
            sub ? sub->get_option_no_throw(flag) : nullptr;
        if (opt && opt->get_expected_min() == 0) {
            // Pure flag: truthy values set it, falsy values leave it unset.
            if (value == "true" || value == "1" || value == "yes" ||
                value == "on")
                args.push_back(flag);
            continue;
        }
        args.push_back(flag);
        args.push_back(value);
    }
}

void add_output_opts(CLI::App* sub, OutputOpts& out) {
    sub->add_option("--format", out.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--output", out.path, "write to this file instead of stdout");
}

void emit(const OutputOpts& out, const std::string& payload) {
    if (out.path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream f(out.path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open " + out.path + " for writing");
    f << payload;
    f.flush();
    if (!f.good())
        throw std::runtime_error("failed writing " + out.path);
}

void add_system_flags(CLI::App* sub, SystemParams& p, bool with_gain = true) {
    sub->add_option("--a", p.a, "coupling a")->required();
    sub->add_option("--b", p.b, "coupling b")->required();
    sub->add_option("--lambda", p.lambda, "leftward transport speed")
        ->capture_default_str();
    sub->add_option("--L", p.L, "interval length")->capture_default_str();
    if (with_gain)
        sub->add_option("--k", p.k, "boundary feedback gain")
            ->capture_default_str();
}

std::string trace_csv(const hypstab::EnergyTrace& tr) {
    std::string out = "t,energy\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        out += g17(tr.times[i]) + "," + g17(tr.energies[i]) + "\n";
    return out;
}

json trace_json(const hypstab::EnergyTrace& tr) {
    return json{{"t", tr.times}, {"energy", tr.energies}};
}

// ---- subcommand setups ------------------------------------------------

void setup_lc(CLI::App& app) {
    auto sub = app.add_subcommand(
        "lc", "critical interval length of the stabilizability dichotomy");
    add_config_opt(sub);
    auto p = std::make_shared<SystemParams>();
    auto out = std::make_shared<OutputOpts>();
    sub->add_option("--a", p->a, "coupling a")->required();
    sub->add_option("--b", p->b, "coupling b")->required();
    sub->add_option("--lambda", p->lambda, "leftward transport speed")
        ->capture_default_str();
    add_output_opts(sub, *out);
    sub->callback([p, out]() {
        const auto lc = hypstab::critical_length(p->a, p->b, p->lambda);
        if (out->format == "json") {
            json j{{"a", p->a},
                   {"b", p->b},
                   {"lambda", p->lambda},
                   {"finite", lc.has_value()}};
            j["critical_length"] = lc.has_value() ? json(*lc) : json(nullptr);
            emit(*out, j.dump(2) + "\n");
        } else {
            emit(*out, (lc.has_value() ? g17(*lc) : "Infinite") + "\n");
        }
    });
}

void setup_char_eval(CLI::App& app) {
    auto sub = app.add_subcommand(
        "char-eval", "evaluate the characteristic function at one point");
    add_config_opt(sub);
    auto p = std::make_shared<SystemParams>();
    auto out = std::make_shared<OutputOpts>();
    auto re = std::make_shared<double>(0.0);
    auto im = std::make_shared<double>(0.0);
    add_system_flags(sub, *p);
    sub->add_option("--re", *re, "Re sigma")->capture_default_str();
    sub->add_option("--im", *im, "Im sigma")->capture_default_str();
    add_output_opts(sub, *out);
    sub->callback([p, out, re, im]() {
        p->validate();
        const hypstab::Complex sigma(*re, *im);
        const auto scaled = hypstab::eval_char_scaled(*p, sigma);
        bool have_raw = true;
        hypstab::Complex F;
        try {
            F = hypstab::eval_char(*p, sigma);
        } catch (const hypstab::OverflowError&) {
            have_raw = false; // the scaled representation still stands
        }
        if (out->format == "json") {
            json j{{"sigma", {{"re", *re}, {"im", *im}}},
                   {"log_abs", scaled.log_abs()},
                   {"arg", scaled.arg()}};
            j["F"] = have_raw
                         ? json{{"re", F.real()}, {"im", F.imag()}}
                         : json(nullptr);
            emit(*out, j.dump(2) + "\n");
        } else {
            std::string csv = "F_re,F_im,log_abs,arg\n";
            csv += (have_raw ? g17(F.real()) : std::string()) + ",";
            csv += (have_raw ? g17(F.imag()) : std::string()) + ",";
            csv += g17(scaled.log_abs()) + "," + g17(scaled.arg()) + "\n";
            emit(*out, csv);
        }
    });
}

void setup_count(CLI::App& app) {
    auto sub = app.add_subcommand(
        "count", "count unstable eigenvalues by contour winding");
    add_config_opt(sub);
    auto p = std::make_shared<SystemParams>();
    auto out = std::make_shared<OutputOpts>();
    auto radius = std::make_shared<double>(0.0);
    add_system_flags(sub, *p);
    sub->add_option("--radius", *radius,
                    "fixed contour radius (0 chooses automatically)")
        ->capture_default_str();
    add_output_opts(sub, *out);
    sub->callback([p, out, radius]() {
        std::optional<hypstab::ContourSpec> spec;
        if (*radius > 0.0) {
            spec.emplace();
            spec->radius = *radius;
        }
        const auto rep = hypstab::count_unstable(*p, spec);
        const bool marginal = rep.verdict == hypstab::Verdict::Marginal;
        const std::string verdict =
            marginal ? "marginal"
                     : (rep.verdict == hypstab::Verdict::Stable ? "stable"
                                                               : "unstable");
        if (out->format == "json") {
            json j{{"radius", rep.radius_used},
                   {"min_abs_on_contour", rep.min_abs_on_contour},
                   {"verdict", verdict}};
            j["N"] = marginal ? json(nullptr) : json(rep.n_unstable);
            emit(*out, j.dump(2) + "\n");
        } else {
            std::string csv = "N,radius,min_abs,verdict\n";
            csv += (marginal ? std::string()
                             : std::to_string(rep.n_unstable)) +
                   "," + g17(rep.radius_used) + "," +
                   g17(rep.min_abs_on_contour) + "," + verdict + "\n";
            emit(*out, csv);
        }
    });
}

void setup_marginal(CLI::App& app) {
    auto sub = app.add_subcommand(
        "marginal", "tabulate the marginal curves in the (k, L) plane");
    add_config_opt(sub);
    auto out = std::make_shared<OutputOpts>();
    auto a = std::make_shared<double>(0.0);
    auto b = std::make_shared<double>(0.0);
    auto lambda = std::make_shared<double>(1.0);
    auto max_height = std::make_shared<double>(10.0);
    auto samples = std::make_shared<int>(65);
    auto threshold_at = std::make_shared<double>(0.0);
    sub->add_option("--a", *a, "coupling a")->required();
    sub->add_option("--b", *b, "coupling b")->required();
    sub->add_option("--lambda", *lambda, "leftward transport speed")
        ->capture_default_str();
    sub->add_option("--max-height", *max_height,
                    "ignore branches that stay above this length")
        ->capture_default_str();
    sub->add_option("--samples", *samples, "points per curve")
        ->check(CLI::Range(2, 100000))
        ->capture_default_str();
    auto thr_opt = sub->add_option(
        "--threshold-at", *threshold_at,
        "report where the lowest branch crosses this length instead");
    add_output_opts(sub, *out);
    sub->callback([out, a, b, lambda, max_height, samples, threshold_at,
                   thr_opt]() {
        if (thr_opt->count() > 0) {
            const auto thr =
                hypstab::threshold_k(*a, *b, *lambda, *threshold_at);
            const bool crossing =
                thr.kind == hypstab::ThresholdKind::Crossing;
            const std::string kind =
                crossing ? "crossing"
                         : (thr.kind == hypstab::ThresholdKind::AllStable
                                ? "all_stable"
                                : "all_unstable");
            if (out->format == "json") {
                json j{{"L", *threshold_at}, {"kind", kind}};
                j["k"] = crossing ? json(thr.k) : json(nullptr);
                j["stable_above"] =
                    crossing ? json(thr.stable_above) : json(nullptr);
                emit(*out, j.dump(2) + "\n");
            } else {
                std::string csv = "kind,k,stable_above\n";
                csv += kind + ",";
                csv += (crossing ? g17(thr.k) : std::string()) + ",";
                csv += (crossing ? (thr.stable_above ? "true" : "false")
                                 : std::string()) +
                       "\n";
                emit(*out, csv);
            }
            return;
        }
        const auto curves =
            hypstab::marginal_curves(*a, *b, *lambda, *max_height);
        std::string csv = "branch,k,L\n";
        json rows = json::array();
        for (const auto& c : curves) {
            const double span = c.k_max - c.k_min;
            const double lo = c.closed_min ? c.k_min : c.k_min + 1e-12 * span;
            const double hi = c.closed_max ? c.k_max : c.k_max - 1e-12 * span;
            for (int i = 0; i < *samples; ++i) {
                const double k = lo + (hi - lo) * i / (*samples - 1);
                const double L = c.eval(k);
                if (!std::isfinite(L))
                    continue;
                csv += std::to_string(c.branch_index) + "," + g17(k) + "," +
                       g17(L) + "\n";
                rows.push_back(
                    {{"branch", c.branch_index}, {"k", k}, {"L", L}});
            }
        }
        if (out->format == "json")
            emit(*out, rows.dump(2) + "\n");
        else
            emit(*out, csv);
    });
}

void setup_simulate(CLI::App& app) {
    auto sub = app.add_subcommand(
        "simulate", "integrate the closed-loop system and record its energy");
    add_config_opt(sub);
    auto cfg = std::make_shared<hypstab::SimConfig>();
    auto out = std::make_shared<OutputOpts>();
    auto rate_only = std::make_shared<bool>(false);
    add_system_flags(sub, cfg->params);
    sub->add_option("--n-cells", cfg->n_cells, "number of grid cells")
        ->capture_default_str();
    sub->add_option("--dt", cfg->dt, "time step (0 selects 2L/N)")
        ->capture_default_str();
    sub->add_option("--t-final", cfg->t_final, "final time")
        ->capture_default_str();
    sub->add_flag("--rate", *rate_only,
                  "print only the fitted energy decay rate");
    add_output_opts(sub, *out);
    sub->callback([cfg, out, rate_only]() {
        const auto res = hypstab::run_simulation(*cfg);
        if (*rate_only) {
            const double rate = hypstab::fit_decay_rate(res.trace);
            if (out->format == "json")
                emit(*out, json{{"rate", rate}}.dump(2) + "\n");
            else
                emit(*out, g17(rate) + "\n");
            return;
        }
        if (out->format == "json")
            emit(*out, trace_json(res.trace).dump(2) + "\n");
        else
            emit(*out, trace_csv(res.trace));
    });
}

void setup_backstep(CLI::App& app) {
    auto sub = app.add_subcommand(
        "backstep",
        "observer-based backstepping control: kernels, gains, closed loop");
    add_config_opt(sub);
    auto p = std::make_shared<SystemParams>();
    auto out = std::make_shared<OutputOpts>();
    auto mesh = std::make_shared<int>(128);
    auto dt = std::make_shared<double>(0.0);
    auto t_final = std::make_shared<double>(0.0);
    auto what = std::make_shared<std::string>("trace");
    add_system_flags(sub, *p, /*with_gain=*/false);
    sub->add_option("--mesh", *mesh, "kernel and simulation mesh")
        ->capture_default_str();
    sub->add_option("--dt", *dt, "time step (0 selects L/mesh)")
        ->capture_default_str();
    sub->add_option("--t-final", *t_final,
                    "final time (0 selects 1.2 times the settling time)")
        ->capture_default_str();
    sub->add_option("--emit", *what, "what to write")
        ->check(CLI::IsMember({"trace", "kernels", "gains"}))
        ->capture_default_str();
    add_output_opts(sub, *out);
    sub->callback([p, out, mesh, dt, t_final, what]() {
        const auto kg = hypstab::solve_kernels(*p, *mesh);
        const int M = kg.mesh;
        const double h = p->L / M;
        if (*what == "kernels") {
            struct Entry {
                const char* name;
                const std::vector<double>* grid;
                bool upper;
            };
            const Entry entries[] = {
                {"P1", &kg.p1, true},   {"P2", &kg.p2, true},
                {"Q1", &kg.q1, true},   {"Q2", &kg.q2, true},
                {"K11", &kg.k11, false}, {"K12", &kg.k12, false},
                {"K21", &kg.k21, false}, {"K22", &kg.k22, false},
                {"M11", &kg.m11, false}, {"M12", &kg.m12, false},
                {"M21", &kg.m21, false}, {"M22", &kg.m22, false},
            };
            std::string csv = "kernel,x,xi,value\n";
            json rows = json::array();
            for (const auto& e : entries) {
                for (int i = 0; i <= M; ++i) {
                    const int j_lo = e.upper ? i : 0;
                    const int j_hi = e.upper ? M : i;
                    for (int j = j_lo; j <= j_hi; ++j) {
                        const double v =
                            kg.value(*e.grid, i * h, j * h, e.upper);
                        if (out->format == "json")
                            rows.push_back({{"kernel", e.name},
                                            {"x", i * h},
                                            {"xi", j * h},
                                            {"value", v}});
                        else
                            csv += std::string(e.name) + "," + g17(i * h) +
                                   "," + g17(j * h) + "," + g17(v) + "\n";
                    }
                }
            }
            emit(*out, out->format == "json" ? rows.dump() + "\n" : csv);
            return;
        }
        if (*what == "gains") {
            std::string csv = "x,gamma1,gamma2,g,w1,w2\n";
            json rows = json::array();
            for (int i = 0; i <= M; ++i) {
                if (out->format == "json")
                    rows.push_back({{"x", i * h},
                                    {"gamma1", kg.gamma1[i]},
                                    {"gamma2", kg.gamma2[i]},
                                    {"g", kg.gfun[i]},
                                    {"w1", kg.cw1[i]},
                                    {"w2", kg.cw2[i]}});
                else
                    csv += g17(i * h) + "," + g17(kg.gamma1[i]) + "," +
                           g17(kg.gamma2[i]) + "," + g17(kg.gfun[i]) + "," +
                           g17(kg.cw1[i]) + "," + g17(kg.cw2[i]) + "\n";
            }
            emit(*out, out->format == "json" ? rows.dump(2) + "\n" : csv);
            return;
        }
        hypstab::ClosedLoopConfig cfg;
        cfg.params = *p;
        cfg.dt = *dt;
        cfg.t_final = *t_final;
        const auto res = hypstab::run_closed_loop(kg, cfg);
        if (out->format == "json") {
            json j{{"t", res.plant.times},
                   {"E_plant", res.plant.energies},
                   {"E_error", res.error.energies},
                   {"U", res.control},
                   {"t_opt1", res.t_opt1},
                   {"t_opt", res.t_opt}};
            emit(*out, j.dump(2) + "\n");
        } else {
            std::string csv = "t,E_plant,E_error,U\n";
            for (std::size_t i = 0; i < res.plant.times.size(); ++i)
                csv += g17(res.plant.times[i]) + "," +
                       g17(res.plant.energies[i]) + "," +
                       g17(res.error.energies[i]) + "," + g17(res.control[i]) +
                       "\n";
            emit(*out, csv);
        }
    });
}

void add_sweep_flags(CLI::App* sub, hypstab::SweepSpec& spec, int& jobs) {
    sub->add_option("--a", spec.a, "coupling a")->required();
    sub->add_option("--b", spec.b, "coupling b")->required();
    sub->add_option("--lambda", spec.lambda, "leftward transport speed")
        ->capture_default_str();
    sub->add_option("--k-min", spec.k_min, "lowest gain")
        ->capture_default_str();
    sub->add_option("--k-max", spec.k_max, "highest gain")
        ->capture_default_str();
    sub->add_option("--k-count", spec.k_count, "gain nodes")
        ->capture_default_str();
    sub->add_option("--L-min", spec.L_min, "shortest length")
        ->capture_default_str();
    sub->add_option("--L-max", spec.L_max, "longest length")
        ->capture_default_str();
    sub->add_option("--L-count", spec.L_count, "length nodes")
        ->capture_default_str();
    sub->add_option("--margin", spec.exclusion_margin,
                    "marginal-curve exclusion distance")
        ->capture_default_str();
    sub->add_option("--sim-cells", spec.sim_cells,
                    "grid cells per simulation")
        ->capture_default_str();
    sub->add_option("--sim-t-final", spec.sim_t_final,
                    "final time per simulation")
        ->capture_default_str();
    std::map<std::string, hypstab::SweepMethod> methods{
        {"spectral", hypstab::SweepMethod::Spectral},
        {"simulation", hypstab::SweepMethod::Simulation},
        {"both", hypstab::SweepMethod::Both}};
    sub->add_option("--method", spec.method, "per-cell evaluation")
        ->transform(CLI::CheckedTransformer(methods, CLI::ignore_case))
        ->default_str("spectral");
    sub->add_option("--jobs", jobs, "worker threads")
        ->check(CLI::Range(1, 1024))
        ->capture_default_str();
}

void setup_sweep(CLI::App& app) {
    auto sub = app.add_subcommand(
        "sweep", "evaluate a (k, L) stability grid in parallel");
    add_config_opt(sub);
    auto spec = std::make_shared<hypstab::SweepSpec>();
    auto jobs = std::make_shared<int>(1);
    auto out = std::make_shared<OutputOpts>();
    add_sweep_flags(sub, *spec, *jobs);
    add_output_opts(sub, *out);
    sub->callback([spec, jobs, out]() {
        const auto result = hypstab::run_sweep(*spec, *jobs);
        if (out->format == "json") {
            json rows = json::array();
            for (const auto& c : result.cells) {
                json row{{"k", c.k}, {"L", c.L}, {"marginal", c.marginal}};
                row["N"] = c.n_unstable.has_value() ? json(*c.n_unstable)
                                                    : json(nullptr);
                row["rate"] =
                    c.rate.has_value() ? json(*c.rate) : json(nullptr);
                row["agree"] =
                    c.agree.has_value() ? json(*c.agree) : json(nullptr);
                row["error"] = c.error;
                rows.push_back(std::move(row));
            }
            emit(*out, rows.dump(2) + "\n");
        } else {
            emit(*out, hypstab::sweep_csv(result));
        }
    });
}

void setup_heatmap(CLI::App& app) {
    auto sub = app.add_subcommand(
        "heatmap", "run a sweep and render it as a standalone SVG");
    add_config_opt(sub);
    auto spec = std::make_shared<hypstab::SweepSpec>();
    auto jobs = std::make_shared<int>(1);
    auto path = std::make_shared<std::string>("sweep.svg");
    add_sweep_flags(sub, *spec, *jobs);
    sub->add_option("--output", *path, "SVG destination")
        ->capture_default_str();
    sub->callback([spec, jobs, path]() {
        const auto result = hypstab::run_sweep(*spec, *jobs);
        hypstab::render_heatmap(result, *path);
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability analysis of 2x2 hyperbolic boundary-control "
                 "systems: critical lengths, eigenvalue counts, marginal "
                 "curves, simulations, backstepping and parameter sweeps",
                 "hypstab"};
    app.require_subcommand(1);

    setup_lc(app);
    setup_char_eval(app);
    setup_count(app);
    setup_marginal(app);
    setup_simulate(app);
    setup_backstep(app);
    setup_sweep(app);
    setup_heatmap(app);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        merge_config_into(app, args);
        std::reverse(args.begin(), args.end()); // parse() pops from the back
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const hypstab::NumericalError& e) {
        std::cerr << e.kind() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
