#include "wbsde/cli.hpp"

#include "wbsde/ensemble.hpp"
#include "wbsde/errors.hpp"
#include "wbsde/estimates.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/fd.hpp"
#include "wbsde/feynman_kac.hpp"
#include "wbsde/fixtures.hpp"
#include "wbsde/oracle.hpp"
#include "wbsde/solver.hpp"
#include "wbsde/transforms.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

namespace wbsde::cli {

namespace {

using nlohmann::json;

const std::set<std::string> kExperimentTypes = {"simulate",   "solve",     "apriori",
                                                "dependence", "stability", "feynman-kac",
                                                "validate",   "refine"};

double get_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int get_or(const json& j, const char* key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
}

// Shared run inputs derived from the config.
struct RunContext {
    std::uint64_t seed = 0;
    int n_paths = 20000;
    int n_steps = 0;   // 0 = fixture default
    double t_cap = 0;  // 0 = fixture default
    WeightParams weights;
    SolverSettings solver;
    std::filesystem::path dir;
    JsonlWriter* report = nullptr;
};

struct SolvedFixture {
    Fixture fx;
    TimeGrid grid;
    PathEnsemble ens;
    TerminalTime tau;
    CoefficientTrace trace;
    std::vector<double> xi;
    SolverSettings settings;
    PicardResult picard;
};

CoefficientTrace trace_from_model(const CoefficientModel& cm, const WeightParams& wp,
                                  const PathEnsemble& ens) {
    const TimeGrid& grid = ens.grid;
    std::vector<double> mu(static_cast<std::size_t>(ens.n_paths) * grid.n_nodes(), 0.0);
    std::vector<double> nu(mu.size(), 0.0);
    if (cm.mu || cm.nu) {
        exec::for_each_index(static_cast<std::size_t>(ens.n_paths), [&](std::size_t p) {
            for (int i = 0; i < grid.n_nodes(); ++i) {
                const auto xs = ens.state(static_cast<int>(p), i);
                mu[p * grid.n_nodes() + i] = cm.mu_at(grid.node(i), xs);
                nu[p * grid.n_nodes() + i] = cm.nu_at(grid.node(i), xs);
            }
        });
    }
    CoefficientTrace trace = make_trace(wp, ens.n_paths, grid.n_nodes(), mu, nu);
    cumulative_weight(trace, grid);
    return trace;
}

SolvedFixture solve_fixture(const RunContext& ctx, const std::string& fixture_id,
                            bool run_picard = true) {
    SolvedFixture s;
    s.fx = make_fixture(fixture_id);
    s.fx.weights = ctx.weights;
    const double t_cap = ctx.t_cap > 0 ? ctx.t_cap : s.fx.t_end;
    const int n_steps = ctx.n_steps > 0 ? ctx.n_steps : s.fx.default_steps;
    s.grid = make_grid(t_cap, n_steps);
    s.ens = simulate_brownian(s.grid, ctx.n_paths, s.fx.sde.d, ctx.seed);
    euler_maruyama(s.fx.sde, 0.0, s.fx.x0, s.ens);
    s.tau = TerminalTime::deterministic(ctx.n_paths, n_steps);
    if (s.fx.capped_infinite) {
        s.tau.kind = TerminalTime::Kind::CappedInfinite;
        s.tau.capped.assign(static_cast<std::size_t>(ctx.n_paths), 1);
        s.tau.truncation_mass = 1.0;
    }
    s.trace = trace_from_model(s.fx.generator.coeff, ctx.weights, s.ens);
    s.xi = evaluate_terminal(s.fx.terminal, s.ens, s.tau);
    s.settings = ctx.solver;
    s.settings.implicit_y = s.settings.implicit_y || s.fx.implicit_y;
    if (run_picard)
        s.picard = picard_solve(s.fx.generator, s.xi, s.ens, s.tau, s.trace.cum, s.settings);
    return s;
}

std::string fmt(double v) { return format_double(v); }

// --- experiments ---------------------------------------------------------

void experiment_solve(const RunContext& ctx, const json& exp, std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    if (id == "motivational-counterexample-rho1") {
        // Pathwise-explicit oracle route plus the weight-condition estimate.
        Fixture fx = make_fixture(id);
        const int n_steps = ctx.n_steps > 0 ? ctx.n_steps : 256;
        TimeGrid grid = make_grid(ctx.t_cap > 0 ? ctx.t_cap : 1.0, n_steps);
        PathEnsemble ens = simulate_brownian(grid, ctx.n_paths, 1, ctx.seed);
        euler_maruyama(fx.sde, 0.0, fx.x0, ens);
        LinearCoefficients lc = LinearCoefficients::constant(grid, 0.0, 1.0);
        const auto lt = LinearTerminal::exp_functional();
        const auto oracle = linear_bsde_pathwise(lc, lt, ens);
        const auto xi = linear_terminal_values(lc, lt, ens);
        // y_i must equal xi * exp(-(tail sums)) path by path.
        double worst = 0.0;
        for (int p = 0; p < ens.n_paths; ++p) {
            double tail = 0.0;  // accumulated backward from T
            for (int i = grid.n_steps; i >= 0; --i) {
                const double expected = xi[static_cast<std::size_t>(p)] * std::exp(-tail);
                worst = std::max(worst,
                                 std::abs(oracle.y[static_cast<std::size_t>(p) * grid.n_nodes() + i] -
                                          expected));
                if (i > 0) tail += ens.increment(p, i - 1, 0) - 1.5 * grid.dt;
            }
        }
        checks.push_back({"solve." + id + ".pathwise-identity", worst, 1e-10, 0.0,
                          worst <= 1e-10});
        const auto wc = weight_condition_check(lc, lt, ens, 1.0, 1.0);
        checks.push_back({"solve." + id + ".weight-condition-rho1", wc.estimate,
                          1.0 + 4.0 * wc.se, wc.se, wc.estimate <= 1.0 + 4.0 * wc.se});
        const auto sup = sup_moment_diagnostic(lc, ens, 3);
        CsvWriter csv(ctx.dir / ("sup_diagnostic_" + id + ".csv"), {"n_paths", "estimate"});
        int denom = 8;
        for (double v : sup) {
            csv.row({std::to_string(ens.n_paths / denom), fmt(v)});
            denom /= 2;
        }
        csv.close();
        return;
    }

    SolvedFixture s = solve_fixture(ctx, id, /*run_picard=*/false);
    if (exp.contains("pre_truncate")) {
        // Experimental pre-application of the level truncation (the paper's
        // constructive step) ahead of the discrete solve.
        const auto& pt = exp.at("pre_truncate");
        s.fx.generator = truncated_generator(s.fx.generator, pt.at("r").get<double>(),
                                             pt.at("n").get<int>());
    }
    s.picard = picard_solve(s.fx.generator, s.xi, s.ens, s.tau, s.trace.cum, s.settings);
    const double tol = get_or(exp, "check_tolerance", 0.02);
    if (s.fx.y0_oracle) {
        const double rel =
            std::abs(s.picard.estimate.root_y[0] - *s.fx.y0_oracle) /
            std::max(1e-12, std::abs(*s.fx.y0_oracle));
        checks.push_back({"solve." + id + ".oracle-rel-err", rel, tol, 0.0, rel <= tol});
    }
    if (exp.contains("contraction") && exp.at("contraction").get<bool>()) {
        const auto cr = contraction_report(s.picard, 200, ctx.seed);
        const double bound = 1.0 / ctx.weights.rho;
        const int upto = std::min<std::size_t>(4, cr.ratios.size());
        for (int m = 0; m < upto; ++m) {
            const double rhs = bound + 3.0 * cr.se[static_cast<std::size_t>(m)];
            checks.push_back({"solve." + id + ".contraction-m" + std::to_string(m + 1),
                              cr.ratios[static_cast<std::size_t>(m)], rhs,
                              cr.se[static_cast<std::size_t>(m)],
                              cr.ratios[static_cast<std::size_t>(m)] <= rhs});
        }
    }
    if (get_or(exp, "residual", 0) != 0) {
        const auto rr = residual_check(s.picard.estimate, s.fx.generator, s.ens, s.tau,
                                       s.settings);
        checks.push_back({"solve." + id + ".residual-flagged",
                          static_cast<double>(rr.any_flagged), 0.0, 0.0, !rr.any_flagged});
    }
    const auto norms =
        weighted_norms(s.picard.estimate, s.trace, s.xi, s.tau, s.grid);
    if (ctx.report) {
        json rec;
        rec["type"] = "solve";
        rec["fixture"] = id;
        rec["seed"] = ctx.seed;
        rec["sweeps"] = s.picard.sweeps;
        rec["distances"] = s.picard.distances;
        rec["y0"] = s.picard.estimate.root_y;
        rec["norms"] = {{"xi", norms.xi_norm_sq}, {"y", norms.y_norm_sq},
                        {"z", norms.z_norm_sq}};
        rec["truncation_mass"] = s.tau.truncation_mass;
        ctx.report->write(rec);
    }
}

void experiment_apriori(const RunContext& ctx, const json& exp,
                        std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    SolvedFixture s = solve_fixture(ctx, id);
    const auto report = apriori_check(s.picard.estimate, s.fx.generator, s.xi, s.trace,
                                      ctx.weights, s.tau, s.ens);
    for (const auto& row : report.rows)
        checks.push_back({"apriori." + id + "." + row.id, row.lhs, row.rhs, row.diff_se,
                          row.pass});
    if (ctx.report) {
        json rec;
        rec["type"] = "apriori";
        rec["fixture"] = id;
        rec["empirical_c_204"] = report.empirical_c_204;
        ctx.report->write(rec);
    }
}

void experiment_simulate(const RunContext& ctx, const json& exp,
                         std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    Fixture fx = make_fixture(id);
    const double t_cap = ctx.t_cap > 0 ? ctx.t_cap : fx.t_end;
    const int n_steps = ctx.n_steps > 0 ? ctx.n_steps : fx.default_steps;
    TimeGrid grid = make_grid(t_cap, n_steps);
    PathEnsemble ens = simulate_brownian(grid, ctx.n_paths, fx.sde.d, ctx.seed);
    euler_maruyama(fx.sde, 0.0, fx.x0, ens);

    // Increment variance against dt, chi-square 4-sigma band.
    const int probe_nodes = std::min(8, grid.n_steps);
    for (int c = 0; c < ens.d; ++c) {
        double acc = 0.0, acc_sq = 0.0;
        std::size_t count = 0;
        for (int i = 0; i < probe_nodes; ++i)
            for (int p = 0; p < ens.n_paths; ++p) {
                const double v = ens.increment(p, i, c);
                acc += v;
                acc_sq += v * v;
                ++count;
            }
        const double mean = acc / static_cast<double>(count);
        const double var = acc_sq / static_cast<double>(count) - mean * mean;
        const double band = 4.0 * grid.dt * std::sqrt(2.0 / static_cast<double>(count - 1));
        checks.push_back({"simulate." + id + ".increment-variance-d" + std::to_string(c), var,
                          grid.dt, band / 4.0, std::abs(var - grid.dt) <= band});
    }

    if (get_or(exp, "dump_paths", 0) != 0) {
        const int max_dump = get_or(exp, "max_dump", 100);
        JsonlWriter dump(ctx.dir / ("paths_" + id + ".jsonl"));
        for (int p = 0; p < std::min(ens.n_paths, max_dump); ++p) {
            json rec;
            rec["path_id"] = p;
            rec["nodes"] = ens.grid.nodes;
            std::vector<std::vector<double>> states;
            for (int i = 0; i < grid.n_nodes(); ++i) {
                const auto x = ens.state(p, i);
                states.emplace_back(x.begin(), x.end());
            }
            rec["states"] = states;
            rec["exit_index"] = grid.n_steps;
            dump.write(rec);
        }
        dump.close();
    }
}

void experiment_validate(const RunContext& ctx, const json& exp,
                         std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    Fixture fx = make_fixture(id);
    const int budget = get_or(exp, "budget", 100000);
    TimeGrid grid = make_grid(fx.t_end, fx.default_steps);
    PathEnsemble ens = simulate_brownian(grid, std::min(ctx.n_paths, 4096), fx.sde.d,
                                         ctx.seed);
    euler_maruyama(fx.sde, 0.0, fx.x0, ens);
    const auto report = validate_assumptions(fx.generator, ens, budget, ctx.seed);
    const bool overall = report.monotonicity_pass && report.lipschitz_pass &&
                         report.driver_bound_pass;
    const std::string expect = exp.contains("expect")
                                   ? exp.at("expect").get<std::string>()
                                   : std::string("pass");
    checks.push_back({"validate." + id + ".monotonicity", report.monotonicity_violation,
                      report.tolerance, 0.0,
                      expect == "fail" ? true : report.monotonicity_pass});
    checks.push_back({"validate." + id + ".lipschitz", report.lipschitz_violation,
                      report.tolerance, 0.0,
                      expect == "fail" ? true : report.lipschitz_pass});
    checks.push_back({"validate." + id + ".expected-" + expect,
                      static_cast<double>(overall), expect == "pass" ? 1.0 : 0.0, 0.0,
                      overall == (expect == "pass")});
}

void experiment_dependence(const RunContext& ctx, const json& exp,
                           std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    std::vector<double> deltas = {0.1, 0.05, 0.025};
    if (exp.contains("deltas")) deltas = exp.at("deltas").get<std::vector<double>>();
    SolvedFixture base = solve_fixture(ctx, id);

    CsvWriter csv(ctx.dir / ("dependence_" + id + ".csv"),
                  {"delta", "lhs", "rhs_driver", "ratio", "lhs_swapped", "rhs_swapped"});
    std::vector<double> log_d, log_lhs;
    for (double delta : deltas) {
        std::vector<double> xi_shift = base.xi;
        for (double& v : xi_shift) v += delta;
        PicardResult shifted = picard_solve(base.fx.generator, xi_shift, base.ens, base.tau,
                                            base.trace.cum, base.settings);
        const auto fwd = continuous_dependence(base.picard.estimate, shifted.estimate,
                                               base.fx.generator, base.fx.generator, base.xi,
                                               xi_shift, base.trace, base.tau, base.ens);
        const auto swapped = continuous_dependence(shifted.estimate, base.picard.estimate,
                                                   base.fx.generator, base.fx.generator,
                                                   xi_shift, base.xi, base.trace, base.tau,
                                                   base.ens);
        csv.row({fmt(delta), fmt(fwd.lhs), fmt(fwd.rhs_driver), fmt(fwd.ratio),
                 fmt(swapped.lhs), fmt(swapped.rhs_driver)});
        log_d.push_back(std::log(delta));
        log_lhs.push_back(std::log(std::max(fwd.lhs, 1e-300)));
    }
    csv.close();
    // Least-squares slope of log lhs against log delta.
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < log_d.size(); ++i) {
        mx += log_d[i];
        my += log_lhs[i];
    }
    mx /= static_cast<double>(log_d.size());
    my /= static_cast<double>(log_d.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < log_d.size(); ++i) {
        num += (log_d[i] - mx) * (log_lhs[i] - my);
        den += (log_d[i] - mx) * (log_d[i] - mx);
    }
    const double slope = num / den;
    checks.push_back({"dependence." + id + ".slope", slope, 2.0, 0.3,
                      std::abs(slope - 2.0) <= 0.3});
}

void experiment_stability(const RunContext& ctx, const json& exp,
                          std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    std::vector<int> levels = {1, 2, 4, 8};
    if (exp.contains("levels")) levels = exp.at("levels").get<std::vector<int>>();
    SolvedFixture base = solve_fixture(ctx, id);
    const std::vector<double> alpha = alpha_trace(base.fx.generator.alpha, base.ens);
    const int k = base.fx.generator.k;

    std::vector<PicardResult> solved;
    std::vector<std::vector<double>> xis;
    for (int level : levels) {
        std::vector<double> xi_n(base.xi.size());
        for (int p = 0; p < base.ens.n_paths; ++p) {
            const double a_tau =
                alpha[static_cast<std::size_t>(p) * base.grid.n_nodes() + base.tau.index[p]];
            clamp_q({base.xi.data() + static_cast<std::size_t>(p) * k,
                     static_cast<std::size_t>(k)},
                    level * a_tau * a_tau,
                    {xi_n.data() + static_cast<std::size_t>(p) * k,
                     static_cast<std::size_t>(k)});
        }
        xis.push_back(std::move(xi_n));
        solved.push_back(picard_solve(base.fx.generator, xis.back(), base.ens, base.tau,
                                      base.trace.cum, base.settings));
    }
    std::vector<const SolutionEstimate*> seq;
    std::vector<const GeneratorSpec*> gens;
    std::vector<std::span<const double>> xspans;
    for (std::size_t i = 0; i < solved.size(); ++i) {
        seq.push_back(&solved[i].estimate);
        gens.push_back(&base.fx.generator);
        xspans.emplace_back(xis[i]);
    }
    const auto table = stability_sequence(base.picard.estimate, base.fx.generator, base.xi,
                                          seq, gens, xspans, base.trace, base.tau, base.ens);
    CsvWriter csv(ctx.dir / ("stability_" + id + ".csv"),
                  {"level", "premise", "premise_se", "distance", "distance_se"});
    for (std::size_t i = 0; i < table.rows.size(); ++i)
        csv.row({std::to_string(levels[i]), fmt(table.rows[i].premise),
                 fmt(table.rows[i].premise_se), fmt(table.rows[i].distance),
                 fmt(table.rows[i].distance_se)});
    csv.close();
    checks.push_back({"stability." + id + ".monotone",
                      table.monotone_within_slack ? 1.0 : 0.0, 1.0, 0.0,
                      table.monotone_within_slack});
}

void experiment_feynman_kac(const RunContext& ctx, const json& exp,
                            std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    PdeProblemSpec spec = make_pde_fixture(id);
    SolveBudget budget;
    budget.n_paths = get_or(exp, "n_paths", ctx.n_paths);
    budget.n_steps = get_or(exp, "n_steps", ctx.n_steps > 0 ? ctx.n_steps : 64);
    budget.checkpoint_stride = get_or(exp, "checkpoint_stride", 0);
    budget.solver = ctx.solver;
    const double tol = get_or(exp, "tolerance", 0.05);
    const bool strict = get_or(exp, "strict", 0) != 0;

    CsvWriter csv(ctx.dir / ("fk_" + id + ".csv"),
                  {"probe", "u", "stderr", "oracle", "rel_err"});
    std::vector<PdeTableRow> table;
    double worst_rel = 0.0, worst_mass = 0.0;

    if (id == "heat-quadratic") {
        std::vector<std::vector<double>> probes = {{0.0, 0.0}};
        if (exp.contains("probes")) probes = exp.at("probes").get<std::vector<std::vector<double>>>();
        ParabolicProblem pp;
        pp.drift = [](double, double) { return 0.0; };
        pp.sigma = [](double, double) { return 1.0; };
        pp.h = [](double x) { return x * x; };
        pp.t_end = spec.t_end;
        const int nx = 241;
        const int nt = fd_parabolic_required_nt(pp, -6.0, 6.0, nx);
        const SpaceTimeMesh mesh = fd_parabolic(pp, -6.0, 6.0, nx, nt);
        write_mesh_csv(mesh, (ctx.dir / ("fd_mesh_" + id + ".csv")).string());
        for (const auto& probe : probes) {
            const double pt = probe.at(0);
            const double px = probe.at(1);
            const auto res = solve_parabolic(spec, pt, {&px, 1}, budget, ctx.seed);
            const double oracle = mesh.value(pt, px);
            const double rel = std::abs(res.u - oracle) / std::max(1.0, std::abs(oracle));
            worst_rel = std::max(worst_rel, rel);
            csv.row({"(" + fmt(pt) + ";" + fmt(px) + ")", fmt(res.u), fmt(res.se),
                     fmt(oracle), fmt(rel)});
            table.push_back({{pt, px}, res.u, res.se, oracle});
        }
    } else {
        std::vector<double> probes = {-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8};
        if (exp.contains("probes")) probes = exp.at("probes").get<std::vector<double>>();
        EllipticProblem ep;
        ep.lo = -1.0;
        ep.hi = 1.0;
        ep.drift = [](double) { return 0.0; };
        ep.sigma = [](double) { return std::sqrt(2.0); };
        ep.g = [](double, double, double) { return 2.0; };
        ep.h = [](double) { return 0.0; };
        const EllipticSolution fd = fd_elliptic(ep, 801);
        write_mesh_csv(fd, (ctx.dir / ("fd_mesh_" + id + ".csv")).string());
        for (double px : probes) {
            const auto res = solve_elliptic(spec, {&px, 1}, budget, ctx.seed, strict);
            const double oracle = fd.value(px);
            const double rel = std::abs(res.u - oracle) / std::max(1.0, std::abs(oracle));
            worst_rel = std::max(worst_rel, rel);
            worst_mass = std::max(worst_mass, res.truncation_mass);
            csv.row({fmt(px), fmt(res.u), fmt(res.se), fmt(oracle), fmt(rel)});
            table.push_back({{px}, res.u, res.se, oracle});
        }
        checks.push_back({"fk." + id + ".truncation-mass", worst_mass, 0.005, 0.0,
                          worst_mass < 0.005});
    }
    csv.close();
    checks.push_back({"fk." + id + ".max-rel-err", worst_rel, tol, 0.0, worst_rel <= tol});
    const auto growth = growth_bound_check(table, spec.growth_q);
    checks.push_back({"fk." + id + ".growth-bound", growth.c_fit, growth.c_max, 0.0,
                      growth.pass});
}

void experiment_refine(const RunContext& ctx, const json& exp,
                       std::vector<CheckRow>& checks) {
    const std::string id = exp.at("fixture").get<std::string>();
    std::vector<int> steps = {16, 32, 64};
    if (exp.contains("steps")) steps = exp.at("steps").get<std::vector<int>>();
    Fixture fx = make_fixture(id);
    if (!fx.y0_oracle) throw ConfigError("refine: fixture has no closed-form oracle");

    CsvWriter csv(ctx.dir / ("refine_" + id + ".csv"),
                  {"n_steps", "n_paths", "y0", "oracle", "abs_err"});
    std::vector<double> errs;
    for (std::size_t level = 0; level < steps.size(); ++level) {
        RunContext local = ctx;
        local.n_steps = steps[level];
        // Paths scale with the grid so statistical error refines alongside bias.
        local.n_paths = ctx.n_paths * steps[level] / steps[0];
        SolvedFixture s = solve_fixture(local, id);
        const double err = std::abs(s.picard.estimate.root_y[0] - *fx.y0_oracle);
        errs.push_back(err);
        csv.row({std::to_string(steps[level]), std::to_string(local.n_paths),
                 fmt(s.picard.estimate.root_y[0]), fmt(*fx.y0_oracle), fmt(err)});
    }
    csv.close();
    // Monotone decrease within a noise allowance.
    bool monotone = true;
    for (std::size_t i = 1; i < errs.size(); ++i)
        if (errs[i] > errs[i - 1] + 0.5 * std::abs(*fx.y0_oracle) * 0.01) monotone = false;
    checks.push_back({"refine." + id + ".monotone", monotone ? 1.0 : 0.0, 1.0, 0.0,
                      monotone});
}

}  // namespace

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error at byte " + std::to_string(e.byte) + ": " +
                          e.what());
    }
}

void validate_config(const json& config) {
    const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (!config.is_object()) fail("config: top level must be an object");
    if (!config.contains("schema") || config.at("schema").get<int>() != 1)
        fail("schema: must be present and equal to 1");
    if (!config.contains("seed") || !config.at("seed").is_number_integer() ||
        config.at("seed").get<long long>() < 0)
        fail("seed: required (no implicit default) and must be a nonnegative integer");
    if (config.contains("weights")) {
        const auto& w = config.at("weights");
        const double beta = get_or(w, "beta", 1.0);
        const double rho = get_or(w, "rho", 2.0);
        const double rho_bar = get_or(w, "rho_bar", rho);
        if (!(beta >= 1.0)) fail("weights.beta: beta must be >= 1");
        if (!(rho > 1.0)) fail("weights.rho: rho must be > 1");
        if (!(rho_bar > 1.0 && rho_bar <= rho))
            fail("weights.rho_bar: must lie in (1, rho]");
    }
    if (config.contains("grid")) {
        if (!(get_or(config.at("grid"), "t_cap", 1.0) > 0.0))
            fail("grid.t_cap: must be positive");
        if (get_or(config.at("grid"), "n_steps", 1) < 1)
            fail("grid.n_steps: must be >= 1");
    }
    if (config.contains("paths") && get_or(config.at("paths"), "n_paths", 1) < 1)
        fail("paths.n_paths: must be >= 1");
    if (!config.contains("experiments") || !config.at("experiments").is_array() ||
        config.at("experiments").empty())
        fail("experiments: must be a non-empty array");
    for (const auto& exp : config.at("experiments")) {
        if (!exp.contains("type")) fail("experiments[].type: required");
        const std::string type = exp.at("type").get<std::string>();
        if (!kExperimentTypes.count(type))
            fail("experiments[].type: unknown type '" + type + "'");
        if (!exp.contains("fixture")) fail("experiments[].fixture: required");
        const std::string id = exp.at("fixture").get<std::string>();
        if (type == "feynman-kac") {
            if (!is_pde_fixture(id)) fail("experiments[].fixture: '" + id +
                                          "' is not a PDE fixture");
        } else if (is_pde_fixture(id)) {
            fail("experiments[].fixture: '" + id + "' requires type feynman-kac");
        } else {
            make_fixture(id);  // throws on unknown ids
        }
    }
}

RunOutcome run_config(const json& config, const std::filesystem::path& artifacts_dir) {
    validate_config(config);
    std::filesystem::create_directories(artifacts_dir);
    const auto t0 = std::chrono::steady_clock::now();

    if (config.contains("workers")) exec::set_workers(config.at("workers").get<int>());

    RunContext ctx;
    ctx.seed = config.at("seed").get<std::uint64_t>();
    ctx.dir = artifacts_dir;
    if (config.contains("paths")) ctx.n_paths = get_or(config.at("paths"), "n_paths", 20000);
    if (config.contains("grid")) {
        ctx.t_cap = get_or(config.at("grid"), "t_cap", 0.0);
        ctx.n_steps = get_or(config.at("grid"), "n_steps", 0);
    }
    if (config.contains("weights")) {
        const auto& w = config.at("weights");
        ctx.weights.beta = get_or(w, "beta", 1.0);
        ctx.weights.rho = get_or(w, "rho", 2.0);
        ctx.weights.rho_bar = get_or(w, "rho_bar", ctx.weights.rho);
    }
    if (config.contains("solver")) {
        const auto& s = config.at("solver");
        ctx.solver.basis.degree = get_or(s, "basis_degree", 3);
        ctx.solver.picard_max = get_or(s, "picard_max", 8);
        ctx.solver.picard_tol = get_or(s, "picard_tol", 1e-10);
        ctx.solver.implicit_y = get_or(s, "implicit_y", 0) != 0;
        ctx.solver.regression.ridge = get_or(s, "ridge", 0.0);
    }

    JsonlWriter report(artifacts_dir / "solver_report.jsonl");
    ctx.report = &report;
    {
        json rec;
        rec["type"] = "settings";
        rec["seed"] = ctx.seed;
        rec["n_paths"] = ctx.n_paths;
        rec["weights"] = {{"beta", ctx.weights.beta},
                          {"rho", ctx.weights.rho},
                          {"rho_bar", ctx.weights.rho_bar}};
        rec["solver"] = {{"basis_degree", ctx.solver.basis.degree},
                         {"picard_max", ctx.solver.picard_max},
                         {"picard_tol", ctx.solver.picard_tol},
                         {"implicit_y", ctx.solver.implicit_y}};
        rec["workers"] = exec::workers();
        report.write(rec);
    }

    RunOutcome outcome;
    outcome.artifacts_dir = artifacts_dir;
    for (const auto& exp : config.at("experiments")) {
        const std::string type = exp.at("type").get<std::string>();
        if (type == "solve") experiment_solve(ctx, exp, outcome.checks);
        else if (type == "apriori") experiment_apriori(ctx, exp, outcome.checks);
        else if (type == "simulate") experiment_simulate(ctx, exp, outcome.checks);
        else if (type == "validate") experiment_validate(ctx, exp, outcome.checks);
        else if (type == "dependence") experiment_dependence(ctx, exp, outcome.checks);
        else if (type == "stability") experiment_stability(ctx, exp, outcome.checks);
        else if (type == "feynman-kac") experiment_feynman_kac(ctx, exp, outcome.checks);
        else if (type == "refine") experiment_refine(ctx, exp, outcome.checks);
    }
    report.close();

    write_checks_csv(artifacts_dir / "checks.csv", outcome.checks);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(artifacts_dir / "manifest.json", config, wall, outcome.checks);

    for (const auto& c : outcome.checks)
        if (!c.pass) outcome.failed_ids.push_back(c.check_id);
    outcome.exit_code = outcome.failed_ids.empty() ? 0 : 1;
    return outcome;
}

int command_run(const std::string& config_path, const std::string& artifacts_override,
                int workers_override, std::ostream& log) {
    json config;
    try {
        config = load_config_file(config_path);
        validate_config(config);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    }
    std::filesystem::path dir;
    if (!artifacts_override.empty()) {
        dir = artifacts_override;
    } else if (const char* env = std::getenv("WBSDE_ARTIFACTS")) {
        dir = env;
    } else if (config.contains("artifacts_dir")) {
        dir = config.at("artifacts_dir").get<std::string>();
    } else {
        dir = "artifacts";
    }
    if (workers_override >= 0) config["workers"] = workers_override;
    try {
        const RunOutcome outcome = run_config(config, dir);
        log << "checks: " << outcome.checks.size() << ", failed: "
            << outcome.failed_ids.size() << "\n";
        for (const auto& id : outcome.failed_ids) log << "FAIL " << id << "\n";
        log << "artifacts: " << outcome.artifacts_dir.string() << "\n";
        return outcome.exit_code;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        log << "run error: " << e.what() << "\n";
        return 1;
    }
}

int command_list_fixtures(std::ostream& out) {
    for (const auto& info : fixture_catalog()) {
        out << info.id << (info.is_pde ? "  [pde]" : "") << "\n";
        out << "  " << info.description << "\n";
        out << "  coefficients: " << info.coefficients << "\n";
        out << "  alpha: " << info.alpha_recipe << "\n";
        out << "  exercises: " << info.exercises << "\n";
    }
    return 0;
}

int command_validate_config(const std::string& config_path, std::ostream& out) {
    try {
        validate_config(load_config_file(config_path));
        out << "ok\n";
        return 0;
    } catch (const ConfigError& e) {
        out << "config error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace wbsde::cli
