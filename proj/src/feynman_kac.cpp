#include "wbsde/feynman_kac.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/rng.hpp"

#include <cmath>
#include <limits>

namespace wbsde {

namespace {

// Bootstrap standard error of the root value, resampling the per-path
// forward accumulations (xi plus the integrated driver), which carry the raw
// Monte Carlo dispersion of u.
double root_bootstrap_se(std::span<const double> regressands, std::uint64_t seed,
                         int n_boot = 200) {
    const std::size_t n = regressands.size();
    if (n < 2) return 0.0;
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        const std::uint64_t bseed =
            rng::derive_stream(seed, rng::kStreamBootstrap, 1000 + static_cast<std::uint64_t>(b));
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double u = rng::uniform01(bseed, j, 0, 0);
            acc += regressands[std::min(n - 1, static_cast<std::size_t>(u * n))];
        }
        means.push_back(acc / static_cast<double>(n));
    }
    const auto ms = exec::mean_se(means);
    return ms.se * std::sqrt(static_cast<double>(means.size()));
}

std::vector<double> terminal_h_values(const PdeProblemSpec& spec, const PathEnsemble& ens,
                                      const TerminalTime& tau) {
    std::vector<double> xi(static_cast<std::size_t>(ens.n_paths));
    exec::for_each_index(xi.size(), [&](std::size_t p) {
        if (ens.dense()) {
            xi[p] = spec.h(ens.state(static_cast<int>(p), tau.index[p]));
        } else {
            xi[p] = spec.h(ens.terminal(static_cast<int>(p)));
        }
    });
    return xi;
}

std::vector<double> coefficient_cum(const PdeProblemSpec& spec, const PathEnsemble& ens,
                                    double t_base) {
    const TimeGrid& grid = ens.grid;
    const CoefficientModel& cm = spec.generator.coeff;
    std::vector<double> mu(static_cast<std::size_t>(ens.n_paths) * grid.n_nodes(), 0.0);
    std::vector<double> nu(mu.size(), 0.0);
    if (cm.mu || cm.nu) {
        exec::for_each_index(static_cast<std::size_t>(ens.n_paths), [&](std::size_t p) {
            for (int i = 0; i < grid.n_nodes(); ++i) {
                const double tp = t_base + grid.node(i);
                const auto xs = ens.state(static_cast<int>(p), i);
                mu[p * grid.n_nodes() + i] = cm.mu_at(tp, xs);
                nu[p * grid.n_nodes() + i] = cm.nu_at(tp, xs);
            }
        });
    }
    CoefficientTrace trace = make_trace(spec.weights, ens.n_paths, grid.n_nodes(), mu, nu);
    cumulative_weight(trace, grid);
    return std::move(trace.cum);
}

}  // namespace

ProbeResult solve_parabolic(const PdeProblemSpec& spec, double t, std::span<const double> x,
                            const SolveBudget& budget, std::uint64_t seed) {
    if (!(t < spec.t_end)) throw ConfigError("solve_parabolic: probe time must be < T");
    if (!(spec.growth_q >= 1.0 && spec.growth_q < 2.0))
        throw ConfigError("solve_parabolic: q must lie in [1,2)");
    validate_growth_envelopes(spec, 256, seed);
    const TimeGrid grid = make_grid(spec.t_end - t, budget.n_steps);
    PathEnsemble ens = simulate_brownian(grid, budget.n_paths, spec.sde.d, seed);
    euler_maruyama(spec.sde, t, x, ens);
    const TerminalTime tau = TerminalTime::deterministic(ens.n_paths, grid.n_steps);
    const std::vector<double> cum = coefficient_cum(spec, ens, t);
    const std::vector<double> xi = terminal_h_values(spec, ens, tau);
    PicardResult picard = picard_solve(spec.generator, xi, ens, tau, cum, budget.solver);

    ProbeResult out;
    out.u = picard.estimate.root_y[0];
    out.z_readout = picard.estimate.root_z;
    out.sweeps = picard.sweeps;
    out.se = root_bootstrap_se(picard.estimate.pathwise_value, seed);
    out.t_cap_used = spec.t_end;
    return out;
}

ProbeResult solve_elliptic(const PdeProblemSpec& spec, std::span<const double> x,
                           const SolveBudget& budget, std::uint64_t seed, bool strict) {
    if (!spec.domain.inside) throw ConfigError("solve_elliptic: domain required");
    double t_cap = spec.t_cap;
    SolveBudget run_budget = budget;
    if (run_budget.checkpoint_stride > 0) {
        // Streaming runs keep rolling state only; a full (path, node) record
        // would defeat the checkpointed storage.
        run_budget.solver.record_full = false;
        run_budget.solver.record_regressions = false;
    }
    for (int attempt = 0;; ++attempt) {
        const TimeGrid grid = make_grid(t_cap, budget.n_steps << attempt);
        PathEnsemble ens;
        if (budget.checkpoint_stride > 0) {
            CheckpointConfig cc;
            cc.stride = budget.checkpoint_stride;
            cc.domain = &spec.domain;
            cc.coeff = &spec.generator.coeff;
            cc.weights = spec.weights;
            ens = simulate_checkpointed(spec.sde, 0.0, x, grid, budget.n_paths, seed, cc);
        } else {
            ens = simulate_brownian(grid, budget.n_paths, spec.sde.d, seed);
            euler_maruyama(spec.sde, 0.0, x, ens);
        }
        TerminalTime tau = ens.dense()
                               ? detect_exit(ens, spec.domain)
                               : terminal_from_ensemble(ens, TerminalTime::Kind::ExitTime);
        if (strict && tau.truncation_mass >= 0.005) {
            if (attempt < 5) {
                t_cap *= 2.0;  // extend the horizon until the capped mass fades
                continue;
            }
            throw SolverError("solve_elliptic: truncation mass " +
                              std::to_string(tau.truncation_mass) +
                              " not reducible below 0.5%");
        }

        std::vector<double> cum;
        if (ens.dense()) cum = coefficient_cum(spec, ens, 0.0);
        const std::vector<double> xi = terminal_h_values(spec, ens, tau);
        PicardResult picard = picard_solve(spec.generator, xi, ens, tau, cum, run_budget.solver);

        ProbeResult out;
        out.u = picard.estimate.root_y[0];
        out.z_readout = picard.estimate.root_z;
        out.sweeps = picard.sweeps;
        out.se = root_bootstrap_se(picard.estimate.pathwise_value, seed);
        out.truncation_mass = tau.truncation_mass;
        out.truncation_warning = tau.truncation_mass > 0.05;
        out.t_cap_used = t_cap;
        return out;
    }
}

void validate_growth_envelopes(const PdeProblemSpec& spec, int samples,
                               std::uint64_t seed) {
    const std::uint64_t s = rng::derive_stream(seed, rng::kStreamSampler, 71);
    double x[8] = {};
    double y[1] = {0.0};
    double z[8] = {};
    double gv[1];
    const int l = spec.sde.state_dim;
    for (int i = 0; i < samples; ++i) {
        for (int c = 0; c < l; ++c)
            x[c] = 10.0 * (2.0 * rng::uniform01(s, static_cast<std::uint64_t>(i), 0,
                                                static_cast<std::uint32_t>(c)) -
                           1.0);
        double xnorm = 0.0;
        for (int c = 0; c < l; ++c) xnorm += x[c] * x[c];
        xnorm = std::sqrt(xnorm);
        const double bound =
            spec.growth_k * std::exp(spec.growth_p * std::pow(xnorm, spec.growth_q));
        if (spec.h && std::abs(spec.h({x, static_cast<std::size_t>(l)})) > bound)
            throw InvariantError("pde spec: |h| exceeds the declared growth envelope");
        if (spec.generator.eval) {
            const double t = rng::uniform01(s, static_cast<std::uint64_t>(i), 1, 0) *
                             spec.t_end;
            spec.generator.eval(t, {x, static_cast<std::size_t>(l)}, {y, 1},
                                {z, static_cast<std::size_t>(spec.generator.d)}, {gv, 1});
            if (std::abs(gv[0]) > bound)
                throw InvariantError(
                    "pde spec: |g(t,x,0,0)| exceeds the declared growth envelope");
        }
    }
}

GrowthBoundReport growth_bound_check(const std::vector<PdeTableRow>& table, double q,
                                     double c_max) {
    GrowthBoundReport report;
    report.c_max = c_max;
    const auto feasible = [&](double c) {
        for (const auto& row : table) {
            double xnorm = 0.0;
            // Rows with a leading time entry keep coordinates after it;
            // space-only probes use all entries.
            const std::size_t offset = row.probe.size() > 1 ? 1 : 0;
            for (std::size_t i = offset; i < row.probe.size(); ++i)
                xnorm += row.probe[i] * row.probe[i];
            xnorm = std::sqrt(xnorm);
            const double bound = c * std::exp(c * std::pow(xnorm, q)) + 4.0 * row.se;
            if (std::abs(row.u) > bound) return false;
        }
        return true;
    };
    if (!feasible(c_max)) {
        report.pass = false;
        report.c_fit = std::numeric_limits<double>::infinity();
        return report;
    }
    if (feasible(0.0)) {
        report.pass = true;
        report.c_fit = 0.0;
        return report;
    }
    double lo = 0.0, hi = c_max;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid))
            hi = mid;
        else
            lo = mid;
    }
    report.pass = true;
    report.c_fit = hi;
    return report;
}

}  // namespace wbsde
