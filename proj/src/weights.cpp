#include "wbsde/weights.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"

#include <atomic>
#include <string>

namespace wbsde {

void WeightParams::validate() const {
    if (!(beta >= 1.0)) throw ConfigError("beta must be >= 1, got " + std::to_string(beta));
    if (!(rho > 1.0)) throw ConfigError("rho must be > 1, got " + std::to_string(rho));
    if (!(rho_bar > 1.0 && rho_bar <= rho))
        throw ConfigError("rho_bar must lie in (1, rho], got " + std::to_string(rho_bar));
}

CoefficientTrace make_trace(const WeightParams& params, int n_paths, int n_nodes,
                            std::span<const double> mu, std::span<const double> nu) {
    params.validate();
    const std::size_t total = static_cast<std::size_t>(n_paths) * n_nodes;
    if (mu.size() != total || nu.size() != total)
        throw ConfigError("make_trace: mu/nu size mismatch with (n_paths, n_nodes)");
    CoefficientTrace t;
    t.n_paths = n_paths;
    t.n_nodes = n_nodes;
    t.mu.assign(mu.begin(), mu.end());
    t.nu.assign(nu.begin(), nu.end());
    t.rate.resize(total);
    exec::for_each_index(total, [&](std::size_t i) {
        t.rate[i] = params.beta * t.mu[i] + 0.5 * params.rho * t.nu[i] * t.nu[i];
    });
    return t;
}

CoefficientTrace constant_trace(const WeightParams& params, int n_paths,
                                const TimeGrid& grid, double mu0, double nu0) {
    const std::size_t total = static_cast<std::size_t>(n_paths) * grid.n_nodes();
    std::vector<double> mu(total, mu0), nu(total, nu0);
    CoefficientTrace t = make_trace(params, n_paths, grid.n_nodes(), mu, nu);
    cumulative_weight(t, grid);
    return t;
}

void cumulative_weight(CoefficientTrace& trace, const TimeGrid& grid) {
    if (trace.n_nodes != grid.n_nodes())
        throw ConfigError("cumulative_weight: trace/grid node count mismatch");
    // Exceptions must not escape a parallel region; validate first.
    std::atomic<std::size_t> bad{trace.rate.size()};
    exec::for_each_index(trace.rate.size(), [&](std::size_t i) {
        if (trace.rate[i] < 0.0) {
            std::size_t cur = bad.load();
            while (i < cur && !bad.compare_exchange_weak(cur, i)) {
            }
        }
    });
    if (bad.load() != trace.rate.size()) {
        const std::size_t i = bad.load();
        throw InvariantError("cumulative_weight: negative rate at path " +
                             std::to_string(i / trace.n_nodes) + " node " +
                             std::to_string(i % trace.n_nodes));
    }
    trace.cum.assign(trace.rate.size(), 0.0);
    exec::for_each_index(static_cast<std::size_t>(trace.n_paths), [&](std::size_t p) {
        double acc = 0.0;
        const std::size_t base = p * trace.n_nodes;
        for (int i = 0; i < trace.n_nodes; ++i) {
            trace.cum[base + i] = acc;
            if (i < grid.n_steps) acc += trace.rate[base + i] * grid.dt;
        }
    });
}

}  // namespace wbsde
