#include "wbsde/generator.hpp"

#include "wbsde/ensemble.hpp"
#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"

#include <cmath>

namespace wbsde {

AlphaModel alpha_exponential() {
    AlphaModel a;
    a.deterministic = [](double t) { return std::exp(-t); };
    a.per_path = [](const TimeGrid& grid, std::span<const double>, int,
                    std::span<double> out) {
        for (int i = 0; i < grid.n_nodes(); ++i) out[i] = std::exp(-grid.node(i));
    };
    return a;
}

AlphaModel alpha_lipschitz_preset(double beta, double mu0) {
    // sup_{s<=t} e^{beta mu0 s} mu0 is attained at s = t for mu0 >= 0.
    AlphaModel a;
    a.deterministic = [beta, mu0](double t) {
        return std::exp(-t) / (1.0 + mu0 * std::exp(beta * mu0 * t));
    };
    a.per_path = [beta, mu0](const TimeGrid& grid, std::span<const double>, int,
                             std::span<double> out) {
        for (int i = 0; i < grid.n_nodes(); ++i) {
            const double t = grid.node(i);
            out[i] = std::exp(-t) / (1.0 + mu0 * std::exp(beta * mu0 * t));
        }
    };
    return a;
}

AlphaModel alpha_running_sup_poly(double beta, int power) {
    // lambda_t / sup_{s<=t}(1+|x_s|)^power with lambda_t = e^{-beta int_0^t |x| - t}.
    AlphaModel a;
    a.per_path = [beta, power](const TimeGrid& grid, std::span<const double> states,
                               int state_dim, std::span<double> out) {
        double integral = 0.0;
        double sup = 0.0;
        for (int i = 0; i < grid.n_nodes(); ++i) {
            double norm_sq = 0.0;
            for (int c = 0; c < state_dim; ++c) {
                const double v = states[static_cast<std::size_t>(i) * state_dim + c];
                norm_sq += v * v;
            }
            const double norm = std::sqrt(norm_sq);
            sup = std::max(sup, std::pow(1.0 + norm, power));
            const double lambda = std::exp(-beta * integral - grid.node(i));
            out[i] = lambda / std::max(1.0, sup);
            if (i < grid.n_steps) integral += norm * grid.dt;
        }
    };
    return a;
}

AlphaModel alpha_inverse_sup_pow(int power) {
    AlphaModel a;
    a.per_path = [power](const TimeGrid& grid, std::span<const double> states,
                         int state_dim, std::span<double> out) {
        double sup = 0.0;
        for (int i = 0; i < grid.n_nodes(); ++i) {
            double norm_sq = 0.0;
            for (int c = 0; c < state_dim; ++c) {
                const double v = states[static_cast<std::size_t>(i) * state_dim + c];
                norm_sq += v * v;
            }
            sup = std::max(sup, std::pow(std::sqrt(norm_sq), power));
            out[i] = 1.0 / (1.0 + sup);
        }
    };
    return a;
}

TerminalCondition constant_terminal(std::vector<double> value) {
    TerminalCondition c;
    c.k = static_cast<int>(value.size());
    c.eval = [v = std::move(value)](const TerminalContext&, std::span<double> out) {
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    };
    return c;
}

TerminalCondition terminal_state_map(
    int k, std::function<void(std::span<const double> x, double t, std::span<double> out)> fn) {
    TerminalCondition c;
    c.k = k;
    c.eval = [fn = std::move(fn)](const TerminalContext& ctx, std::span<double> out) {
        fn(ctx.exit_state, ctx.exit_time, out);
    };
    return c;
}

std::vector<double> alpha_trace(const AlphaModel& model, const PathEnsemble& ensemble) {
    const int n_nodes = ensemble.grid.n_nodes();
    std::vector<double> out(static_cast<std::size_t>(ensemble.n_paths) * n_nodes, 1.0);
    if (model.per_path) {
        if (!ensemble.dense())
            throw ConfigError("alpha_trace: path-functional alpha needs dense states");
        exec::for_each_index(static_cast<std::size_t>(ensemble.n_paths), [&](std::size_t p) {
            std::span<const double> states{
                ensemble.states.data() + ensemble.state_idx(static_cast<int>(p), 0),
                static_cast<std::size_t>(n_nodes) * ensemble.state_dim};
            model.per_path(ensemble.grid, states, ensemble.state_dim,
                           {out.data() + p * n_nodes, static_cast<std::size_t>(n_nodes)});
        });
    } else if (model.deterministic) {
        exec::for_each_index(static_cast<std::size_t>(ensemble.n_paths), [&](std::size_t p) {
            for (int i = 0; i < n_nodes; ++i)
                out[p * n_nodes + i] =
                    model.deterministic(ensemble.t_offset + ensemble.grid.node(i));
        });
    }
    return out;
}

}  // namespace wbsde
