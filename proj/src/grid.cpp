#include "wbsde/grid.hpp"

#include "wbsde/errors.hpp"

#include <string>

namespace wbsde {

TimeGrid make_grid(double t_cap, int n_steps) {
    if (!(t_cap > 0.0))
        throw ConfigError("make_grid: t_cap must be positive, got " + std::to_string(t_cap));
    if (n_steps < 1)
        throw ConfigError("make_grid: n_steps must be >= 1, got " + std::to_string(n_steps));
    TimeGrid g;
    g.t_cap = t_cap;
    g.n_steps = n_steps;
    g.dt = t_cap / n_steps;
    g.nodes.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i)
        g.nodes[static_cast<std::size_t>(i)] = (i == n_steps) ? t_cap : i * g.dt;
    return g;
}

TerminalTime TerminalTime::deterministic(int n_paths, int n_steps) {
    TerminalTime t;
    t.kind = Kind::Deterministic;
    t.index.assign(static_cast<std::size_t>(n_paths), n_steps);
    t.capped.assign(static_cast<std::size_t>(n_paths), 0);
    t.truncation_mass = 0.0;
    return t;
}

}  // namespace wbsde
