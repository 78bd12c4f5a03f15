#pragma once

#include <cstdint>
#include <vector>

namespace wbsde {

/// Uniform time discretization 0 = t_0 < ... < t_N = t_cap.
struct TimeGrid {
    double t_cap = 1.0;
    int n_steps = 1;
    double dt = 1.0;
    std::vector<double> nodes;

    int n_nodes() const { return n_steps + 1; }
    double node(int i) const { return nodes[static_cast<std::size_t>(i)]; }
};

TimeGrid make_grid(double t_cap, int n_steps);

/// Per-path effective terminal index: smallest grid index i with t_i >= tau,
/// clamped to n_steps. Paths that never reach tau inside the grid are capped.
struct TerminalTime {
    enum class Kind { Deterministic, ExitTime, CappedInfinite };

    Kind kind = Kind::Deterministic;
    std::vector<int> index;          // per path, in [0, n_steps]
    std::vector<std::uint8_t> capped;  // per path; index == n_steps without exit
    double truncation_mass = 0.0;    // fraction of capped paths

    static TerminalTime deterministic(int n_paths, int n_steps);
    bool is_capped(int path) const {
        return !capped.empty() && capped[static_cast<std::size_t>(path)] != 0;
    }
};

}  // namespace wbsde
