#pragma once

#include "wbsde/regression.hpp"

#include <span>
#include <vector>

namespace wbsde {

/// Per-node regression snapshot (coefficients + diagnostics), enough to
/// re-evaluate the fitted conditional expectations at arbitrary states.
struct NodeRegressionRecord {
    int node = 0;
    NodeFit fit;
};

/// Estimated (Y, Z) on the grid. Past a path's terminal index, y holds the
/// terminal value and z is zero. full_history is off for memory-lean runs,
/// which keep only root data and streamed diagnostics.
struct SolutionEstimate {
    int k = 1;
    int d = 1;
    int n_paths = 0;
    int n_nodes = 0;
    bool full_history = true;

    std::vector<double> y;  // (path, node, k)
    std::vector<double> z;  // (path, node < N, k*d)

    std::vector<NodeRegressionRecord> regressions;

    std::vector<double> root_y;  // k
    std::vector<double> root_z;  // k*d
    // Per-path forward accumulation xi_p + sum dt g(t_i, X_i, y_hat, V): same
    // mean as the root value up to regression bias, but carrying the raw
    // Monte Carlo dispersion; used for the root standard error.
    std::vector<double> pathwise_value;  // (path, k)
    std::vector<double> dist_to_input;   // per path: weighted ||z - V||^2 contribution

    std::size_t y_idx(int path, int node) const {
        return (static_cast<std::size_t>(path) * n_nodes + node) * k;
    }
    std::size_t z_idx(int path, int node) const {
        return (static_cast<std::size_t>(path) * (n_nodes - 1) + node) *
               (static_cast<std::size_t>(k) * d);
    }
    std::span<const double> y_at(int path, int node) const {
        return {y.data() + y_idx(path, node), static_cast<std::size_t>(k)};
    }
    std::span<const double> z_at(int path, int node) const {
        return {z.data() + z_idx(path, node), static_cast<std::size_t>(k) * d};
    }
};

/// Monte Carlo estimates of the weighted terminal/solution norms.
struct WeightedNorms {
    double xi_norm_sq = 0.0;
    double y_norm_sq = 0.0;
    double z_norm_sq = 0.0;
    double xi_se = 0.0;
    double y_se = 0.0;
    double z_se = 0.0;
    std::size_t n_paths = 0;
};

}  // namespace wbsde
