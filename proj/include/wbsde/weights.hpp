#pragma once

#include "wbsde/grid.hpp"

#include <span>
#include <vector>

namespace wbsde {

/// Weight exponents of the solution space: the running rate is
/// beta*mu + (rho/2)*nu^2 with beta >= 1 and rho > 1.
struct WeightParams {
    double beta = 1.0;
    double rho = 2.0;
    double rho_bar = 2.0;  // in (1, rho], used by the a priori inequalities

    void validate() const;
};

/// Nonnegative coefficient processes mu (1/time) and nu (1/sqrt(time)) per
/// (path, node), the derived rate a = beta*mu + (rho/2)*nu^2, and its running
/// left-Riemann integral cum[i] = sum_{j<i} a[j]*dt.
struct CoefficientTrace {
    int n_paths = 0;
    int n_nodes = 0;
    std::vector<double> mu;
    std::vector<double> nu;
    std::vector<double> rate;
    std::vector<double> cum;

    std::size_t idx(int path, int node) const {
        return static_cast<std::size_t>(path) * n_nodes + node;
    }
    double cum_at(int path, int node) const { return cum[idx(path, node)]; }
};

/// Builds the derived rate from (params, mu, nu); mu/nu are copied.
CoefficientTrace make_trace(const WeightParams& params, int n_paths, int n_nodes,
                            std::span<const double> mu, std::span<const double> nu);

/// Constant-coefficient trace, one row per path.
CoefficientTrace constant_trace(const WeightParams& params, int n_paths,
                                const TimeGrid& grid, double mu0, double nu0);

/// Fills trace.cum with the left-Riemann running integral of trace.rate.
/// Throws InvariantError on a negative rate entry.
void cumulative_weight(CoefficientTrace& trace, const TimeGrid& grid);

}  // namespace wbsde
