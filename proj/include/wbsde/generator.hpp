#pragma once

#include "wbsde/grid.hpp"
#include "wbsde/weights.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wbsde {

class PathEnsemble;

/// Driver evaluation g(t, x, y, z) -> out, with y in R^k and z in R^{k x d}
/// (row-major). x is the forward state the coefficient processes live on.
using GeneratorFn = std::function<void(double t, std::span<const double> x,
                                       std::span<const double> y,
                                       std::span<const double> z, std::span<double> out)>;

/// Coefficient processes as functions of (t, state). Null members mean zero.
struct CoefficientModel {
    std::function<double(double t, std::span<const double> x)> mu;
    std::function<double(double t, std::span<const double> x)> nu;
    bool state_independent = false;

    double mu_at(double t, std::span<const double> x) const { return mu ? mu(t, x) : 0.0; }
    double nu_at(double t, std::span<const double> x) const { return nu ? nu(t, x) : 0.0; }
};

/// Rule producing the non-increasing level process alpha in (0,1] along a
/// path. The per-path form may use running functionals of the state history;
/// the deterministic form is required by the offline generator transforms.
struct AlphaModel {
    std::function<void(const TimeGrid& grid, std::span<const double> path_states,
                       int state_dim, std::span<double> out)>
        per_path;
    std::function<double(double t)> deterministic;

    bool empty() const { return !per_path && !deterministic; }
};

// Shipped alpha recipes (the paper pins no canonical choice).
AlphaModel alpha_exponential();            // e^{-t}
AlphaModel alpha_lipschitz_preset(double beta, double mu0);  // e^{-t}/(1+sup e^{beta mu s} mu)
AlphaModel alpha_running_sup_poly(double beta, int power);   // e^{-beta int |x| - t}/sup(1+|x|)^power
AlphaModel alpha_inverse_sup_pow(int power);                 // 1/(1+sup |x|^power)

/// Evaluatable generator plus its declared structural data.
struct GeneratorSpec {
    int k = 1;
    int d = 1;
    GeneratorFn eval;
    bool depends_on_y = true;
    bool depends_on_z = true;
    CoefficientModel coeff;
    AlphaModel alpha;
    // Declared envelope bound psi_bar(t, alpha_t, r); estimated by sampling
    // when absent.
    std::function<double(double t, double alpha_t, double r)> growth_envelope;
    // Optional driver bound process f of the a priori estimate's assumption.
    std::function<double(double t, std::span<const double> x)> f_bound;

    void operator()(double t, std::span<const double> x, std::span<const double> y,
                    std::span<const double> z, std::span<double> out) const {
        eval(t, x, y, z, out);
    }
};

/// What a terminal condition may look at for one path.
struct TerminalContext {
    int path = 0;
    int exit_index = 0;
    double exit_time = 0.0;
    std::span<const double> exit_state;
    std::span<const double> path_states;  // dense-mode history; empty when streaming
    int state_dim = 1;
    const PathEnsemble* ensemble = nullptr;  // for increment lookups
    const TimeGrid* grid = nullptr;
};

/// Pure measurable map of the supplied path data.
struct TerminalCondition {
    int k = 1;
    std::function<void(const TerminalContext&, std::span<double> out)> eval;
};

TerminalCondition constant_terminal(std::vector<double> value);
TerminalCondition terminal_state_map(int k,
                                     std::function<void(std::span<const double> x, double t,
                                                        std::span<double> out)>
                                         fn);

/// Materializes alpha per (path, node) from the generator's rule.
std::vector<double> alpha_trace(const AlphaModel& model, const PathEnsemble& ensemble);

}  // namespace wbsde
