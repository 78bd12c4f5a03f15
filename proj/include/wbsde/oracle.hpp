#pragma once

#include "wbsde/ensemble.hpp"
#include "wbsde/grid.hpp"

#include <functional>
#include <span>
#include <vector>

namespace wbsde {

/// Deterministic per-node coefficients of the scalar linear driver
/// g(t, y, z) = mu_t y + nu_t z (k = d = 1).
struct LinearCoefficients {
    std::vector<double> mu;  // per node
    std::vector<double> nu;  // per node

    static LinearCoefficients constant(const TimeGrid& grid, double mu0, double nu0);
};

/// Terminal data the linear oracle understands. DeterministicValue and the
/// exponential path functional of the motivational counterexample admit
/// pathwise-exact solutions; anything else goes through nested Monte Carlo.
struct LinearTerminal {
    enum class Kind { DeterministicValue, ExpFunctional, Generic };
    Kind kind = Kind::DeterministicValue;
    double value = 0.0;  // DeterministicValue
    // Generic: xi as a function of the path's increments.
    std::function<double(std::span<const double> dB, const TimeGrid& grid)> eval;

    static LinearTerminal deterministic(double v);
    /// xi = exp(int b dB - 3/2 int b^2 dt) with b = the nu coefficients.
    static LinearTerminal exp_functional();
    static LinearTerminal generic(
        std::function<double(std::span<const double> dB, const TimeGrid& grid)> fn);
};

struct LinearBsdeResult {
    std::vector<double> y;  // (path, node)
    std::vector<double> z;  // (path, node < N); zero unless pathwise-explicit z known
    bool exact = false;     // pathwise-explicit formula used
    double inner_se = 0.0;  // nested-estimator standard error (averaged)
};

/// Pathwise reference solution of the scalar linear BSDE on the ensemble's
/// Brownian increments. inner_budget only matters for Generic terminals
/// (antithetic nested Monte Carlo; must be positive there).
LinearBsdeResult linear_bsde_pathwise(const LinearCoefficients& coeff,
                                      const LinearTerminal& xi, const PathEnsemble& ensemble,
                                      int inner_budget = 256);

/// Evaluates the terminal value per path (discrete sums of the increments).
std::vector<double> linear_terminal_values(const LinearCoefficients& coeff,
                                           const LinearTerminal& xi,
                                           const PathEnsemble& ensemble);

struct WeightConditionReport {
    double estimate = 0.0;
    double se = 0.0;
    double max_share = 0.0;
    bool heavy_tail_warning = false;
};

/// Monte Carlo estimate of E[|xi|^2 e^{2 beta int mu + rho int nu^2}].
WeightConditionReport weight_condition_check(const LinearCoefficients& coeff,
                                             const LinearTerminal& xi,
                                             const PathEnsemble& ensemble, double beta_tilde,
                                             double rho_tilde);

/// Diagnostic for the non-observable sup moment: running estimates of
/// E[sup_i |y_i|^2 e^{rho int nu^2}] over doubling path counts (rho = 1).
std::vector<double> sup_moment_diagnostic(const LinearCoefficients& coeff,
                                          const PathEnsemble& ensemble, int doublings);

}  // namespace wbsde
