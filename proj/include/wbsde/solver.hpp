#pragma once

#include "wbsde/ensemble.hpp"
#include "wbsde/generator.hpp"
#include "wbsde/regression.hpp"
#include "wbsde/solution.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace wbsde {

struct SolverSettings {
    RegressionBasis basis;
    RegressionControls regression;
    int picard_max = 8;
    double picard_tol = 1e-10;  // weighted squared M2 distance between iterates
    bool implicit_y = false;    // damped Newton per node for stiff monotone drivers
    double inner_damping = 1.0;  // initial Newton step; backtracking halves it
    int inner_max = 50;
    double inner_tol = 1e-12;
    bool record_full = true;
    bool record_regressions = true;
};

/// One backward regression sweep with the generator's z-argument frozen at V
/// (layout (path, node, k*d); empty means zero). cum is the per-(path, node)
/// running weight integral for dense ensembles; checkpointed ensembles carry
/// their own. Returns terminal-consistent estimates: y equals xi at and past
/// each path's terminal index, z is zero there.
SolutionEstimate backward_sweep(const GeneratorSpec& g, std::span<const double> xi,
                                const PathEnsemble& ensemble, const TerminalTime& tau,
                                std::span<const double> cum, std::span<const double> V,
                                const SolverSettings& settings);

struct PicardResult {
    SolutionEstimate estimate;
    std::vector<double> distances;                   // per sweep
    std::vector<std::vector<double>> contributions;  // per sweep, per path
    int sweeps = 0;
    bool converged = false;
};

/// Outer fixed-point iteration over the frozen z-argument, starting from
/// V = 0. Stops when the weighted M2 distance between successive z iterates
/// drops below picard_tol, or after picard_max sweeps. Three consecutive
/// distance increases raise SolverError.
PicardResult picard_solve(const GeneratorSpec& g, std::span<const double> xi,
                          const PathEnsemble& ensemble, const TerminalTime& tau,
                          std::span<const double> cum, const SolverSettings& settings);

struct ContractionReport {
    std::vector<double> ratios;  // dist_{m+1}/dist_m
    std::vector<double> se;      // bootstrap standard errors
};

ContractionReport contraction_report(const PicardResult& result, int n_boot,
                                     std::uint64_t seed);

struct ResidualRow {
    int node = 0;
    double mean_norm = 0.0;  // |ensemble mean residual|
    double se = 0.0;
    double cond_rms = 0.0;  // RMS of the regressed conditional residual
    double allowance = 0.0;
    bool flagged = false;
};

struct ResidualReport {
    std::vector<ResidualRow> rows;
    bool any_flagged = false;
};

/// Discrete driver residual y_i - y_{i+1} - dt g(t_i, X_i, y_i, z_i) + z_i dB_i,
/// reported per node as ensemble mean and regressed conditional mean.
ResidualReport residual_check(const SolutionEstimate& estimate, const GeneratorSpec& g,
                              const PathEnsemble& ensemble, const TerminalTime& tau,
                              const SolverSettings& settings);

struct AssumptionReport {
    double monotonicity_violation = 0.0;  // relative, max over samples
    double lipschitz_violation = 0.0;
    double driver_bound_violation = 0.0;  // only when f_bound declared
    bool monotonicity_pass = false;
    bool lipschitz_pass = false;
    bool driver_bound_pass = true;
    int samples = 0;
    double tolerance = 1e-9;
};

/// Statistical check of the declared one-sided monotonicity in y and
/// Lipschitz continuity in z, sampling states from the ensemble.
AssumptionReport validate_assumptions(const GeneratorSpec& g, const PathEnsemble& ensemble,
                                      int sample_budget, std::uint64_t seed,
                                      double y_range = 2.0, double z_range = 2.0);

}  // namespace wbsde
