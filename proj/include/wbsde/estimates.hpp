#pragma once

#include "wbsde/ensemble.hpp"
#include "wbsde/generator.hpp"
#include "wbsde/solution.hpp"
#include "wbsde/weights.hpp"

#include <string>
#include <vector>

namespace wbsde {

/// Monte Carlo weighted norms of (xi, Y, Z): terminal weighted L2, weighted
/// running sup of Y, and the weighted time integral of |Z|^2, all restricted
/// to each path's [0, terminal index].
WeightedNorms weighted_norms(const SolutionEstimate& estimate, const CoefficientTrace& trace,
                             std::span<const double> xi, const TerminalTime& tau,
                             const TimeGrid& grid);

struct InequalityRow {
    std::string id;
    double lhs = 0.0;
    double rhs = 0.0;
    double lhs_se = 0.0;
    double rhs_se = 0.0;
    double diff_se = 0.0;  // paired standard error of rhs - lhs
    double constant = 0.0;
    bool pass = false;
};

struct AprioriReport {
    std::vector<InequalityRow> rows;  // (2.02)-style suite, fixed order
    double empirical_c_204 = 0.0;     // smallest constant making (2.04) hold on the data
    // Diagnostic only (no verdict): E[int e^{2 int a} a |Y|^2 dt], the
    // quantity that is finite for beta > 1 but may diverge at beta = 1.
    double weighted_rate_y_integral = 0.0;
    bool all_pass = false;
};

/// Evaluates the a priori inequality suite at the unconditional instance
/// (probe times zero). The driver-bound process f is taken from g.f_bound
/// (must be declared). Verdicts use 4-sigma paired slack.
AprioriReport apriori_check(const SolutionEstimate& estimate, const GeneratorSpec& g,
                            std::span<const double> xi, const CoefficientTrace& trace,
                            const WeightParams& params, const TerminalTime& tau,
                            const PathEnsemble& ensemble);

struct DependenceReport {
    double lhs = 0.0;         // weighted squared solution distance
    double rhs_driver = 0.0;  // terminal + driver perturbation functional
    double ratio = 0.0;
    double lhs_se = 0.0;
    double rhs_se = 0.0;
};

/// Continuous-dependence functionals for two solved problems on the same
/// ensemble; the driver difference is evaluated along (Y', Z').
DependenceReport continuous_dependence(const SolutionEstimate& first,
                                       const SolutionEstimate& second,
                                       const GeneratorSpec& g_first,
                                       const GeneratorSpec& g_second,
                                       std::span<const double> xi_first,
                                       std::span<const double> xi_second,
                                       const CoefficientTrace& trace, const TerminalTime& tau,
                                       const PathEnsemble& ensemble);

struct StabilityRow {
    double premise = 0.0;
    double premise_se = 0.0;
    double distance = 0.0;
    double distance_se = 0.0;
};

struct StabilityTable {
    std::vector<StabilityRow> rows;
    bool monotone_within_slack = false;  // both columns non-increasing within 1 se
};

/// Stability table for a sequence of perturbed problems against the limit
/// problem, all solved on one ensemble.
StabilityTable stability_sequence(const SolutionEstimate& limit, const GeneratorSpec& g_limit,
                                  std::span<const double> xi_limit,
                                  const std::vector<const SolutionEstimate*>& sequence,
                                  const std::vector<const GeneratorSpec*>& g_sequence,
                                  const std::vector<std::span<const double>>& xi_sequence,
                                  const CoefficientTrace& trace, const TerminalTime& tau,
                                  const PathEnsemble& ensemble);

}  // namespace wbsde
