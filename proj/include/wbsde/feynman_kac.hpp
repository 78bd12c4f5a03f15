#pragma once

#include "wbsde/ensemble.hpp"
#include "wbsde/generator.hpp"
#include "wbsde/solver.hpp"

#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace wbsde {

/// PDE problem posed through its probabilistic data: forward SDE, terminal /
/// boundary map h, driver g(t,x,y,z), declared growth constants, and (for
/// the elliptic case) the domain and horizon cap.
struct PdeProblemSpec {
    SdeSpec sde;
    std::function<double(std::span<const double> x)> h;
    GeneratorSpec generator;  // k = 1
    double growth_k = 1.0;    // K
    double growth_p = 1.0;    // p
    double growth_q = 1.0;    // q in [1, 2)
    double t_end = 1.0;       // parabolic horizon T
    DomainSpec domain;        // elliptic only
    double t_cap = 4.0;       // elliptic truncation horizon
    WeightParams weights{1.0, 2.0, 2.0};
};

struct SolveBudget {
    int n_paths = 20000;
    int n_steps = 64;
    int checkpoint_stride = 0;  // 0 = dense storage
    SolverSettings solver;
};

struct ProbeResult {
    double u = 0.0;
    double se = 0.0;               // bootstrap standard error of the root value
    std::vector<double> z_readout;  // (grad_x u sigma) proxy at the probe
    double truncation_mass = 0.0;   // elliptic only
    int sweeps = 0;
    bool truncation_warning = false;
    double t_cap_used = 0.0;
};

/// u(t, x) = Y_t^{t,x}: simulate X from (t, x), set xi = h(X_T), solve the
/// BSDE backward, return the root regression value with a bootstrap se.
ProbeResult solve_parabolic(const PdeProblemSpec& spec, double t, std::span<const double> x,
                            const SolveBudget& budget, std::uint64_t seed);

/// u(x) = Y_0^x with xi = h at the exit state (cap state for paths that never
/// leave; their fraction is reported). strict escalates the horizon until the
/// truncation mass is below 0.5%, then fails if it cannot.
ProbeResult solve_elliptic(const PdeProblemSpec& spec, std::span<const double> x,
                           const SolveBudget& budget, std::uint64_t seed,
                           bool strict = false);

struct PdeTableRow {
    std::vector<double> probe;  // (t, x...) or (x...)
    double u = 0.0;
    double se = 0.0;
    double oracle = std::numeric_limits<double>::quiet_NaN();
};

struct GrowthBoundReport {
    double c_fit = 0.0;
    double c_max = 0.0;
    bool pass = false;
};

/// Fits the smallest C with |u| <= C exp(C |x|^q) over the table rows
/// (4-sigma slack); fails when no C <= c_max works.
GrowthBoundReport growth_bound_check(const std::vector<PdeTableRow>& table, double q,
                                     double c_max = 50.0);

/// Spot-checks the declared envelopes |h| <= K e^{p|x|^q} and
/// |g(t,x,0,0)| <= K e^{p|x|^q} on sampled points; throws InvariantError on a
/// violation.
void validate_growth_envelopes(const PdeProblemSpec& spec, int samples,
                               std::uint64_t seed);

}  // namespace wbsde
