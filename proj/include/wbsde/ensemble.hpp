#pragma once

#include "wbsde/generator.hpp"
#include "wbsde/grid.hpp"
#include "wbsde/weights.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wbsde {

/// Forward SDE coefficients. Null drift/diffusion members mean zero; a null
/// diffusion with unit_diffusion set gives dX = dB component-wise.
struct SdeSpec {
    int state_dim = 1;
    int d = 1;
    std::function<void(double t, std::span<const double> x, std::span<double> out)> drift;
    // Row-major state_dim x d.
    std::function<void(double t, std::span<const double> x, std::span<double> out)> diffusion;
    bool unit_diffusion = false;
    double lipschitz_hint = 0.0;
};

SdeSpec brownian_sde(int d);  // X = x0 + B

struct DomainSpec {
    std::function<bool(std::span<const double> x)> inside;
    std::string description;
};

DomainSpec interval_domain(double lo, double hi);  // open interval, 1-d state

/// Simulated forward paths. Brownian increments are never stored: each one is
/// a pure function of (seed, path, node, component), so workers and re-runs
/// reproduce them bit-exactly. States are stored dense, or as sparse
/// checkpoints from which blocks are regenerated on demand.
class PathEnsemble {
public:
    TimeGrid grid;
    int n_paths = 0;
    int d = 1;
    int state_dim = 1;
    std::uint64_t seed = 0;
    double t_offset = 0.0;  // physical time of grid node 0

    // Dense state storage, (path, node, coord); empty in checkpoint mode.
    std::vector<double> states;

    // Checkpoint mode.
    int checkpoint_stride = 0;  // 0 = dense
    std::vector<double> checkpoint_states;  // (path, checkpoint, coord)
    std::vector<double> checkpoint_cum;     // (path, checkpoint) running weight integral
    std::optional<SdeSpec> sde;             // needed to regenerate blocks
    CoefficientModel coeff;                 // rate model feeding checkpoint_cum
    WeightParams weight_params;

    std::vector<int> exit_index;         // per path; n_steps when no exit recorded
    std::vector<std::uint8_t> exited;    // per path
    std::vector<double> terminal_state;  // (path, coord) at min(exit, n_steps)

    /// Brownian increment, Normal(0, dt), for (path, node, component).
    double increment(int path, int node, int comp) const;

    std::span<const double> state(int path, int node) const;
    std::span<const double> terminal(int path) const;

    bool dense() const { return checkpoint_stride == 0; }
    int n_checkpoints() const;
    std::size_t state_idx(int path, int node) const {
        return (static_cast<std::size_t>(path) * grid.n_nodes() + node) * state_dim;
    }
};

/// Increments-only ensemble: header with no state storage.
PathEnsemble simulate_brownian(const TimeGrid& grid, int n_paths, int d,
                               std::uint64_t seed);

/// Dense Euler-Maruyama forward pass: X[i+1] = X[i] + b dt + sigma dB,
/// all paths from the same x0 at physical time t0.
void euler_maruyama(const SdeSpec& spec, double t0, std::span<const double> x0,
                    PathEnsemble& ensemble);

/// First grid node outside the domain per path (n_steps when none).
TerminalTime detect_exit(const PathEnsemble& ensemble, const DomainSpec& domain);

struct CheckpointConfig {
    int stride = 256;
    const DomainSpec* domain = nullptr;  // optional early stopping at exit
    const CoefficientModel* coeff = nullptr;
    WeightParams weights;
};

/// Memory-lean forward pass: stores states and the running weight integral
/// only at checkpoint nodes plus per-path exit data. Blocks are re-derived
/// exactly from the checkpoints during backward passes.
PathEnsemble simulate_checkpointed(const SdeSpec& spec, double t0,
                                   std::span<const double> x0, const TimeGrid& grid,
                                   int n_paths, std::uint64_t seed,
                                   const CheckpointConfig& config);

/// Regenerates states (and cum integral, when tracked) for grid nodes
/// [node_lo, node_hi] into caller buffers laid out (node, path, coord).
void regenerate_block(const PathEnsemble& ensemble, int node_lo, int node_hi,
                      std::vector<double>& states_out, std::vector<double>* cum_out);

struct ExpMomentReport {
    double estimate = 0.0;
    double se = 0.0;
    double max_share = 0.0;  // largest single-path weight share
    bool heavy_tail_warning = false;
};

/// Monte Carlo estimate of E[exp(gamma * sup_i |X_i|^q)], q in [1,2).
ExpMomentReport exp_moment_check(const PathEnsemble& ensemble, double gamma, double q);

struct SdeLipschitzReport {
    double drift_violation = 0.0;      // relative excess over K|x1 - x2|
    double diffusion_violation = 0.0;
    bool pass = false;
};

/// Statistical check of the declared global Lipschitz constant
/// (spec.lipschitz_hint) on sampled coefficient pairs.
SdeLipschitzReport validate_sde_lipschitz(const SdeSpec& spec, double t_max, int samples,
                                          std::uint64_t seed);

/// Evaluates a terminal condition path-wise: out is (path, k).
std::vector<double> evaluate_terminal(const TerminalCondition& condition,
                                      const PathEnsemble& ensemble,
                                      const TerminalTime& tau);

TerminalTime terminal_from_ensemble(const PathEnsemble& ensemble, TerminalTime::Kind kind);

}  // namespace wbsde
