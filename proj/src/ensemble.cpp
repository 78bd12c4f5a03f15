#include "wbsde/ensemble.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/rng.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <string>

namespace wbsde {

namespace {

constexpr int kMaxDim = 8;

struct BadState {
    std::atomic<long long> packed{-1};  // path * 2^32 + node of first failure
    void record(int path, int node) {
        const long long v = (static_cast<long long>(path) << 32) | static_cast<unsigned>(node);
        long long cur = packed.load();
        while ((cur == -1 || v < cur) && !packed.compare_exchange_weak(cur, v)) {
        }
    }
    void raise_if_set(const char* what) const {
        const long long v = packed.load();
        if (v >= 0)
            throw SimulationError(std::string(what) + ": non-finite state at path " +
                                  std::to_string(v >> 32) + " node " +
                                  std::to_string(v & 0xffffffffLL));
    }
};

inline bool finite_all(const double* x, int n) {
    for (int c = 0; c < n; ++c)
        if (!std::isfinite(x[c])) return false;
    return true;
}

// One Euler-Maruyama step in place. dB holds the d increments of this step.
inline void em_step(const SdeSpec& spec, double t, double* x, const double* dB, double dt,
                    double* scratch) {
    double* b = scratch;              // state_dim
    double* sig = scratch + kMaxDim;  // state_dim * d
    if (spec.drift) {
        spec.drift(t, {x, static_cast<std::size_t>(spec.state_dim)},
                   {b, static_cast<std::size_t>(spec.state_dim)});
    } else {
        std::memset(b, 0, sizeof(double) * spec.state_dim);
    }
    if (spec.diffusion) {
        spec.diffusion(t, {x, static_cast<std::size_t>(spec.state_dim)},
                       {sig, static_cast<std::size_t>(spec.state_dim) * spec.d});
        for (int c = 0; c < spec.state_dim; ++c) {
            double acc = x[c] + b[c] * dt;
            for (int j = 0; j < spec.d; ++j) acc += sig[c * spec.d + j] * dB[j];
            x[c] = acc;
        }
    } else if (spec.unit_diffusion) {
        for (int c = 0; c < spec.state_dim; ++c)
            x[c] += b[c] * dt + (c < spec.d ? dB[c] : 0.0);
    } else {
        for (int c = 0; c < spec.state_dim; ++c) x[c] += b[c] * dt;
    }
}

}  // namespace

SdeSpec brownian_sde(int d) {
    SdeSpec s;
    s.state_dim = d;
    s.d = d;
    s.unit_diffusion = true;
    return s;
}

DomainSpec interval_domain(double lo, double hi) {
    DomainSpec dspec;
    dspec.description = "interval (" + std::to_string(lo) + ", " + std::to_string(hi) + ")";
    dspec.inside = [lo, hi](std::span<const double> x) { return x[0] > lo && x[0] < hi; };
    return dspec;
}

double PathEnsemble::increment(int path, int node, int comp) const {
    return std::sqrt(grid.dt) *
           rng::normal(seed, static_cast<std::uint64_t>(path), static_cast<std::uint32_t>(node),
                       static_cast<std::uint32_t>(comp));
}

std::span<const double> PathEnsemble::state(int path, int node) const {
    return {states.data() + state_idx(path, node), static_cast<std::size_t>(state_dim)};
}

std::span<const double> PathEnsemble::terminal(int path) const {
    return {terminal_state.data() + static_cast<std::size_t>(path) * state_dim,
            static_cast<std::size_t>(state_dim)};
}

int PathEnsemble::n_checkpoints() const {
    return checkpoint_stride > 0 ? grid.n_steps / checkpoint_stride + 1 : 0;
}

PathEnsemble simulate_brownian(const TimeGrid& grid, int n_paths, int d, std::uint64_t seed) {
    if (n_paths < 1) throw ConfigError("simulate_brownian: n_paths must be >= 1");
    if (d < 1) throw ConfigError("simulate_brownian: d must be >= 1");
    PathEnsemble e;
    e.grid = grid;
    e.n_paths = n_paths;
    e.d = d;
    e.state_dim = d;
    e.seed = seed;
    return e;
}

void euler_maruyama(const SdeSpec& spec, double t0, std::span<const double> x0,
                    PathEnsemble& ensemble) {
    if (spec.state_dim > kMaxDim || spec.d > kMaxDim)
        throw ConfigError("euler_maruyama: state_dim/d beyond supported limit");
    if (static_cast<int>(x0.size()) != spec.state_dim)
        throw ConfigError("euler_maruyama: x0 size mismatch");
    const int N = ensemble.grid.n_steps;
    const int sdim = spec.state_dim;
    ensemble.state_dim = sdim;
    ensemble.d = spec.d;
    ensemble.t_offset = t0;
    ensemble.states.resize(static_cast<std::size_t>(ensemble.n_paths) * (N + 1) * sdim);
    const double dt = ensemble.grid.dt;

    BadState bad;
    exec::for_each_index(static_cast<std::size_t>(ensemble.n_paths), [&](std::size_t p) {
        double x[kMaxDim];
        double dB[kMaxDim];
        double scratch[kMaxDim + kMaxDim * kMaxDim];
        for (int c = 0; c < sdim; ++c) x[c] = x0[c];
        double* row = ensemble.states.data() + ensemble.state_idx(static_cast<int>(p), 0);
        std::memcpy(row, x, sizeof(double) * sdim);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < spec.d; ++j) dB[j] = ensemble.increment(static_cast<int>(p), i, j);
            em_step(spec, t0 + ensemble.grid.node(i), x, dB, dt, scratch);
            if (!finite_all(x, sdim)) {
                bad.record(static_cast<int>(p), i + 1);
                return;
            }
            std::memcpy(row + static_cast<std::size_t>(i + 1) * sdim, x, sizeof(double) * sdim);
        }
    });
    bad.raise_if_set("euler_maruyama");
}

TerminalTime detect_exit(const PathEnsemble& ensemble, const DomainSpec& domain) {
    if (!ensemble.dense()) throw ConfigError("detect_exit: dense states required");
    const int N = ensemble.grid.n_steps;
    TerminalTime tau;
    tau.kind = TerminalTime::Kind::ExitTime;
    tau.index.assign(static_cast<std::size_t>(ensemble.n_paths), N);
    tau.capped.assign(static_cast<std::size_t>(ensemble.n_paths), 1);
    exec::for_each_index(static_cast<std::size_t>(ensemble.n_paths), [&](std::size_t p) {
        for (int i = 0; i <= N; ++i) {
            if (!domain.inside(ensemble.state(static_cast<int>(p), i))) {
                tau.index[p] = i;
                tau.capped[p] = 0;
                return;
            }
        }
    });
    tau.truncation_mass =
        exec::deterministic_sum(tau.capped.size(),
                                [&](std::size_t p) { return tau.capped[p] ? 1.0 : 0.0; }) /
        static_cast<double>(ensemble.n_paths);
    return tau;
}

PathEnsemble simulate_checkpointed(const SdeSpec& spec, double t0, std::span<const double> x0,
                                   const TimeGrid& grid, int n_paths, std::uint64_t seed,
                                   const CheckpointConfig& config) {
    if (config.stride < 1) throw ConfigError("simulate_checkpointed: stride must be >= 1");
    if (spec.state_dim > kMaxDim || spec.d > kMaxDim)
        throw ConfigError("simulate_checkpointed: state_dim/d beyond supported limit");
    PathEnsemble e;
    e.grid = grid;
    e.n_paths = n_paths;
    e.d = spec.d;
    e.state_dim = spec.state_dim;
    e.seed = seed;
    e.t_offset = t0;
    e.checkpoint_stride = config.stride;
    e.sde = spec;
    if (config.coeff) e.coeff = *config.coeff;
    e.weight_params = config.weights;

    const int N = grid.n_steps;
    const int sdim = spec.state_dim;
    const int ncp = e.n_checkpoints();
    const double dt = grid.dt;
    e.checkpoint_states.assign(static_cast<std::size_t>(n_paths) * ncp * sdim, 0.0);
    e.checkpoint_cum.assign(static_cast<std::size_t>(n_paths) * ncp, 0.0);
    e.exit_index.assign(static_cast<std::size_t>(n_paths), N);
    e.exited.assign(static_cast<std::size_t>(n_paths), 0);
    e.terminal_state.assign(static_cast<std::size_t>(n_paths) * sdim, 0.0);

    const bool track_cum = static_cast<bool>(config.coeff);
    BadState bad;
    exec::for_each_index(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
        double x[kMaxDim];
        double dB[kMaxDim];
        double scratch[kMaxDim + kMaxDim * kMaxDim];
        for (int c = 0; c < sdim; ++c) x[c] = x0[c];
        double cum = 0.0;
        const auto store_cp = [&](int cp_index) {
            std::memcpy(e.checkpoint_states.data() +
                            (p * static_cast<std::size_t>(ncp) + cp_index) * sdim,
                        x, sizeof(double) * sdim);
            e.checkpoint_cum[p * static_cast<std::size_t>(ncp) + cp_index] = cum;
        };
        store_cp(0);
        int exit_at = N;
        bool exited = false;
        for (int i = 0; i < N; ++i) {
            if (config.domain &&
                !config.domain->inside({x, static_cast<std::size_t>(sdim)})) {
                exit_at = i;
                exited = true;
                break;
            }
            const double t = t0 + grid.node(i);
            if (track_cum) {
                const double mu = e.coeff.mu_at(t, {x, static_cast<std::size_t>(sdim)});
                const double nu = e.coeff.nu_at(t, {x, static_cast<std::size_t>(sdim)});
                cum += (e.weight_params.beta * mu + 0.5 * e.weight_params.rho * nu * nu) * dt;
            }
            for (int j = 0; j < spec.d; ++j) dB[j] = e.increment(static_cast<int>(p), i, j);
            em_step(spec, t, x, dB, dt, scratch);
            if (!finite_all(x, sdim)) {
                bad.record(static_cast<int>(p), i + 1);
                return;
            }
            if ((i + 1) % config.stride == 0) store_cp((i + 1) / config.stride);
        }
        if (!exited && config.domain &&
            !config.domain->inside({x, static_cast<std::size_t>(sdim)})) {
            exit_at = N;
            exited = true;
        }
        e.exit_index[p] = exit_at;
        e.exited[p] = exited ? 1 : 0;
        std::memcpy(e.terminal_state.data() + p * static_cast<std::size_t>(sdim), x,
                    sizeof(double) * sdim);
    });
    bad.raise_if_set("simulate_checkpointed");
    return e;
}

void regenerate_block(const PathEnsemble& ensemble, int node_lo, int node_hi,
                      std::vector<double>& states_out, std::vector<double>* cum_out) {
    if (ensemble.dense()) throw ConfigError("regenerate_block: ensemble is dense");
    if (!ensemble.sde) throw ConfigError("regenerate_block: missing SDE spec");
    const int stride = ensemble.checkpoint_stride;
    if (node_lo % stride != 0 || node_hi - node_lo >= stride + 1 || node_hi < node_lo)
        throw ConfigError("regenerate_block: block must start at a checkpoint");
    const SdeSpec& spec = *ensemble.sde;
    const int sdim = ensemble.state_dim;
    const int n = ensemble.n_paths;
    const int width = node_hi - node_lo + 1;
    const double dt = ensemble.grid.dt;
    const int ncp = ensemble.n_checkpoints();
    states_out.resize(static_cast<std::size_t>(width) * n * sdim);
    const bool track_cum = cum_out != nullptr;
    if (track_cum) cum_out->resize(static_cast<std::size_t>(width) * n);

    BadState bad;
    exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
        // Nodes past a path's exit are never read by the backward pass.
        const int last = std::min(ensemble.exit_index[p], node_hi);
        double x[kMaxDim];
        double dB[kMaxDim];
        double scratch[kMaxDim + kMaxDim * kMaxDim];
        const int cp = node_lo / stride;
        std::memcpy(x,
                    ensemble.checkpoint_states.data() +
                        (p * static_cast<std::size_t>(ncp) + cp) * sdim,
                    sizeof(double) * sdim);
        double cum = ensemble.checkpoint_cum[p * static_cast<std::size_t>(ncp) + cp];
        for (int i = node_lo; i <= last; ++i) {
            std::memcpy(states_out.data() +
                            (static_cast<std::size_t>(i - node_lo) * n + p) * sdim,
                        x, sizeof(double) * sdim);
            if (track_cum) (*cum_out)[static_cast<std::size_t>(i - node_lo) * n + p] = cum;
            if (i == last) break;
            const double t = ensemble.t_offset + ensemble.grid.node(i);
            if (track_cum) {
                const double mu = ensemble.coeff.mu_at(t, {x, static_cast<std::size_t>(sdim)});
                const double nu = ensemble.coeff.nu_at(t, {x, static_cast<std::size_t>(sdim)});
                cum += (ensemble.weight_params.beta * mu +
                        0.5 * ensemble.weight_params.rho * nu * nu) *
                       dt;
            }
            for (int j = 0; j < spec.d; ++j) dB[j] = ensemble.increment(static_cast<int>(p), i, j);
            em_step(spec, t, x, dB, dt, scratch);
            if (!finite_all(x, sdim)) {
                bad.record(static_cast<int>(p), i + 1);
                return;
            }
        }
    });
    bad.raise_if_set("regenerate_block");
}

ExpMomentReport exp_moment_check(const PathEnsemble& ensemble, double gamma, double q) {
    if (!ensemble.dense()) throw ConfigError("exp_moment_check: dense states required");
    if (!(q >= 1.0 && q < 2.0)) throw ConfigError("exp_moment_check: q must lie in [1,2)");
    const int n_nodes = ensemble.grid.n_nodes();
    std::vector<double> weights(static_cast<std::size_t>(ensemble.n_paths));
    exec::for_each_index(weights.size(), [&](std::size_t p) {
        double sup = 0.0;
        for (int i = 0; i < n_nodes; ++i) {
            double norm_sq = 0.0;
            const auto x = ensemble.state(static_cast<int>(p), i);
            for (int c = 0; c < ensemble.state_dim; ++c) norm_sq += x[c] * x[c];
            sup = std::max(sup, norm_sq);
        }
        weights[p] = std::exp(gamma * std::pow(std::sqrt(sup), q));
    });
    ExpMomentReport report;
    const auto ms = exec::mean_se(weights);
    report.estimate = ms.mean;
    report.se = ms.se;
    double max_w = 0.0;
    for (double w : weights) max_w = std::max(max_w, w);
    const double total = ms.mean * static_cast<double>(ensemble.n_paths);
    report.max_share = total > 0.0 ? max_w / total : 0.0;
    report.heavy_tail_warning = report.max_share > 0.5;
    return report;
}

SdeLipschitzReport validate_sde_lipschitz(const SdeSpec& spec, double t_max, int samples,
                                          std::uint64_t seed) {
    if (!(spec.lipschitz_hint > 0.0))
        throw ConfigError("validate_sde_lipschitz: spec carries no lipschitz_hint");
    const std::uint64_t s = rng::derive_stream(seed, rng::kStreamSampler, 17);
    const int l = spec.state_dim;
    const int ld = spec.state_dim * spec.d;
    SdeLipschitzReport report;
    double x1[kMaxDim], x2[kMaxDim], b1[kMaxDim], b2[kMaxDim];
    double s1[kMaxDim * kMaxDim], s2[kMaxDim * kMaxDim];
    for (int i = 0; i < samples; ++i) {
        std::uint32_t w = 0;
        const auto u = [&]() { return rng::uniform01(s, static_cast<std::uint64_t>(i), 0, w++); };
        const double t = t_max * u();
        double dx = 0.0;
        for (int c = 0; c < l; ++c) {
            x1[c] = 8.0 * u() - 4.0;
            x2[c] = 8.0 * u() - 4.0;
            dx += (x1[c] - x2[c]) * (x1[c] - x2[c]);
        }
        dx = std::sqrt(dx);
        const double bound = spec.lipschitz_hint * dx;
        if (spec.drift) {
            spec.drift(t, {x1, static_cast<std::size_t>(l)}, {b1, static_cast<std::size_t>(l)});
            spec.drift(t, {x2, static_cast<std::size_t>(l)}, {b2, static_cast<std::size_t>(l)});
            double db = 0.0;
            for (int c = 0; c < l; ++c) db += (b1[c] - b2[c]) * (b1[c] - b2[c]);
            report.drift_violation = std::max(
                report.drift_violation, (std::sqrt(db) - bound) / (1.0 + bound));
        }
        if (spec.diffusion) {
            spec.diffusion(t, {x1, static_cast<std::size_t>(l)},
                           {s1, static_cast<std::size_t>(ld)});
            spec.diffusion(t, {x2, static_cast<std::size_t>(l)},
                           {s2, static_cast<std::size_t>(ld)});
            double ds = 0.0;
            for (int c = 0; c < ld; ++c) ds += (s1[c] - s2[c]) * (s1[c] - s2[c]);
            report.diffusion_violation = std::max(
                report.diffusion_violation, (std::sqrt(ds) - bound) / (1.0 + bound));
        }
    }
    report.drift_violation = std::max(0.0, report.drift_violation);
    report.diffusion_violation = std::max(0.0, report.diffusion_violation);
    report.pass = report.drift_violation <= 1e-9 && report.diffusion_violation <= 1e-9;
    return report;
}

std::vector<double> evaluate_terminal(const TerminalCondition& condition,
                                      const PathEnsemble& ensemble, const TerminalTime& tau) {
    const int k = condition.k;
    std::vector<double> out(static_cast<std::size_t>(ensemble.n_paths) * k, 0.0);
    exec::for_each_index(static_cast<std::size_t>(ensemble.n_paths), [&](std::size_t p) {
        TerminalContext ctx;
        ctx.path = static_cast<int>(p);
        ctx.exit_index = tau.index.empty() ? ensemble.grid.n_steps : tau.index[p];
        ctx.exit_time = ensemble.t_offset + ensemble.grid.node(ctx.exit_index);
        ctx.state_dim = ensemble.state_dim;
        ctx.ensemble = &ensemble;
        ctx.grid = &ensemble.grid;
        if (ensemble.dense()) {
            ctx.exit_state = ensemble.state(ctx.path, ctx.exit_index);
            ctx.path_states = {ensemble.states.data() + ensemble.state_idx(ctx.path, 0),
                               static_cast<std::size_t>(ensemble.grid.n_nodes()) *
                                   ensemble.state_dim};
        } else {
            ctx.exit_state = ensemble.terminal(ctx.path);
        }
        condition.eval(ctx, {out.data() + p * k, static_cast<std::size_t>(k)});
    });
    return out;
}

TerminalTime terminal_from_ensemble(const PathEnsemble& ensemble, TerminalTime::Kind kind) {
    TerminalTime tau;
    tau.kind = kind;
    tau.index = ensemble.exit_index;
    tau.capped.assign(static_cast<std::size_t>(ensemble.n_paths), 0);
    for (int p = 0; p < ensemble.n_paths; ++p)
        tau.capped[static_cast<std::size_t>(p)] = ensemble.exited[static_cast<std::size_t>(p)] ? 0 : 1;
    tau.truncation_mass =
        exec::deterministic_sum(tau.capped.size(),
                                [&](std::size_t p) { return tau.capped[p] ? 1.0 : 0.0; }) /
        static_cast<double>(ensemble.n_paths);
    return tau;
}

}  // namespace wbsde
