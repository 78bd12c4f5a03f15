#include "wbsde/solver.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace wbsde {

namespace {

constexpr double kZeros[64] = {};

// Uniform access to per-node states and weight integrals for dense and
// checkpointed ensembles. Checkpoint blocks are regenerated on demand while
// the sweep walks backward.
class NodeCursor {
public:
    NodeCursor(const PathEnsemble& ens, std::span<const double> cum_dense)
        : ens_(ens), cum_dense_(cum_dense) {
        if (!ens.dense()) {
            block_ = -1;
        }
    }

    void prepare(int node) {
        if (ens_.dense()) return;
        const int stride = ens_.checkpoint_stride;
        const int b = node / stride;
        if (b == block_) return;
        const int lo = b * stride;
        const int hi = std::min(lo + stride, ens_.grid.n_steps);
        regenerate_block(ens_, lo, hi, states_buf_, &cum_buf_);
        block_ = b;
        block_lo_ = lo;
    }

    const double* states_at(int node) const {
        if (ens_.dense()) return ens_.states.data() + static_cast<std::size_t>(node) * ens_.state_dim;
        return states_buf_.data() +
               static_cast<std::size_t>(node - block_lo_) * ens_.n_paths * ens_.state_dim;
    }

    std::size_t path_stride() const {
        if (ens_.dense())
            return static_cast<std::size_t>(ens_.grid.n_nodes()) * ens_.state_dim;
        return static_cast<std::size_t>(ens_.state_dim);
    }

    double cum(int path, int node) const {
        if (ens_.dense()) {
            if (cum_dense_.empty()) return 0.0;
            return cum_dense_[static_cast<std::size_t>(path) * ens_.grid.n_nodes() + node];
        }
        if (cum_buf_.empty()) return 0.0;
        return cum_buf_[static_cast<std::size_t>(node - block_lo_) * ens_.n_paths + path];
    }

private:
    const PathEnsemble& ens_;
    std::span<const double> cum_dense_;
    std::vector<double> states_buf_;
    std::vector<double> cum_buf_;
    int block_ = -2;
    int block_lo_ = 0;
};

struct AliveIndex {
    std::vector<int> order;        // paths sorted by exit index descending
    std::vector<int> alive_count;  // alive_count[i] = #paths with exit > i
};

AliveIndex build_alive_index(const TerminalTime& tau, int n_steps) {
    AliveIndex a;
    const int n = static_cast<int>(tau.index.size());
    a.order.resize(static_cast<std::size_t>(n));
    std::iota(a.order.begin(), a.order.end(), 0);
    std::stable_sort(a.order.begin(), a.order.end(), [&](int lhs, int rhs) {
        return tau.index[static_cast<std::size_t>(lhs)] > tau.index[static_cast<std::size_t>(rhs)];
    });
    std::vector<int> count(static_cast<std::size_t>(n_steps) + 2, 0);
    for (int p = 0; p < n; ++p) count[static_cast<std::size_t>(tau.index[static_cast<std::size_t>(p)])]++;
    a.alive_count.assign(static_cast<std::size_t>(n_steps) + 1, 0);
    int suffix = 0;
    for (int i = n_steps; i >= 0; --i) {
        suffix += (i + 1 <= n_steps) ? count[static_cast<std::size_t>(i + 1)] : 0;
        a.alive_count[static_cast<std::size_t>(i)] = suffix;
    }
    return a;
}

// Newton with backtracking for the implicit node equation
// F(y) = y - base - dt g(t, x, y, V). Returns false when the iteration
// budget runs out; g_out holds g at the accepted y.
bool solve_implicit(const GeneratorSpec& g, double t, std::span<const double> x,
                    const double* base, std::span<const double> vp, double dt,
                    const SolverSettings& settings, double* y, double* g_out) {
    const int k = g.k;
    double fv[8], gv[8], gp[8], probe[8], cand[8], fcand[8], jac[64], rhs[8];
    const auto eval_f = [&](const double* yy, double* ff, double* gg) {
        g.eval(t, x, {yy, static_cast<std::size_t>(k)}, vp, {gg, static_cast<std::size_t>(k)});
        double norm = 0.0;
        for (int r = 0; r < k; ++r) {
            ff[r] = yy[r] - base[r] - dt * gg[r];
            norm = std::max(norm, std::abs(ff[r]));
        }
        return norm;
    };
    for (int r = 0; r < k; ++r) y[r] = base[r];
    double fnorm = eval_f(y, fv, gv);
    for (int it = 0; it < settings.inner_max; ++it) {
        double ymag = 0.0;
        for (int r = 0; r < k; ++r) ymag = std::max(ymag, std::abs(y[r]));
        if (fnorm <= settings.inner_tol * (1.0 + ymag)) {
            for (int r = 0; r < k; ++r) g_out[r] = gv[r];
            return true;
        }
        // Finite-difference Jacobian of F.
        for (int c = 0; c < k; ++c) {
            for (int r = 0; r < k; ++r) probe[r] = y[r];
            const double h = 1e-7 * (1.0 + std::abs(y[c]));
            probe[c] += h;
            g.eval(t, x, {probe, static_cast<std::size_t>(k)}, vp,
                   {gp, static_cast<std::size_t>(k)});
            for (int r = 0; r < k; ++r)
                jac[r * k + c] = ((r == c) ? 1.0 : 0.0) - dt * (gp[r] - gv[r]) / h;
        }
        for (int r = 0; r < k; ++r) rhs[r] = fv[r];
        // Gaussian elimination with partial pivoting (k <= 8).
        int piv[8];
        for (int r = 0; r < k; ++r) piv[r] = r;
        bool singular = false;
        for (int c = 0; c < k && !singular; ++c) {
            int best = c;
            for (int r = c + 1; r < k; ++r)
                if (std::abs(jac[piv[r] * k + c]) > std::abs(jac[piv[best] * k + c])) best = r;
            std::swap(piv[c], piv[best]);
            const double d = jac[piv[c] * k + c];
            if (std::abs(d) < 1e-300) {
                singular = true;
                break;
            }
            for (int r = c + 1; r < k; ++r) {
                const double f = jac[piv[r] * k + c] / d;
                for (int cc = c; cc < k; ++cc) jac[piv[r] * k + cc] -= f * jac[piv[c] * k + cc];
                rhs[piv[r]] -= f * rhs[piv[c]];
            }
        }
        double delta[8];
        if (singular) {
            for (int r = 0; r < k; ++r) delta[r] = fv[r];  // gradient-ish fallback
        } else {
            for (int c = k - 1; c >= 0; --c) {
                double acc = rhs[piv[c]];
                for (int cc = c + 1; cc < k; ++cc) acc -= jac[piv[c] * k + cc] * delta[cc];
                delta[c] = acc / jac[piv[c] * k + c];
            }
        }
        // Backtracking on the residual norm.
        double step = settings.inner_damping;
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt) {
            for (int r = 0; r < k; ++r) cand[r] = y[r] - step * delta[r];
            const double fnew = eval_f(cand, fcand, gp);
            if (fnew < fnorm * (1.0 - 0.25 * step) || fnew <= settings.inner_tol) {
                for (int r = 0; r < k; ++r) {
                    y[r] = cand[r];
                    fv[r] = fcand[r];
                    gv[r] = gp[r];
                }
                fnorm = fnew;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    double ymag = 0.0;
    for (int r = 0; r < k; ++r) ymag = std::max(ymag, std::abs(y[r]));
    for (int r = 0; r < k; ++r) g_out[r] = gv[r];
    return fnorm <= settings.inner_tol * (1.0 + ymag);
}

struct FailFlag {
    std::atomic<long long> packed{-1};
    void record(int path, int node) {
        const long long v = (static_cast<long long>(path) << 32) | static_cast<unsigned>(node);
        long long cur = packed.load();
        while ((cur == -1 || v < cur) && !packed.compare_exchange_weak(cur, v)) {
        }
    }
    void raise_if_set(const char* what) const {
        const long long v = packed.load();
        if (v >= 0)
            throw SolverError(std::string(what) + " at path " + std::to_string(v >> 32) +
                              " node " + std::to_string(v & 0xffffffffLL));
    }
};

}  // namespace

SolutionEstimate backward_sweep(const GeneratorSpec& g, std::span<const double> xi,
                                const PathEnsemble& ens, const TerminalTime& tau,
                                std::span<const double> cum, std::span<const double> V,
                                const SolverSettings& settings) {
    const int N = ens.grid.n_steps;
    const int n = ens.n_paths;
    const int k = g.k;
    const int d = g.d;
    const int kd = k * d;
    const int q = k + kd;
    const double dt = ens.grid.dt;

    if (static_cast<int>(xi.size()) != n * k)
        throw ConfigError("backward_sweep: xi size mismatch");
    if (static_cast<int>(tau.index.size()) != n)
        throw ConfigError("backward_sweep: tau size mismatch");
    if (!V.empty() && V.size() != static_cast<std::size_t>(n) * N * kd)
        throw ConfigError("backward_sweep: V size mismatch");
    if (!cum.empty() && cum.size() != static_cast<std::size_t>(n) * (N + 1))
        throw ConfigError("backward_sweep: cum size mismatch");
    if (kd > 64 || k > 8) throw ConfigError("backward_sweep: dimensions beyond limit");

    SolutionEstimate est;
    est.k = k;
    est.d = d;
    est.n_paths = n;
    est.n_nodes = N + 1;
    est.full_history = settings.record_full;
    est.dist_to_input.assign(static_cast<std::size_t>(n), 0.0);
    if (settings.record_full) {
        est.y.resize(static_cast<std::size_t>(n) * (N + 1) * k);
        est.z.assign(static_cast<std::size_t>(n) * N * kd, 0.0);
        exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
            for (int i = 0; i <= N; ++i)
                std::memcpy(est.y.data() + est.y_idx(static_cast<int>(p), i),
                            xi.data() + p * k, sizeof(double) * k);
        });
    }

    std::vector<double> y_roll(xi.begin(), xi.end());
    est.pathwise_value.assign(xi.begin(), xi.end());
    const BasisPlan plan = plan_basis(settings.basis, ens.state_dim);
    const AliveIndex alive_index = build_alive_index(tau, N);
    std::vector<double> targets(static_cast<std::size_t>(n) * q);
    std::vector<double> root_z_samples;
    NodeCursor cursor(ens, cum);
    FailFlag inner_fail;

    for (int i = N - 1; i >= 0; --i) {
        const int n_alive = alive_index.alive_count[static_cast<std::size_t>(i)];
        if (n_alive == 0) continue;
        cursor.prepare(i);
        std::span<const int> alive{alive_index.order.data(), static_cast<std::size_t>(n_alive)};
        const double* states_base = cursor.states_at(i);
        const std::size_t stride = cursor.path_stride();
        const double t_phys = ens.t_offset + ens.grid.node(i);

        exec::for_blocks(static_cast<std::size_t>(n_alive),
                         [&](std::size_t, std::size_t lo, std::size_t hi) {
                             for (std::size_t a = lo; a < hi; ++a) {
                                 const int p = alive[a];
                                 double* t = targets.data() + a * q;
                                 const double* yp = y_roll.data() + static_cast<std::size_t>(p) * k;
                                 for (int r = 0; r < k; ++r) t[r] = yp[r];
                                 for (int c = 0; c < d; ++c) {
                                     const double db = ens.increment(p, i, c) / dt;
                                     for (int r = 0; r < k; ++r) t[k + r * d + c] = yp[r] * db;
                                 }
                             }
                         });

        NodeFit fit = fit_node(settings.basis, plan, settings.regression, states_base, stride,
                               alive, {targets.data(), static_cast<std::size_t>(n_alive) * q}, q);

        if (i == 0) root_z_samples.assign(static_cast<std::size_t>(n_alive) * kd, 0.0);

        exec::for_blocks(static_cast<std::size_t>(n_alive), [&](std::size_t, std::size_t lo,
                                                                std::size_t hi) {
            double pred[72];
            double scratch[64];
            double gv[8];
            double ycur[8];
            for (std::size_t a = lo; a < hi; ++a) {
                const int p = alive[a];
                std::span<const double> x{states_base + p * stride,
                                          static_cast<std::size_t>(ens.state_dim)};
                predict(settings.basis, plan, fit, x, {pred, static_cast<std::size_t>(q)},
                        {scratch, static_cast<std::size_t>(plan.m)});
                const double* ey = pred;
                double* ez = pred + k;
                std::span<const double> vp =
                    V.empty() ? std::span<const double>{kZeros, static_cast<std::size_t>(kd)}
                              : V.subspan((static_cast<std::size_t>(p) * N + i) * kd,
                                          static_cast<std::size_t>(kd));
                // Weighted squared distance between the fresh z and the frozen input.
                const double w = std::exp(2.0 * cursor.cum(p, i));
                double acc = 0.0;
                for (int j = 0; j < kd; ++j) {
                    const double dv = ez[j] - vp[j];
                    acc += dv * dv;
                }
                est.dist_to_input[static_cast<std::size_t>(p)] += w * acc * dt;
                if (settings.record_full)
                    std::memcpy(est.z.data() + est.z_idx(p, i), ez, sizeof(double) * kd);
                if (i == 0) std::memcpy(root_z_samples.data() + a * kd, ez, sizeof(double) * kd);

                double* yp = y_roll.data() + static_cast<std::size_t>(p) * k;
                double* pw = est.pathwise_value.data() + static_cast<std::size_t>(p) * k;
                if (!settings.implicit_y) {
                    g.eval(t_phys, x, {ey, static_cast<std::size_t>(k)}, vp,
                           {gv, static_cast<std::size_t>(k)});
                    for (int r = 0; r < k; ++r) {
                        yp[r] = ey[r] + dt * gv[r];
                        pw[r] += dt * gv[r];
                    }
                } else {
                    // Implicit step: solve F(y) = y - ey - dt g(t, x, y, V) = 0
                    // by damped Newton. The one-sided monotone bound keeps
                    // I - dt dg nonsingular along the search direction, so the
                    // iteration handles drivers far too stiff for a plain
                    // relaxation sweep.
                    const bool done = solve_implicit(g, t_phys, x, ey, vp, dt, settings,
                                                     ycur, gv);
                    if (!done) inner_fail.record(p, i);
                    for (int r = 0; r < k; ++r) {
                        yp[r] = ycur[r];
                        pw[r] += dt * gv[r];
                    }
                }
                if (settings.record_full)
                    std::memcpy(est.y.data() + est.y_idx(p, i), yp, sizeof(double) * k);
            }
        });
        inner_fail.raise_if_set("backward_sweep: inner fixed point not converged");

        if (settings.record_regressions) {
            NodeRegressionRecord rec;
            rec.node = i;
            rec.fit = std::move(fit);
            est.regressions.push_back(std::move(rec));
        }

        if (i == 0) {
            est.root_z.assign(static_cast<std::size_t>(kd), 0.0);
            for (int j = 0; j < kd; ++j)
                est.root_z[static_cast<std::size_t>(j)] =
                    exec::deterministic_sum(static_cast<std::size_t>(n_alive),
                                            [&](std::size_t a) {
                                                return root_z_samples[a * kd + j];
                                            }) /
                    static_cast<double>(n_alive);
        }
    }

    est.root_y.assign(static_cast<std::size_t>(k), 0.0);
    for (int r = 0; r < k; ++r)
        est.root_y[static_cast<std::size_t>(r)] =
            exec::deterministic_sum(static_cast<std::size_t>(n),
                                    [&](std::size_t p) { return y_roll[p * k + r]; }) /
            static_cast<double>(n);
    if (est.root_z.empty()) est.root_z.assign(static_cast<std::size_t>(kd), 0.0);
    std::reverse(est.regressions.begin(), est.regressions.end());
    return est;
}

PicardResult picard_solve(const GeneratorSpec& g, std::span<const double> xi,
                          const PathEnsemble& ens, const TerminalTime& tau,
                          std::span<const double> cum, const SolverSettings& settings) {
    if (!ens.dense() && g.depends_on_z)
        throw ConfigError("picard_solve: checkpointed runs require a z-independent driver");
    if (g.depends_on_z && !settings.record_full)
        throw ConfigError("picard_solve: z-dependent drivers need recorded z histories");

    PicardResult out;
    std::vector<double> V;  // empty = zero
    int rising = 0;
    for (int m = 1; m <= settings.picard_max; ++m) {
        SolutionEstimate est = backward_sweep(g, xi, ens, tau, cum, V, settings);
        const double dist =
            exec::pairwise_sum(est.dist_to_input) / static_cast<double>(ens.n_paths);
        out.contributions.push_back(est.dist_to_input);
        out.distances.push_back(dist);
        out.sweeps = m;
        const bool last_needed = dist < settings.picard_tol;
        if (!last_needed && !g.depends_on_z) {
            // The map is constant in V, so the first image is already the
            // fixed point; the next distance is exactly zero.
            out.distances.push_back(0.0);
            out.contributions.emplace_back(static_cast<std::size_t>(ens.n_paths), 0.0);
            out.estimate = std::move(est);
            out.converged = true;
            return out;
        }
        if (out.distances.size() >= 2 && dist > out.distances[out.distances.size() - 2]) {
            if (++rising >= 3)
                throw SolverError(
                    "picard_solve: distances increased for 3 consecutive sweeps; the "
                    "declared rho > 1 contraction premise is implausible on this data");
        } else {
            rising = 0;
        }
        if (last_needed) {
            out.estimate = std::move(est);
            out.converged = true;
            return out;
        }
        if (m == settings.picard_max) {
            out.estimate = std::move(est);
            return out;
        }
        V = est.z;
    }
    return out;
}

ContractionReport contraction_report(const PicardResult& result, int n_boot,
                                     std::uint64_t seed) {
    ContractionReport report;
    const std::size_t m = result.distances.size();
    if (m < 2) return report;
    for (std::size_t i = 0; i + 1 < m; ++i)
        report.ratios.push_back(result.distances[i] > 0.0
                                    ? result.distances[i + 1] / result.distances[i]
                                    : 0.0);
    report.se.assign(report.ratios.size(), 0.0);
    if (n_boot <= 1 || result.contributions.empty()) return report;
    const std::size_t n = result.contributions.front().size();
    std::vector<std::vector<double>> boot(report.ratios.size());
    for (auto& b : boot) b.reserve(static_cast<std::size_t>(n_boot));
    std::vector<double> sums(m);
    for (int b = 0; b < n_boot; ++b) {
        const std::uint64_t bseed =
            rng::derive_stream(seed, rng::kStreamBootstrap, static_cast<std::uint64_t>(b));
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double u = rng::uniform01(bseed, j, 0, 0);
            const std::size_t idx =
                std::min(n - 1, static_cast<std::size_t>(u * static_cast<double>(n)));
            for (std::size_t it = 0; it < m; ++it) sums[it] += result.contributions[it][idx];
        }
        for (std::size_t it = 0; it + 1 < m; ++it)
            if (sums[it] > 0.0) boot[it].push_back(sums[it + 1] / sums[it]);
    }
    for (std::size_t it = 0; it < boot.size(); ++it) {
        const auto ms = exec::mean_se(boot[it]);
        report.se[it] = ms.se * std::sqrt(static_cast<double>(boot[it].size()));
    }
    return report;
}

ResidualReport residual_check(const SolutionEstimate& est, const GeneratorSpec& g,
                              const PathEnsemble& ens, const TerminalTime& tau,
                              const SolverSettings& settings) {
    if (!est.full_history) throw ConfigError("residual_check: full history required");
    if (!ens.dense()) throw ConfigError("residual_check: dense states required");
    const int N = ens.grid.n_steps;
    const int n = ens.n_paths;
    const int k = g.k;
    const int d = g.d;
    const double dt = ens.grid.dt;
    const BasisPlan plan = plan_basis(settings.basis, ens.state_dim);
    const AliveIndex alive_index = build_alive_index(tau, N);

    ResidualReport report;
    std::vector<double> residuals(static_cast<std::size_t>(n) * k);
    std::vector<double> norms(static_cast<std::size_t>(n));
    for (int i = 0; i < N; ++i) {
        const int n_alive = alive_index.alive_count[static_cast<std::size_t>(i)];
        if (n_alive == 0) continue;
        std::span<const int> alive{alive_index.order.data(), static_cast<std::size_t>(n_alive)};
        const double t_phys = ens.t_offset + ens.grid.node(i);
        std::vector<double> g_abs(static_cast<std::size_t>(n_alive));
        exec::for_blocks(static_cast<std::size_t>(n_alive), [&](std::size_t, std::size_t lo,
                                                                std::size_t hi) {
            double gv[8];
            for (std::size_t a = lo; a < hi; ++a) {
                const int p = alive[a];
                const auto x = ens.state(p, i);
                const auto yi = est.y_at(p, i);
                const auto zi = est.z_at(p, i);
                g.eval(t_phys, x, yi, zi, {gv, static_cast<std::size_t>(k)});
                double gnorm = 0.0, rnorm = 0.0;
                for (int r = 0; r < k; ++r) {
                    double zdb = 0.0;
                    for (int c = 0; c < d; ++c) zdb += zi[r * d + c] * ens.increment(p, i, c);
                    const double res =
                        yi[r] - est.y_at(p, i + 1)[r] - dt * gv[r] + zdb;
                    residuals[a * k + r] = res;
                    rnorm += res * res;
                    gnorm += gv[r] * gv[r];
                }
                norms[a] = std::sqrt(rnorm);
                g_abs[a] = std::sqrt(gnorm);
            }
        });
        ResidualRow row;
        row.node = i;
        double mean_sq = 0.0;
        double se_sq = 0.0;
        // Component means with pooled standard error.
        for (int r = 0; r < k; ++r) {
            std::vector<double> comp(static_cast<std::size_t>(n_alive));
            for (int a = 0; a < n_alive; ++a) comp[static_cast<std::size_t>(a)] = residuals[static_cast<std::size_t>(a) * k + r];
            const auto ms = exec::mean_se(comp);
            mean_sq += ms.mean * ms.mean;
            se_sq += ms.se * ms.se;
        }
        row.mean_norm = std::sqrt(mean_sq);
        row.se = std::sqrt(se_sq);

        // Conditional mean via basis regression of the residual components,
        // summarized by the ensemble RMS of the fitted values (a max would be
        // dominated by polynomial extrapolation at tail states).
        NodeFit fit = fit_node(settings.basis, plan, settings.regression,
                               ens.states.data() + static_cast<std::size_t>(i) * ens.state_dim,
                               static_cast<std::size_t>(ens.grid.n_nodes()) * ens.state_dim,
                               alive, {residuals.data(), static_cast<std::size_t>(n_alive) * k},
                               k);
        const double cond_ms =
            exec::deterministic_sum(static_cast<std::size_t>(n_alive), [&](std::size_t a) {
                double pred[8];
                double scratch[64];
                predict(settings.basis, plan, fit, ens.state(alive[a], i),
                        {pred, static_cast<std::size_t>(k)},
                        {scratch, static_cast<std::size_t>(plan.m)});
                double nrm = 0.0;
                for (int r = 0; r < k; ++r) nrm += pred[r] * pred[r];
                return nrm;
            }) / static_cast<double>(n_alive);
        row.cond_rms = std::sqrt(cond_ms);

        const double g_scale = exec::pairwise_sum(g_abs) / static_cast<double>(n_alive);
        const auto nm = exec::mean_se(std::span<const double>{norms.data(),
                                                              static_cast<std::size_t>(n_alive)});
        const double resid_sd = nm.se * std::sqrt(static_cast<double>(n_alive));
        const double cond_floor =
            resid_sd * std::sqrt(static_cast<double>(plan.m) / static_cast<double>(n_alive));
        row.allowance = 4.0 * (row.se + cond_floor) + 4.0 * dt * dt * (1.0 + g_scale);
        row.flagged = row.mean_norm > 4.0 * row.se + 4.0 * dt * dt * (1.0 + g_scale) ||
                      row.cond_rms > row.allowance;
        report.any_flagged = report.any_flagged || row.flagged;
        report.rows.push_back(row);
    }
    return report;
}

AssumptionReport validate_assumptions(const GeneratorSpec& g, const PathEnsemble& ens,
                                      int sample_budget, std::uint64_t seed, double y_range,
                                      double z_range) {
    if (!ens.dense()) throw ConfigError("validate_assumptions: dense states required");
    const int k = g.k;
    const int kd = g.k * g.d;
    AssumptionReport report;
    report.samples = sample_budget;
    const std::uint64_t sseed = rng::derive_stream(seed, rng::kStreamSampler, 0);

    const std::size_t nb = exec::block_count(static_cast<std::size_t>(sample_budget));
    std::vector<double> h4(nb, -1e300), h5(nb, -1e300), ab(nb, -1e300);
    const bool check_driver_bound = static_cast<bool>(g.f_bound);
    exec::for_blocks(static_cast<std::size_t>(sample_budget), [&](std::size_t blk, std::size_t lo,
                                                                  std::size_t hi) {
        double y1[8], y2[8], z0[64], z1[64], z2[64], g1[8], g2[8];
        double worst_h4 = -1e300, worst_h5 = -1e300, worst_ab = -1e300;
        for (std::size_t s = lo; s < hi; ++s) {
            std::uint32_t w = 0;
            const auto u = [&]() { return rng::uniform01(sseed, s, 0, w++); };
            const int p = std::min(ens.n_paths - 1,
                                   static_cast<int>(u() * ens.n_paths));
            const int i = std::min(ens.grid.n_steps,
                                   static_cast<int>(u() * ens.grid.n_nodes()));
            const double t = ens.t_offset + ens.grid.node(i);
            const auto x = ens.state(p, i);
            for (int r = 0; r < k; ++r) {
                y1[r] = y_range * (2.0 * u() - 1.0);
                y2[r] = y_range * (2.0 * u() - 1.0);
            }
            for (int j = 0; j < kd; ++j) {
                z0[j] = z_range * (2.0 * u() - 1.0);
                z1[j] = z_range * (2.0 * u() - 1.0);
                z2[j] = z_range * (2.0 * u() - 1.0);
            }
            const double mu = g.coeff.mu_at(t, x);
            const double nu = g.coeff.nu_at(t, x);

            // One-sided monotonicity in y at frozen z.
            g.eval(t, x, {y1, static_cast<std::size_t>(k)}, {z0, static_cast<std::size_t>(kd)},
                   {g1, static_cast<std::size_t>(k)});
            g.eval(t, x, {y2, static_cast<std::size_t>(k)}, {z0, static_cast<std::size_t>(kd)},
                   {g2, static_cast<std::size_t>(k)});
            double inner = 0.0, dy_sq = 0.0;
            for (int r = 0; r < k; ++r) {
                inner += (y1[r] - y2[r]) * (g1[r] - g2[r]);
                dy_sq += (y1[r] - y2[r]) * (y1[r] - y2[r]);
            }
            const double h4_scale = 1.0 + std::abs(inner) + mu * dy_sq;
            worst_h4 = std::max(worst_h4, (inner - mu * dy_sq) / h4_scale);

            // Lipschitz continuity in z at frozen y.
            g.eval(t, x, {y1, static_cast<std::size_t>(k)}, {z1, static_cast<std::size_t>(kd)},
                   {g1, static_cast<std::size_t>(k)});
            g.eval(t, x, {y1, static_cast<std::size_t>(k)}, {z2, static_cast<std::size_t>(kd)},
                   {g2, static_cast<std::size_t>(k)});
            double dg = 0.0, dz = 0.0;
            for (int r = 0; r < k; ++r) dg += (g1[r] - g2[r]) * (g1[r] - g2[r]);
            for (int j = 0; j < kd; ++j) dz += (z1[j] - z2[j]) * (z1[j] - z2[j]);
            dg = std::sqrt(dg);
            dz = std::sqrt(dz);
            const double h5_scale = 1.0 + dg + nu * dz;
            worst_h5 = std::max(worst_h5, (dg - nu * dz) / h5_scale);

            if (check_driver_bound) {
                // <y/|y|, g(t,y,z)> <= f + mu |y| + nu |z|.
                g.eval(t, x, {y1, static_cast<std::size_t>(k)},
                       {z1, static_cast<std::size_t>(kd)}, {g1, static_cast<std::size_t>(k)});
                double ynorm = 0.0, zn = 0.0, dot = 0.0;
                for (int r = 0; r < k; ++r) ynorm += y1[r] * y1[r];
                for (int j = 0; j < kd; ++j) zn += z1[j] * z1[j];
                ynorm = std::sqrt(ynorm);
                zn = std::sqrt(zn);
                if (ynorm > 0.0) {
                    for (int r = 0; r < k; ++r) dot += y1[r] / ynorm * g1[r];
                    const double bound = g.f_bound(t, x) + mu * ynorm + nu * zn;
                    worst_ab = std::max(worst_ab, (dot - bound) / (1.0 + std::abs(dot) + bound));
                }
            }
        }
        h4[blk] = worst_h4;
        h5[blk] = worst_h5;
        ab[blk] = worst_ab;
    });
    for (std::size_t b = 0; b < nb; ++b) {
        report.monotonicity_violation = std::max(report.monotonicity_violation, h4[b]);
        report.lipschitz_violation = std::max(report.lipschitz_violation, h5[b]);
        report.driver_bound_violation = std::max(report.driver_bound_violation, ab[b]);
    }
    report.monotonicity_violation = std::max(0.0, report.monotonicity_violation);
    report.lipschitz_violation = std::max(0.0, report.lipschitz_violation);
    report.driver_bound_violation = std::max(0.0, report.driver_bound_violation);
    report.monotonicity_pass = report.monotonicity_violation <= report.tolerance;
    report.lipschitz_pass = report.lipschitz_violation <= report.tolerance;
    report.driver_bound_pass =
        !check_driver_bound || report.driver_bound_violation <= report.tolerance;
    return report;
}

}  // namespace wbsde
