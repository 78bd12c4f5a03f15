#include "wbsde/oracle.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/rng.hpp"

#include <cmath>

namespace wbsde {

namespace {

// Discrete weights of the conditional-expectation formula on [from, N):
// exp(sum mu dt + sum nu dB - 1/2 sum nu^2 dt).
double tail_exponent(const LinearCoefficients& c, const PathEnsemble& ens, int from,
                     std::span<const double> dB) {
    const double dt = ens.grid.dt;
    double acc = 0.0;
    for (int j = from; j < ens.grid.n_steps; ++j) {
        const double nu = c.nu[static_cast<std::size_t>(j)];
        acc += c.mu[static_cast<std::size_t>(j)] * dt + nu * dB[static_cast<std::size_t>(j)] -
               0.5 * nu * nu * dt;
    }
    return acc;
}

void collect_increments(const PathEnsemble& ens, int path, std::vector<double>& dB) {
    dB.resize(static_cast<std::size_t>(ens.grid.n_steps));
    for (int i = 0; i < ens.grid.n_steps; ++i)
        dB[static_cast<std::size_t>(i)] = ens.increment(path, i, 0);
}

}  // namespace

LinearCoefficients LinearCoefficients::constant(const TimeGrid& grid, double mu0, double nu0) {
    LinearCoefficients c;
    c.mu.assign(static_cast<std::size_t>(grid.n_nodes()), mu0);
    c.nu.assign(static_cast<std::size_t>(grid.n_nodes()), nu0);
    return c;
}

LinearTerminal LinearTerminal::deterministic(double v) {
    LinearTerminal t;
    t.kind = Kind::DeterministicValue;
    t.value = v;
    return t;
}

LinearTerminal LinearTerminal::exp_functional() {
    LinearTerminal t;
    t.kind = Kind::ExpFunctional;
    return t;
}

LinearTerminal LinearTerminal::generic(
    std::function<double(std::span<const double>, const TimeGrid&)> fn) {
    LinearTerminal t;
    t.kind = Kind::Generic;
    t.eval = std::move(fn);
    return t;
}

std::vector<double> linear_terminal_values(const LinearCoefficients& coeff,
                                           const LinearTerminal& xi,
                                           const PathEnsemble& ens) {
    std::vector<double> out(static_cast<std::size_t>(ens.n_paths), xi.value);
    if (xi.kind == LinearTerminal::Kind::DeterministicValue) return out;
    const double dt = ens.grid.dt;
    exec::for_each_index(static_cast<std::size_t>(ens.n_paths), [&](std::size_t p) {
        std::vector<double> dB;
        collect_increments(ens, static_cast<int>(p), dB);
        if (xi.kind == LinearTerminal::Kind::ExpFunctional) {
            double acc = 0.0;
            for (int j = 0; j < ens.grid.n_steps; ++j) {
                const double b = coeff.nu[static_cast<std::size_t>(j)];
                acc += b * dB[static_cast<std::size_t>(j)] - 1.5 * b * b * dt;
            }
            out[p] = std::exp(acc);
        } else {
            out[p] = xi.eval(dB, ens.grid);
        }
    });
    return out;
}

LinearBsdeResult linear_bsde_pathwise(const LinearCoefficients& coeff,
                                      const LinearTerminal& xi, const PathEnsemble& ens,
                                      int inner_budget) {
    const int N = ens.grid.n_steps;
    const int n = ens.n_paths;
    const double dt = ens.grid.dt;
    if (static_cast<int>(coeff.mu.size()) < N || static_cast<int>(coeff.nu.size()) < N)
        throw ConfigError("linear_bsde_pathwise: coefficient arrays shorter than the grid");

    LinearBsdeResult res;
    res.y.assign(static_cast<std::size_t>(n) * (N + 1), 0.0);
    res.z.assign(static_cast<std::size_t>(n) * N, 0.0);

    if (xi.kind == LinearTerminal::Kind::DeterministicValue) {
        // y_t = c exp(int_t^T mu): the martingale factor has unit mean.
        std::vector<double> growth(static_cast<std::size_t>(N) + 1, 0.0);
        for (int i = N - 1; i >= 0; --i)
            growth[static_cast<std::size_t>(i)] =
                growth[static_cast<std::size_t>(i) + 1] + coeff.mu[static_cast<std::size_t>(i)] * dt;
        exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
            for (int i = 0; i <= N; ++i)
                res.y[p * (N + 1) + i] = xi.value * std::exp(growth[static_cast<std::size_t>(i)]);
        });
        res.exact = true;
        return res;
    }

    if (xi.kind == LinearTerminal::Kind::ExpFunctional) {
        // mu must vanish; y_t = exp(int_0^t b dB - 3/2 int_0^t b^2).
        for (int i = 0; i < N; ++i)
            if (coeff.mu[static_cast<std::size_t>(i)] != 0.0)
                throw ConfigError("linear_bsde_pathwise: exp-functional terminal needs mu = 0");
        exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
            double acc = 0.0;
            res.y[p * (N + 1)] = 1.0;
            for (int i = 0; i < N; ++i) {
                const double b = coeff.nu[static_cast<std::size_t>(i)];
                const double db = ens.increment(static_cast<int>(p), i, 0);
                // z_t = b y_t from the exponential's Ito differential.
                res.z[p * static_cast<std::size_t>(N) + i] = b * std::exp(acc);
                acc += b * db - 1.5 * b * b * dt;
                res.y[p * (N + 1) + i + 1] = std::exp(acc);
            }
        });
        res.exact = true;
        return res;
    }

    if (inner_budget <= 0)
        throw ConfigError("linear_bsde_pathwise: non-explicit terminal needs inner budget > 0");
    // Nested Monte Carlo with antithetic pairing: continue each path from
    // (i, history) with fresh increments and average the weighted terminal.
    std::vector<double> se_acc(static_cast<std::size_t>(n), 0.0);
    exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
        std::vector<double> dB, hybrid;
        collect_increments(ens, static_cast<int>(p), dB);
        hybrid.resize(dB.size());
        double se_sum = 0.0;
        res.y[p * (N + 1) + N] = xi.eval(dB, ens.grid);
        for (int i = 0; i < N; ++i) {
            const std::uint64_t sub_seed = rng::derive_stream(
                ens.seed, rng::kStreamInner, p, static_cast<std::uint64_t>(i));
            double mean = 0.0, m2 = 0.0;
            int count = 0;
            for (int s = 0; s < inner_budget; ++s) {
                for (int j = 0; j < i; ++j) hybrid[static_cast<std::size_t>(j)] = dB[static_cast<std::size_t>(j)];
                const double sign = (s % 2 == 0) ? 1.0 : -1.0;
                for (int j = i; j < N; ++j)
                    hybrid[static_cast<std::size_t>(j)] =
                        sign * std::sqrt(dt) *
                        rng::normal(sub_seed, static_cast<std::uint64_t>(s / 2),
                                    static_cast<std::uint32_t>(j), 0);
                const double xival = xi.eval(hybrid, ens.grid);
                const double w = std::exp(tail_exponent(coeff, ens, i, hybrid));
                const double sample = xival * w;
                ++count;
                const double delta = sample - mean;
                mean += delta / count;
                m2 += delta * (sample - mean);
            }
            res.y[p * (N + 1) + i] = mean;
            se_sum += std::sqrt(m2 / (count - 1.0) / count);
        }
        se_acc[p] = se_sum / N;
    });
    res.inner_se = exec::pairwise_sum(se_acc) / static_cast<double>(n);
    res.exact = false;
    return res;
}

WeightConditionReport weight_condition_check(const LinearCoefficients& coeff,
                                             const LinearTerminal& xi,
                                             const PathEnsemble& ens, double beta_tilde,
                                             double rho_tilde) {
    const std::vector<double> values = linear_terminal_values(coeff, xi, ens);
    const double dt = ens.grid.dt;
    double fixed = 0.0;
    for (int j = 0; j < ens.grid.n_steps; ++j)
        fixed += 2.0 * beta_tilde * coeff.mu[static_cast<std::size_t>(j)] * dt +
                 rho_tilde * coeff.nu[static_cast<std::size_t>(j)] *
                     coeff.nu[static_cast<std::size_t>(j)] * dt;
    std::vector<double> weights(values.size());
    exec::for_each_index(values.size(), [&](std::size_t p) {
        weights[p] = values[p] * values[p] * std::exp(fixed);
    });
    WeightConditionReport report;
    const auto ms = exec::mean_se(weights);
    report.estimate = ms.mean;
    report.se = ms.se;
    double max_w = 0.0;
    for (double w : weights) max_w = std::max(max_w, w);
    const double total = ms.mean * static_cast<double>(weights.size());
    report.max_share = total > 0.0 ? max_w / total : 0.0;
    report.heavy_tail_warning = report.max_share > 0.5;
    return report;
}

std::vector<double> sup_moment_diagnostic(const LinearCoefficients& coeff,
                                          const PathEnsemble& ens, int doublings) {
    // Per-path sup of |y_t|^2 e^{int nu^2} for the counterexample process
    // y_t = exp(int b dB - 3/2 int b^2).
    const int N = ens.grid.n_steps;
    const double dt = ens.grid.dt;
    std::vector<double> sup(static_cast<std::size_t>(ens.n_paths));
    exec::for_each_index(sup.size(), [&](std::size_t p) {
        double acc = 0.0, nu_sq = 0.0, best = 1.0;
        for (int i = 0; i < N; ++i) {
            const double b = coeff.nu[static_cast<std::size_t>(i)];
            acc += b * ens.increment(static_cast<int>(p), i, 0) - 1.5 * b * b * dt;
            nu_sq += b * b * dt;
            best = std::max(best, std::exp(2.0 * acc + nu_sq));
        }
        sup[p] = best;
    });
    std::vector<double> out;
    for (int k = doublings; k >= 0; --k) {
        const std::size_t count = sup.size() >> k;
        if (count == 0) continue;
        out.push_back(exec::pairwise_sum({sup.data(), count}) / static_cast<double>(count));
    }
    return out;
}

}  // namespace wbsde
