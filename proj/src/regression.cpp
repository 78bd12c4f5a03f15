#include "wbsde/regression.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace wbsde {

namespace {

void enumerate_monomials(int state_dim, int degree, std::vector<int>& out) {
    // Graded enumeration of multi-indices with |alpha| <= degree.
    std::vector<int> cur(static_cast<std::size_t>(state_dim), 0);
    for (int total = 0; total <= degree; ++total) {
        // Generate all compositions of `total` into state_dim parts.
        std::fill(cur.begin(), cur.end(), 0);
        cur[0] = total;
        while (true) {
            out.insert(out.end(), cur.begin(), cur.end());
            // Next composition in colex order.
            int i = 0;
            while (i < state_dim - 1 && cur[static_cast<std::size_t>(i)] == 0) ++i;
            if (i == state_dim - 1) break;
            const int v = cur[static_cast<std::size_t>(i)];
            cur[static_cast<std::size_t>(i)] = 0;
            cur[0] = v - 1;
            cur[static_cast<std::size_t>(i + 1)] += 1;
        }
    }
}

}  // namespace

int RegressionBasis::size(int state_dim) const {
    if (family == Family::PiecewiseConstant)
        return static_cast<int>(bin_edges.size()) + 1;
    std::vector<int> e;
    enumerate_monomials(state_dim, degree, e);
    return static_cast<int>(e.size()) / state_dim;
}

BasisPlan plan_basis(const RegressionBasis& basis, int state_dim) {
    BasisPlan plan;
    plan.state_dim = state_dim;
    if (basis.family == RegressionBasis::Family::PiecewiseConstant) {
        if (state_dim != 1)
            throw ConfigError("piecewise-constant basis requires a 1-d state");
        if (basis.bin_edges.empty())
            throw ConfigError("piecewise-constant basis requires bin edges");
        if (!std::is_sorted(basis.bin_edges.begin(), basis.bin_edges.end()))
            throw ConfigError("piecewise-constant bin edges must be ascending");
        plan.m = static_cast<int>(basis.bin_edges.size()) + 1;
        return plan;
    }
    if (basis.degree < 0 || basis.degree > 15)
        throw ConfigError("polynomial degree must lie in [0, 15]");
    if (state_dim > 8) throw ConfigError("polynomial basis supports state_dim <= 8");
    enumerate_monomials(state_dim, basis.degree, plan.exponents);
    plan.m = static_cast<int>(plan.exponents.size()) / state_dim;
    if (plan.m > 64) throw ConfigError("basis size exceeds supported limit (64)");
    return plan;
}

void eval_basis(const RegressionBasis& basis, const BasisPlan& plan,
                std::span<const double> mean, std::span<const double> inv_scale,
                std::span<const double> x, std::span<double> out) {
    if (basis.family == RegressionBasis::Family::PiecewiseConstant) {
        const auto it = std::upper_bound(basis.bin_edges.begin(), basis.bin_edges.end(), x[0]);
        const int bin = static_cast<int>(it - basis.bin_edges.begin());
        for (int j = 0; j < plan.m; ++j) out[j] = (j == bin) ? 1.0 : 0.0;
        return;
    }
    double scaled[8];
    double powers[8][16];  // powers[c][e] = scaled_c^e
    const int l = plan.state_dim;
    for (int c = 0; c < l; ++c) {
        scaled[c] = (x[c] - mean[c]) * inv_scale[c];
        powers[c][0] = 1.0;
        for (int e = 1; e <= basis.degree; ++e) powers[c][e] = powers[c][e - 1] * scaled[c];
    }
    for (int j = 0; j < plan.m; ++j) {
        double v = 1.0;
        for (int c = 0; c < l; ++c)
            v *= powers[c][plan.exponents[static_cast<std::size_t>(j) * l + c]];
        out[j] = v;
    }
}

NodeFit fit_node(const RegressionBasis& basis, const BasisPlan& plan,
                 const RegressionControls& controls, const double* states_base,
                 std::size_t path_stride, std::span<const int> alive,
                 std::span<const double> targets, int q) {
    const int m = plan.m;
    const int l = plan.state_dim;
    const std::size_t n = alive.size();
    NodeFit fit;
    fit.m = m;
    fit.q = q;
    fit.n_alive = static_cast<int>(n);
    fit.mean.assign(static_cast<std::size_t>(l), 0.0);
    fit.inv_scale.assign(static_cast<std::size_t>(l), 1.0);
    if (n == 0) throw RegressionError("fit_node: no alive paths");

    if (basis.family == RegressionBasis::Family::Polynomial) {
        for (int c = 0; c < l; ++c) {
            const double mc = exec::deterministic_sum(n, [&](std::size_t a) {
                                  return states_base[alive[a] * path_stride + c];
                              }) /
                              static_cast<double>(n);
            const double var = exec::deterministic_sum(n, [&](std::size_t a) {
                                   const double d =
                                       states_base[alive[a] * path_stride + c] - mc;
                                   return d * d;
                               }) /
                               static_cast<double>(n);
            fit.mean[static_cast<std::size_t>(c)] = mc;
            const double sd = std::sqrt(var);
            fit.inv_scale[static_cast<std::size_t>(c)] =
                sd > controls.min_scale ? 1.0 / sd : 1.0;
        }
    }

    // Block-partial Gram/moment assembly, combined in fixed block order.
    const int tri = m * (m + 1) / 2;
    const int per_block = tri + m * q;
    const std::size_t nb = exec::block_count(n);
    std::vector<double> partial(nb * static_cast<std::size_t>(per_block), 0.0);
    exec::for_blocks(n, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
        double* G = partial.data() + blk * per_block;
        double* R = G + tri;
        double b[64];
        for (std::size_t a = lo; a < hi; ++a) {
            const double* x = states_base + alive[a] * path_stride;
            eval_basis(basis, plan, fit.mean, fit.inv_scale,
                       {x, static_cast<std::size_t>(l)}, {b, static_cast<std::size_t>(m)});
            int t = 0;
            for (int r = 0; r < m; ++r)
                for (int c = 0; c <= r; ++c) G[t++] += b[r] * b[c];
            const double* y = targets.data() + a * q;
            for (int r = 0; r < m; ++r)
                for (int j = 0; j < q; ++j) R[r * q + j] += b[r] * y[j];
        }
    });

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, q);
    for (std::size_t blk = 0; blk < nb; ++blk) {
        const double* Gp = partial.data() + blk * per_block;
        const double* Rp = Gp + tri;
        int t = 0;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c <= r; ++c) G(r, c) += Gp[t++];
        for (int r = 0; r < m; ++r)
            for (int j = 0; j < q; ++j) R(r, j) += Rp[r * q + j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c <= r; ++c) {
            G(r, c) *= inv_n;
            G(c, r) = G(r, c);
        }
    }
    R *= inv_n;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double ev_max = es.eigenvalues().maxCoeff();
    const double ev_min = es.eigenvalues().minCoeff();
    if (!(ev_max > 0.0))
        throw RegressionError("fit_node: degenerate Gram matrix (no signal)");
    double lambda = controls.ridge;
    const double thr = controls.cond_threshold;
    if (ev_min + lambda <= 0.0 || (ev_max + lambda) / (ev_min + lambda) > thr) {
        const double needed = (ev_max - thr * ev_min) / (thr - 1.0);
        lambda = std::max(lambda, needed * (1.0 + 1e-3));
    }
    fit.ridge_used = lambda;
    fit.cond = (ev_max + lambda) / (ev_min + lambda);
    Eigen::MatrixXd Greg = G + lambda * Eigen::MatrixXd::Identity(m, m);
    Eigen::LLT<Eigen::MatrixXd> llt(Greg);
    if (llt.info() != Eigen::Success)
        throw RegressionError("fit_node: Cholesky failed beyond ridge rescue (cond " +
                              std::to_string(fit.cond) + ")");
    Eigen::MatrixXd C = llt.solve(R);
    fit.coeff.resize(static_cast<std::size_t>(m) * q);
    for (int r = 0; r < m; ++r)
        for (int j = 0; j < q; ++j) fit.coeff[static_cast<std::size_t>(r) * q + j] = C(r, j);
    return fit;
}

void predict(const RegressionBasis& basis, const BasisPlan& plan, const NodeFit& fit,
             std::span<const double> x, std::span<double> out, std::span<double> scratch) {
    eval_basis(basis, plan, fit.mean, fit.inv_scale, x, scratch);
    for (int j = 0; j < fit.q; ++j) {
        double acc = 0.0;
        for (int r = 0; r < fit.m; ++r)
            acc += scratch[static_cast<std::size_t>(r)] * fit.coeff[static_cast<std::size_t>(r) * fit.q + j];
        out[j] = acc;
    }
}

}  // namespace wbsde
