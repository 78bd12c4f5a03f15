#pragma once

#include <span>
#include <vector>

namespace wbsde {

/// Basis family for the Markov-state projection realizing conditional
/// expectations. Polynomial bases are centered/scaled per node.
struct RegressionBasis {
    enum class Family { Polynomial, PiecewiseConstant };
    Family family = Family::Polynomial;
    int degree = 3;                 // total degree (Polynomial)
    std::vector<double> bin_edges;  // ascending (PiecewiseConstant, 1-d state)

    int size(int state_dim) const;
};

struct RegressionControls {
    double ridge = 0.0;             // baseline Tikhonov level
    double cond_threshold = 1e12;   // engage ridge above this Gram condition
    double min_scale = 1e-12;       // coordinate scale floor
};

/// Exponent table for a polynomial basis, fixed per (family, state_dim).
struct BasisPlan {
    int m = 0;
    int state_dim = 1;
    std::vector<int> exponents;  // m x state_dim, graded order (Polynomial)
};

BasisPlan plan_basis(const RegressionBasis& basis, int state_dim);

/// One fitted node: scaling stats, coefficients for q stacked targets, and
/// Gram diagnostics.
struct NodeFit {
    int m = 0;
    int q = 0;
    int n_alive = 0;
    double cond = 0.0;
    double ridge_used = 0.0;
    std::vector<double> mean;       // per coord
    std::vector<double> inv_scale;  // per coord
    std::vector<double> coeff;      // m x q, basis-major
};

void eval_basis(const RegressionBasis& basis, const BasisPlan& plan,
                std::span<const double> mean, std::span<const double> inv_scale,
                std::span<const double> x, std::span<double> out);

/// Least-squares fit of q targets over the alive paths at one node.
/// states_base + path * path_stride points at the state of each path.
/// targets is (alive_order, q). Deterministic for any worker count.
NodeFit fit_node(const RegressionBasis& basis, const BasisPlan& plan,
                 const RegressionControls& controls, const double* states_base,
                 std::size_t path_stride, std::span<const int> alive,
                 std::span<const double> targets, int q);

/// Evaluates all q fitted targets at state x.
void predict(const RegressionBasis& basis, const BasisPlan& plan, const NodeFit& fit,
             std::span<const double> x, std::span<double> out, std::span<double> scratch);

}  // namespace wbsde
