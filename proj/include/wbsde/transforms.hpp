#pragma once

#include "wbsde/generator.hpp"

#include <span>
#include <utility>
#include <vector>

namespace wbsde {

/// Radial clamp onto the ball of radius r: x when |x| <= r, else x r/|x|.
void clamp_q(std::span<const double> x, double r, std::span<double> out);
std::vector<double> clamp_q(std::span<const double> x, double r);

/// Level-dependent cutoff: alpha on [0, r alpha], linear down to 0 at
/// (r+1) alpha, zero beyond. Continuous and 1-Lipschitz in u.
double truncation_theta(double t, double u, double r, double alpha_t);

/// Elementary gap |e^{lx} - 1| <= l (e^{|x|} + |x| - 1) for l in [0,1].
std::pair<double, double> lemma38_gap(double lambda, double x);

/// Smooths the driver in y by convolution with the unit-ball bump kernel
/// scaled by 1/n, evaluated with tensor Gauss-Legendre quadrature restricted
/// to the ball (n_quad nodes per axis, weights renormalized to unit mass).
GeneratorSpec mollify_generator(const GeneratorSpec& g, int n, int n_quad = 48);

/// Level truncation of the driver: scales the centered part g(t,y) - g(t,0)
/// by theta(t,|y|) n e^{-t} / (psi_bar_{r+1}(t) v n e^{-t} alpha_t). Uses the
/// declared growth envelope when present, otherwise a 64-point deterministic
/// sample of |g(t,y,0) - g(t,0,0)| over |y| <= (r+1) alpha_t. Requires a
/// deterministic alpha rule. enforce_alpha_cap rescales alpha below
/// e^{-beta int mu} when the coefficient rate is a deterministic constant.
GeneratorSpec truncated_generator(const GeneratorSpec& g, double r, int n,
                                  bool enforce_alpha_cap = true, double beta = 1.0);

// Quadrature rule of the mollifier (exposed for validation).
struct BallQuadrature {
    std::vector<double> nodes;   // (count, k)
    std::vector<double> weight;  // normalized: sum = 1
    int k = 1;
};
BallQuadrature bump_quadrature(int k, int n_quad);

}  // namespace wbsde
