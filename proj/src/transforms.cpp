#include "wbsde/transforms.hpp"

#include "wbsde/errors.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace wbsde {

namespace {

double norm_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(static_cast<std::size_t>(n));
    w.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = xi;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * xi * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (xi * p1 - p0) / (xi * xi - 1.0);
            const double dx = p1 / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = xi;
        w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
}

double bump(double r_sq) {
    return r_sq < 1.0 ? std::exp(-1.0 / (1.0 - r_sq)) : 0.0;
}

std::mutex g_quad_mutex;
std::map<std::pair<int, int>, std::shared_ptr<const BallQuadrature>> g_quad_cache;

std::shared_ptr<const BallQuadrature> cached_bump_quadrature(int k, int n_quad) {
    std::lock_guard<std::mutex> lock(g_quad_mutex);
    auto& slot = g_quad_cache[{k, n_quad}];
    if (!slot) slot = std::make_shared<BallQuadrature>(bump_quadrature(k, n_quad));
    return slot;
}

}  // namespace

void clamp_q(std::span<const double> x, double r, std::span<double> out) {
    if (r < 0.0) throw ConfigError("clamp_q: r must be >= 0");
    const double nrm = norm_of(x);
    const double scale = nrm > r ? r / nrm : 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * scale;
}

std::vector<double> clamp_q(std::span<const double> x, double r) {
    std::vector<double> out(x.size());
    clamp_q(x, r, out);
    return out;
}

double truncation_theta(double, double u, double r, double alpha_t) {
    if (u < 0.0) throw ConfigError("truncation_theta: u must be >= 0");
    if (u <= r * alpha_t) return alpha_t;
    if (u <= (r + 1.0) * alpha_t) return -u + (r + 1.0) * alpha_t;
    return 0.0;
}

std::pair<double, double> lemma38_gap(double lambda, double x) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("lemma38_gap: lambda must lie in [0,1]");
    const double lhs = std::abs(std::expm1(lambda * x));
    const double rhs = lambda * (std::exp(std::abs(x)) + std::abs(x) - 1.0);
    return {lhs, rhs};
}

BallQuadrature bump_quadrature(int k, int n_quad) {
    if (k < 1 || k > 3) throw ConfigError("bump_quadrature: k must be in [1,3]");
    if (n_quad < 2) throw ConfigError("bump_quadrature: n_quad must be >= 2");
    std::vector<double> gx, gw;
    gauss_legendre(n_quad, gx, gw);

    BallQuadrature quad;
    quad.k = k;
    const int total = static_cast<int>(std::pow(n_quad, k));
    double mass = 0.0;
    for (int flat = 0; flat < total; ++flat) {
        int rem = flat;
        double w = 1.0, r_sq = 0.0;
        double pt[3];
        for (int c = 0; c < k; ++c) {
            const int j = rem % n_quad;
            rem /= n_quad;
            pt[c] = gx[static_cast<std::size_t>(j)];
            w *= gw[static_cast<std::size_t>(j)];
            r_sq += pt[c] * pt[c];
        }
        const double density = bump(r_sq);
        if (density <= 0.0) continue;  // node outside the unit ball
        quad.weight.push_back(w * density);
        for (int c = 0; c < k; ++c) quad.nodes.push_back(pt[c]);
        mass += w * density;
    }
    if (!(mass > 0.0)) throw ConfigError("bump_quadrature: empty rule");
    for (double& w : quad.weight) w /= mass;

    // Guard against a rule too coarse to integrate the kernel: compare the
    // raw mass against a refined reference.
    std::vector<double> rx, rw;
    gauss_legendre(2 * n_quad, rx, rw);
    double ref = 0.0;
    const int rtotal = static_cast<int>(std::pow(2 * n_quad, k));
    for (int flat = 0; flat < rtotal; ++flat) {
        int rem = flat;
        double w = 1.0, r_sq = 0.0;
        for (int c = 0; c < k; ++c) {
            const int j = rem % (2 * n_quad);
            rem /= (2 * n_quad);
            const double v = rx[static_cast<std::size_t>(j)];
            w *= rw[static_cast<std::size_t>(j)];
            r_sq += v * v;
        }
        ref += w * bump(r_sq);
    }
    if (std::abs(mass / ref - 1.0) > 1e-8)
        throw ConfigError("bump_quadrature: weight sum off by more than 1e-8, raise n_quad");
    return quad;
}

GeneratorSpec mollify_generator(const GeneratorSpec& g, int n, int n_quad) {
    if (n < 1) throw ConfigError("mollify_generator: n must be >= 1");
    auto quad = cached_bump_quadrature(g.k, n_quad);
    GeneratorSpec out = g;  // inherits declared coefficients and structure
    const int k = g.k;
    out.eval = [base = g.eval, quad, n, k](double t, std::span<const double> x,
                                           std::span<const double> y,
                                           std::span<const double> z, std::span<double> res) {
        double shifted[8];
        double acc[8] = {};
        double gv[8];
        const std::size_t count = quad->weight.size();
        for (std::size_t i = 0; i < count; ++i) {
            for (int c = 0; c < k; ++c)
                shifted[c] = y[static_cast<std::size_t>(c)] -
                             quad->nodes[i * static_cast<std::size_t>(k) + c] / n;
            base(t, x, {shifted, static_cast<std::size_t>(k)}, z,
                 {gv, static_cast<std::size_t>(k)});
            for (int c = 0; c < k; ++c) acc[c] += quad->weight[i] * gv[c];
        }
        for (int c = 0; c < k; ++c) res[static_cast<std::size_t>(c)] = acc[c];
    };
    return out;
}

GeneratorSpec truncated_generator(const GeneratorSpec& g, double r, int n,
                                  bool enforce_alpha_cap, double beta) {
    if (!(r > 0.0)) throw ConfigError("truncated_generator: r must be > 0");
    if (n < 1) throw ConfigError("truncated_generator: n must be >= 1");
    if (!g.alpha.deterministic)
        throw ConfigError("truncated_generator: a deterministic alpha rule is required");
    const bool has_envelope = static_cast<bool>(g.growth_envelope);
    if (!has_envelope && !g.eval)
        throw ConfigError("truncated_generator: no envelope rule and no sampling budget");
    // The construction may assume alpha_t <= e^{-beta int mu}; the cap is
    // applied when the coefficient rate is a deterministic constant.
    std::function<double(double)> cap;
    if (enforce_alpha_cap && g.coeff.state_independent && g.coeff.mu) {
        const double mu0 = g.coeff.mu(0.0, {});
        cap = [beta, mu0](double t) { return std::exp(-beta * mu0 * t); };
    }

    GeneratorSpec out = g;
    const int k = g.k;
    out.eval = [base = g.eval, alpha_fn = g.alpha.deterministic, cap,
                envelope = g.growth_envelope, has_envelope, r, n,
                k](double t, std::span<const double> x, std::span<const double> y,
                   std::span<const double> z, std::span<double> res) {
        double alpha = alpha_fn(t);
        if (cap) alpha = std::min(alpha, cap(t));
        double zero_y[8] = {};
        double g0[8], gy[8];
        base(t, x, {zero_y, static_cast<std::size_t>(k)}, z, {g0, static_cast<std::size_t>(k)});
        double psi;
        if (has_envelope) {
            psi = envelope(t, alpha, r + 1.0);
        } else {
            // Deterministic 64-point sample of the centered driver over the
            // ball |y| <= (r+1) alpha; a lower estimate of the true sup.
            psi = 0.0;
            double probe[8];
            const double radius = (r + 1.0) * alpha;
            for (int s = 0; s < 64; ++s) {
                const double frac = (s % 8 + 1) / 8.0;
                for (int c = 0; c < k; ++c) {
                    const double angle =
                        2.0 * M_PI * ((s / 8 + 1) * (c + 1)) / 8.0 + 0.39996 * s;
                    probe[c] = radius * frac * ((k == 1) ? ((s % 2 == 0) ? 1.0 : -1.0)
                                                         : std::cos(angle));
                }
                base(t, x, {probe, static_cast<std::size_t>(k)}, z,
                     {gy, static_cast<std::size_t>(k)});
                double diff = 0.0;
                for (int c = 0; c < k; ++c) diff += (gy[c] - g0[c]) * (gy[c] - g0[c]);
                psi = std::max(psi, std::sqrt(diff));
            }
        }
        double ynorm = 0.0;
        for (int c = 0; c < k; ++c) ynorm += y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
        ynorm = std::sqrt(ynorm);
        const double theta = truncation_theta(t, ynorm, r, alpha);
        const double ne = n * std::exp(-t);
        const double factor = theta * ne / std::max(psi, ne * alpha);
        base(t, x, y, z, {gy, static_cast<std::size_t>(k)});
        for (int c = 0; c < k; ++c)
            res[static_cast<std::size_t>(c)] = factor * (gy[c] - g0[c]) + g0[c];
    };
    return out;
}

}  // namespace wbsde
