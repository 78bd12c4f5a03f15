#include "wbsde/errors.hpp"
#include "wbsde/generator.hpp"
#include "wbsde/rng.hpp"
#include "wbsde/transforms.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace wbsde;

namespace {

GeneratorSpec scalar_generator(std::function<double(double t, double y)> fn) {
    GeneratorSpec g;
    g.k = 1;
    g.d = 1;
    g.depends_on_z = false;
    g.eval = [fn = std::move(fn)](double t, std::span<const double>, std::span<const double> y,
                                  std::span<const double>, std::span<double> out) {
        out[0] = fn(t, y[0]);
    };
    g.alpha.deterministic = [](double) { return 1.0; };
    return g;
}

double eval1(const GeneratorSpec& g, double t, double y) {
    const double x = 0.0, z = 0.0;
    double out = 0.0;
    g.eval(t, {&x, 1}, {&y, 1}, {&z, 1}, {&out, 1});
    return out;
}

// Simpson quadrature of the normalized bump moment int phi(u) |u| du on [-1,1].
double bump_abs_moment() {
    const int n = 20000;
    const double h = 2.0 / n;
    double mass = 0.0, moment = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double u = -1.0 + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double r2 = u * u;
        const double phi = r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
        mass += w * phi;
        moment += w * phi * std::abs(u);
    }
    return moment / mass;
}

}  // namespace

TEST_SUITE_BEGIN("transforms");

TEST_CASE("clamp: inside, boundary, and rescaled points") {
    const std::vector<double> x = {3.0, 4.0};
    CHECK(clamp_q(x, 10.0) == std::vector<double>{3.0, 4.0});
    CHECK(clamp_q(x, 5.0) == std::vector<double>{3.0, 4.0});
    const auto scaled = clamp_q(x, 1.0);
    CHECK(scaled[0] == doctest::Approx(0.6));
    CHECK(scaled[1] == doctest::Approx(0.8));
    const auto zero = clamp_q(x, 0.0);
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);
    CHECK_THROWS_AS(clamp_q(x, -1.0), ConfigError);
}

TEST_CASE("clamp contraction and fixed-ball identity on 1e5 samples") {
    int violations = 0;
    for (int s = 0; s < 100000; ++s) {
        const auto u = [&](int j) { return rng::uniform01(101, s, j, 0); };
        const double r = 3.0 * u(0);
        double a[2] = {8.0 * u(1) - 4.0, 8.0 * u(2) - 4.0};
        double b[2] = {8.0 * u(3) - 4.0, 8.0 * u(4) - 4.0};
        double qa[2], qb[2];
        clamp_q({a, 2}, r, {qa, 2});
        clamp_q({b, 2}, r, {qb, 2});
        const double norm_qa = std::hypot(qa[0], qa[1]);
        if (norm_qa > r + 1e-12) ++violations;
        if (std::hypot(a[0], a[1]) <= r &&
            (std::abs(qa[0] - a[0]) > 1e-12 || std::abs(qa[1] - a[1]) > 1e-12))
            ++violations;
        const double lhs = std::hypot(qa[0] - qb[0], qa[1] - qb[1]);
        const double rhs = std::hypot(a[0] - b[0], a[1] - b[1]);
        if (lhs > rhs * (1.0 + 1e-12) + 1e-12) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("theta: branch values and boundaries") {
    CHECK(truncation_theta(0.0, 0.0, 2.0, 0.5) == 0.5);
    CHECK(truncation_theta(0.0, 1.5, 2.0, 0.5) == doctest::Approx(0.0));
    CHECK(truncation_theta(0.0, 1.2, 2.0, 0.5) == doctest::Approx(0.3));
    CHECK(truncation_theta(0.0, 2.0, 2.0, 0.5) == 0.0);
    CHECK_THROWS_AS(truncation_theta(0.0, -0.1, 2.0, 0.5), ConfigError);
}

TEST_CASE("theta bounds and 1-Lipschitz continuity on 1e5 samples") {
    int violations = 0;
    for (int s = 0; s < 100000; ++s) {
        const auto u = [&](int j) { return rng::uniform01(707, s, j, 0); };
        const double alpha = std::max(1e-6, u(0));
        const double r = 4.0 * u(1) + 1e-6;
        const double u1 = 2.0 * (r + 1.0) * alpha * u(2);
        const double u2 = 2.0 * (r + 1.0) * alpha * u(3);
        const double t1 = truncation_theta(0.0, u1, r, alpha);
        const double t2 = truncation_theta(0.0, u2, r, alpha);
        if (t1 < 0.0 || t1 > alpha + 1e-12) ++violations;
        if (std::abs(t1 - t2) > std::abs(u1 - u2) + 1e-12) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("lemma 3.8 gap: stated evaluations") {
    auto [l0, r0] = lemma38_gap(0.0, 3.7);
    CHECK(l0 == 0.0);
    CHECK(r0 == 0.0);
    auto [l1, r1] = lemma38_gap(1.0, 1.0);
    CHECK(l1 == doctest::Approx(std::exp(1.0) - 1.0));
    CHECK(r1 == doctest::Approx(std::exp(1.0)));
    auto [l2, r2] = lemma38_gap(0.5, -2.0);
    CHECK(l2 == doctest::Approx(1.0 - std::exp(-1.0)));
    CHECK(r2 == doctest::Approx(0.5 * (std::exp(2.0) + 1.0)));
    CHECK_THROWS_AS(lemma38_gap(-0.1, 0.0), ConfigError);
    CHECK_THROWS_AS(lemma38_gap(1.1, 0.0), ConfigError);
}

TEST_CASE("lemma 3.8 holds on 1e5 samples; equality only at lambda x = 0") {
    int violations = 0;
    double worst_lx_at_zero_gap = 0.0;
    for (int s = 0; s < 100000; ++s) {
        const double lambda = rng::uniform01(909, s, 0, 0);
        const double x = 20.0 * rng::uniform01(909, s, 1, 0) - 10.0;
        const auto [lhs, rhs] = lemma38_gap(lambda, x);
        if (lhs > rhs + 1e-12) ++violations;
        if (rhs - lhs <= 1e-12)
            worst_lx_at_zero_gap = std::max(worst_lx_at_zero_gap, std::abs(lambda * x));
    }
    CHECK(violations == 0);
    CHECK(worst_lx_at_zero_gap <= 1e-9);
}

TEST_CASE("bump quadrature: unit mass and symmetry") {
    const auto quad = bump_quadrature(1, 48);
    double mass = 0.0, odd = 0.0;
    for (std::size_t i = 0; i < quad.weight.size(); ++i) {
        mass += quad.weight[i];
        odd += quad.weight[i] * quad.nodes[i];
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(odd) < 1e-14);
    CHECK_THROWS_AS(bump_quadrature(1, 2), ConfigError);  // too coarse for the kernel
}

TEST_CASE("mollifying an affine map is the identity") {
    GeneratorSpec g = scalar_generator([](double, double y) { return 2.0 * y - 1.0; });
    const GeneratorSpec gm = mollify_generator(g, 3, 48);
    for (double y : {-2.0, -0.3, 0.0, 1.7}) {
        CHECK(std::abs(eval1(gm, 0.0, y) - (2.0 * y - 1.0)) < 1e-10);
    }
}

TEST_CASE("mollified |y| at the kink: positive, decreasing as 1/n") {
    GeneratorSpec g = scalar_generator([](double, double y) { return std::abs(y); });
    const double moment = bump_abs_moment();
    double prev = 1e300;
    for (int n : {1, 2, 4, 8}) {
        const GeneratorSpec gm = mollify_generator(g, n, 48);
        const double at_zero = eval1(gm, 0.0, 0.0);
        CHECK(at_zero > 0.0);
        // Gauss-Legendre converges slowly on the |u| kink; 2e-3 relative is
        // what a 48-node rule delivers there.
        CHECK(at_zero == doctest::Approx(moment / n).epsilon(2e-3));
        CHECK(at_zero < prev);
        prev = at_zero;
    }
}

TEST_CASE("mollification error of a Lipschitz map stays below 2 Lip / n") {
    GeneratorSpec g = scalar_generator([](double, double y) { return std::abs(y); });
    double prev_sup = 1e300;
    for (int n : {1, 2, 4, 8, 16}) {
        const GeneratorSpec gm = mollify_generator(g, n, 48);
        double sup = 0.0;
        for (int i = -40; i <= 40; ++i) {
            const double y = 0.1 * i;
            sup = std::max(sup, std::abs(eval1(gm, 0.0, y) - std::abs(y)));
        }
        CHECK(sup <= 2.0 / n);
        CHECK(sup <= prev_sup + 1e-15);
        prev_sup = sup;
    }
}

TEST_CASE("truncated driver: outside branch, constant driver, linear regime") {
    // Outside the cutoff ball the centered part vanishes.
    GeneratorSpec lin = scalar_generator([](double, double y) { return y + 0.7; });
    lin.growth_envelope = [](double, double alpha, double r) { return r * alpha; };
    const double r = 1.0;
    const GeneratorSpec ln = truncated_generator(lin, r, 1000);
    CHECK(eval1(ln, 0.0, 5.0) == doctest::Approx(0.7));  // |y| > (r+1) alpha

    // g(t, y) = g(t, 0) for all y: the transform is the identity.
    GeneratorSpec constant = scalar_generator([](double t, double) { return std::sin(t); });
    const GeneratorSpec cn = truncated_generator(constant, 2.0, 5);
    for (double y : {-3.0, 0.0, 4.0})
        CHECK(eval1(cn, 0.3, y) == doctest::Approx(std::sin(0.3)).epsilon(1e-12));

    // Large n with |y| <= r alpha: both factors are one.
    GeneratorSpec identity = scalar_generator([](double, double y) { return y; });
    identity.growth_envelope = [](double, double alpha, double rr) { return rr * alpha; };
    const GeneratorSpec idn = truncated_generator(identity, 1.0, 1000);
    for (double y : {-0.9, -0.2, 0.5, 1.0})
        CHECK(eval1(idn, 0.0, y) == doctest::Approx(y).epsilon(1e-12));

    // Pointwise bound |g^n - g(t,0)| <= n e^{-t} alpha_t.
    GeneratorSpec steep = scalar_generator([](double, double y) { return 50.0 * y; });
    steep.growth_envelope = [](double, double alpha, double rr) { return 50.0 * rr * alpha; };
    const int n_level = 3;
    const GeneratorSpec sn = truncated_generator(steep, 1.0, n_level);
    for (double y : {-2.0, -0.5, 0.1, 0.9, 3.0}) {
        const double bound = n_level * std::exp(-0.2) * 1.0;
        CHECK(std::abs(eval1(sn, 0.2, y) - 0.0) <= bound + 1e-12);
    }
}

TEST_CASE("truncated driver requires a deterministic alpha rule") {
    GeneratorSpec g = scalar_generator([](double, double y) { return y; });
    g.alpha = AlphaModel{};
    CHECK_THROWS_AS(truncated_generator(g, 1.0, 1), ConfigError);
}

TEST_SUITE_END();
