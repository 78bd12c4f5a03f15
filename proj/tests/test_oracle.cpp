#include "wbsde/ensemble.hpp"
#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/fd.hpp"
#include "wbsde/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace wbsde;

namespace {

PathEnsemble brownian_paths(int n, int n_steps, double t_cap, std::uint64_t seed) {
    const TimeGrid g = make_grid(t_cap, n_steps);
    PathEnsemble ens = simulate_brownian(g, n, 1, seed);
    euler_maruyama(brownian_sde(1), 0.0, std::vector<double>{0.0}, ens);
    return ens;
}

double slope_of(const std::vector<double>& lx, const std::vector<double>& ly) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(lx.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

}  // namespace

TEST_SUITE_BEGIN("oracle");

TEST_CASE("constant coefficients, deterministic terminal: y = c e^{mu (T-t)}, z = 0") {
    PathEnsemble ens = brownian_paths(50, 32, 1.0, 4);
    const auto coeff = LinearCoefficients::constant(ens.grid, 0.5, 0.3);
    const auto res = linear_bsde_pathwise(coeff, LinearTerminal::deterministic(2.0), ens);
    CHECK(res.exact);
    for (int p = 0; p < ens.n_paths; ++p) {
        for (int i = 0; i <= 32; ++i) {
            const double expect = 2.0 * std::exp(0.5 * (1.0 - ens.grid.node(i)));
            CHECK(res.y[static_cast<std::size_t>(p) * 33 + i] ==
                  doctest::Approx(expect).epsilon(1e-13));
        }
        CHECK(res.z[static_cast<std::size_t>(p) * 32] == 0.0);
    }
}

TEST_CASE("zero terminal gives the zero solution") {
    PathEnsemble ens = brownian_paths(10, 8, 1.0, 4);
    const auto coeff = LinearCoefficients::constant(ens.grid, 0.5, 0.3);
    const auto res = linear_bsde_pathwise(coeff, LinearTerminal::deterministic(0.0), ens);
    for (double v : res.y) CHECK(v == 0.0);
}

TEST_CASE("motivational terminal: pathwise identity holds to 1e-10") {
    PathEnsemble ens = brownian_paths(2000, 128, 1.0, 12);
    const auto coeff = LinearCoefficients::constant(ens.grid, 0.0, 1.0);
    const auto res = linear_bsde_pathwise(coeff, LinearTerminal::exp_functional(), ens);
    const auto xi = linear_terminal_values(coeff, LinearTerminal::exp_functional(), ens);
    CHECK(res.exact);
    // Independent reconstruction: y_i = xi * exp(-(sum_{j>=i} b dB - 3/2 b^2 dt)).
    double worst = 0.0;
    for (int p = 0; p < ens.n_paths; ++p) {
        double tail = 0.0;
        for (int i = ens.grid.n_steps; i >= 0; --i) {
            const double expect = xi[static_cast<std::size_t>(p)] * std::exp(-tail);
            worst = std::max(
                worst, std::abs(res.y[static_cast<std::size_t>(p) * ens.grid.n_nodes() + i] -
                                expect));
            if (i > 0) tail += ens.increment(p, i - 1, 0) - 1.5 * ens.grid.dt;
        }
    }
    CHECK(worst <= 1e-10);
    CHECK_THROWS_AS(
        linear_bsde_pathwise(LinearCoefficients::constant(ens.grid, 0.5, 1.0),
                             LinearTerminal::exp_functional(), ens),
        ConfigError);
}

TEST_CASE("nested Monte Carlo agrees with the explicit route") {
    PathEnsemble ens = brownian_paths(200, 16, 1.0, 21);
    const auto coeff = LinearCoefficients::constant(ens.grid, 0.0, 1.0);
    // Same terminal as the exp functional, but given as an opaque functional,
    // forcing the nested route. y_0 = 1 pathwise.
    const auto generic = LinearTerminal::generic(
        [](std::span<const double> dB, const TimeGrid& grid) {
            double acc = 0.0;
            for (int j = 0; j < grid.n_steps; ++j)
                acc += dB[static_cast<std::size_t>(j)] - 1.5 * grid.dt;
            return std::exp(acc);
        });
    const auto res = linear_bsde_pathwise(coeff, generic, ens, 512);
    CHECK_FALSE(res.exact);
    double mean0 = 0.0;
    for (int p = 0; p < ens.n_paths; ++p)
        mean0 += res.y[static_cast<std::size_t>(p) * ens.grid.n_nodes()];
    mean0 /= ens.n_paths;
    CHECK(std::abs(mean0 - 1.0) < 0.05);
    CHECK(res.inner_se > 0.0);
    CHECK_THROWS_AS(linear_bsde_pathwise(coeff, generic, ens, 0), ConfigError);
}

TEST_CASE("weight condition: unit, counterexample, and lognormal cases") {
    PathEnsemble ens = brownian_paths(100000, 64, 1.0, 30);

    const auto zero_coeff = LinearCoefficients::constant(ens.grid, 0.0, 0.0);
    const auto unit = weight_condition_check(zero_coeff, LinearTerminal::deterministic(1.0),
                                             ens, 1.0, 1.0);
    CHECK(unit.estimate == 1.0);
    CHECK(unit.se == 0.0);

    const auto b_coeff = LinearCoefficients::constant(ens.grid, 0.0, 1.0);
    const auto ce = weight_condition_check(b_coeff, LinearTerminal::exp_functional(), ens,
                                           1.0, 1.0);
    CHECK(ce.estimate <= 1.0 + 4.0 * ce.se);
    CHECK(ce.estimate >= 1.0 - 4.0 * ce.se);

    const auto lognormal = LinearTerminal::generic(
        [](std::span<const double> dB, const TimeGrid& grid) {
            double b1 = 0.0;
            for (int j = 0; j < grid.n_steps; ++j) b1 += dB[static_cast<std::size_t>(j)];
            return std::exp(b1);
        });
    const auto ln = weight_condition_check(zero_coeff, lognormal, ens, 1.0, 1.0);
    CHECK(std::abs(ln.estimate - std::exp(2.0)) <= 4.0 * ln.se);
}

TEST_CASE("discrete BSDE residual of the closed form shrinks at O(dt)") {
    // Constant-coefficient exp-functional solution with z read from the
    // closed form; the conditional residual is O(dt^2) per step, so the
    // per-node ensemble means scale at least linearly in dt.
    double prev_worst = 0.0;
    for (int level : {5, 7}) {
        const int N = 1 << level;
        PathEnsemble ens = brownian_paths(40000, N, 1.0, 55);
        const auto coeff = LinearCoefficients::constant(ens.grid, 0.0, 1.0);
        const auto res = linear_bsde_pathwise(coeff, LinearTerminal::exp_functional(), ens);
        const double dt = ens.grid.dt;
        double worst_mean = 0.0;
        for (int i = 0; i < N; i += N / 8) {
            double acc = 0.0;
            for (int p = 0; p < ens.n_paths; ++p) {
                const std::size_t base = static_cast<std::size_t>(p) * ens.grid.n_nodes();
                const double y_i = res.y[base + i];
                const double y_n = res.y[base + i + 1];
                const double z_i = res.z[static_cast<std::size_t>(p) * N + i];
                acc += y_i - y_n - dt * z_i + z_i * ens.increment(p, i, 0);
            }
            worst_mean = std::max(worst_mean, std::abs(acc / ens.n_paths));
        }
        if (level == 5) prev_worst = worst_mean;
        else CHECK(worst_mean < prev_worst);
        CHECK(worst_mean < 5.0 * dt);
    }
}

TEST_CASE("fd parabolic: heat polynomial identity near the window center") {
    ParabolicProblem p;
    p.drift = [](double, double) { return 0.0; };
    p.sigma = [](double, double) { return 1.0; };
    p.h = [](double x) { return x * x; };
    p.t_end = 1.0;
    const int nx = 200;
    const int nt = fd_parabolic_required_nt(p, -3.0, 3.0, nx);
    const SpaceTimeMesh mesh = fd_parabolic(p, -3.0, 3.0, nx, nt);
    double worst = 0.0;
    for (double t : {0.0, 0.25, 0.5, 0.75})
        for (double x : {-0.25, 0.0, 0.25})
            worst = std::max(worst, std::abs(mesh.value(t, x) - (x * x + (1.0 - t))));
    CHECK(worst <= 2e-3);
}

TEST_CASE("fd parabolic: constants are caloric; CFL is enforced") {
    ParabolicProblem p;
    p.drift = [](double, double) { return 0.0; };
    p.sigma = [](double, double) { return 1.0; };
    p.h = [](double) { return 3.25; };
    p.t_end = 1.0;
    const int nt = fd_parabolic_required_nt(p, -2.0, 2.0, 101);
    const SpaceTimeMesh mesh = fd_parabolic(p, -2.0, 2.0, 101, nt);
    CHECK(mesh.value(0.3, 0.7) == doctest::Approx(3.25).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(fd_parabolic(p, -2.0, 2.0, 101, nt / 2),
                         doctest::Contains("need nt >="), ConfigError);
}

TEST_CASE("fd parabolic: linear driver matches the integrating factor") {
    const double mu0 = 0.5;
    ParabolicProblem p;
    p.drift = [](double, double) { return 0.0; };
    p.sigma = [](double, double) { return 1.0; };
    p.g = [mu0](double, double, double u, double) { return mu0 * u; };
    p.h = [](double x) { return x * x; };
    p.t_end = 1.0;
    const int nx = 241;
    const int nt = fd_parabolic_required_nt(p, -6.0, 6.0, nx);
    const SpaceTimeMesh mesh = fd_parabolic(p, -6.0, 6.0, nx, nt);
    for (double t : {0.0, 0.5}) {
        const double expect = std::exp(mu0 * (1.0 - t)) * (0.0 + (1.0 - t));
        CHECK(std::abs(mesh.value(t, 0.0) - expect) < 3e-3);
    }
}

TEST_CASE("fd parabolic: second-order convergence on a smooth solution") {
    // u(t,x) = e^{-(T-t)/2} cos x solves u_t + u_xx/2 = 0 backward; the window
    // ends at the cosine zeros so the Dirichlet closure is exact.
    std::vector<double> log_h, log_e;
    for (int nx : {26, 51, 101, 201}) {
        ParabolicProblem p;
        p.drift = [](double, double) { return 0.0; };
        p.sigma = [](double, double) { return 1.0; };
        p.h = [](double x) { return std::cos(x); };
        p.t_end = 1.0;
        const double half = M_PI / 2.0;
        const int nt = fd_parabolic_required_nt(p, -half, half, nx);
        const SpaceTimeMesh mesh = fd_parabolic(p, -half, half, nx, nt);
        double err = 0.0;
        for (double x : {-0.5, 0.0, 0.5})
            err = std::max(err,
                           std::abs(mesh.value(0.0, x) - std::exp(-0.5) * std::cos(x)));
        log_h.push_back(std::log(M_PI / (nx - 1)));
        log_e.push_back(std::log(err));
    }
    const double slope = slope_of(log_h, log_e);
    CHECK(slope > 1.7);
    CHECK(slope < 2.3);
}

TEST_CASE("fd elliptic: quadratic solution is exact; constants are harmonic") {
    EllipticProblem p;
    p.lo = -1.0;
    p.hi = 1.0;
    p.drift = [](double) { return 0.0; };
    p.sigma = [](double) { return std::sqrt(2.0); };
    p.g = [](double, double, double) { return 2.0; };
    p.h = [](double) { return 0.0; };
    const EllipticSolution sol = fd_elliptic(p, 400);
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.x.size(); ++i)
        worst = std::max(worst, std::abs(sol.u[i] - (1.0 - sol.x[i] * sol.x[i])));
    CHECK(worst <= 1e-8);

    EllipticProblem c;
    c.lo = -1.0;
    c.hi = 1.0;
    c.drift = [](double) { return 0.0; };
    c.sigma = [](double) { return 1.0; };
    c.h = [](double) { return 1.5; };
    const EllipticSolution csol = fd_elliptic(c, 51);
    for (double u : csol.u) CHECK(u == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("fd elliptic: manufactured solution recovered through the fixed point") {
    // g(x, u) = -u + s with s tuned so u* = cos(pi x / 2).
    EllipticProblem p;
    p.lo = -1.0;
    p.hi = 1.0;
    p.drift = [](double) { return 0.0; };
    p.sigma = [](double) { return std::sqrt(2.0); };
    p.g = [](double x, double u, double) {
        const double s = (M_PI * M_PI / 4.0 + 1.0) * std::cos(M_PI * x / 2.0);
        return -u + s;
    };
    p.h = [](double) { return 0.0; };
    const EllipticSolution sol = fd_elliptic(p, 1001);
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.x.size(); ++i)
        worst = std::max(worst, std::abs(sol.u[i] - std::cos(M_PI * sol.x[i] / 2.0)));
    CHECK(worst <= 1e-6);
    CHECK(sol.iterations > 1);
}

TEST_CASE("fd elliptic: divergent fixed point raises with residual history") {
    EllipticProblem p;
    p.lo = -1.0;
    p.hi = 1.0;
    p.drift = [](double) { return 0.0; };
    p.sigma = [](double) { return 1.0; };
    p.g = [](double, double u, double) { return 50.0 * u + 1.0; };
    p.h = [](double) { return 0.0; };
    EllipticControls controls;
    controls.max_iterations = 40;
    CHECK_THROWS_AS(fd_elliptic(p, 101, controls), SolverError);
}

TEST_CASE("fd elliptic: second-order convergence on the manufactured solution") {
    std::vector<double> log_h, log_e;
    for (int nx : {51, 101, 201, 401}) {
        EllipticProblem p;
        p.lo = -1.0;
        p.hi = 1.0;
        p.drift = [](double) { return 0.0; };
        p.sigma = [](double) { return std::sqrt(2.0); };
        p.g = [](double x, double u, double) {
            return -u + (M_PI * M_PI / 4.0 + 1.0) * std::cos(M_PI * x / 2.0);
        };
        p.h = [](double) { return 0.0; };
        const EllipticSolution sol = fd_elliptic(p, nx);
        double err = 0.0;
        for (std::size_t i = 0; i < sol.x.size(); ++i)
            err = std::max(err, std::abs(sol.u[i] - std::cos(M_PI * sol.x[i] / 2.0)));
        log_h.push_back(std::log(2.0 / (nx - 1)));
        log_e.push_back(std::log(err));
    }
    const double slope = slope_of(log_h, log_e);
    CHECK(slope > 1.7);
    CHECK(slope < 2.3);
}

TEST_CASE("sup-moment diagnostic returns a doubling table") {
    PathEnsemble ens = brownian_paths(8000, 64, 1.0, 77);
    const auto coeff = LinearCoefficients::constant(ens.grid, 0.0, 1.0);
    const auto table = sup_moment_diagnostic(coeff, ens, 3);
    CHECK(table.size() == 4);
    for (double v : table) CHECK(v >= 1.0);
}

TEST_SUITE_END();
