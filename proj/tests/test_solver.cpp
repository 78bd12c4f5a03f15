#include "test_helpers.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"
#include "wbsde/oracle.hpp"
#include "wbsde/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace wbsde;
using wbsde::testing::prepare;
using wbsde::testing::solve;

TEST_SUITE_BEGIN("solver");

TEST_CASE("constant martingale: y stays at the terminal constant, z is noise") {
    auto p = prepare("zero", 5000, 32, 9);
    std::vector<double> xi(5000, 4.2);
    SolverSettings s;
    SolutionEstimate est = backward_sweep(p.fx.generator, xi, p.ens, p.tau, p.trace.cum, {},
                                          s);
    for (int path = 0; path < 20; ++path)
        for (int i = 0; i <= 32; ++i)
            CHECK(est.y_at(path, i)[0] == doctest::Approx(4.2).epsilon(1e-12));
    // The fitted z preserves the sample mean of the targets c dB/dt, whose
    // standard error is c/sqrt(n dt); the ensemble mean stays in that band.
    const double band = 4.0 * 4.2 / std::sqrt(5000.0 * p.grid.dt);
    for (int i : {0, 10, 31}) {
        std::vector<double> z(5000);
        for (int path = 0; path < 5000; ++path) z[static_cast<std::size_t>(path)] = est.z_at(path, i)[0];
        const auto ms = exec::mean_se(z);
        CHECK(std::abs(ms.mean) <= band);
    }
}

TEST_CASE("linear fixture with frozen oracle z: root within 2% of e^{1/2}") {
    auto p = prepare("linear-constant-coeff", 20000, 64, 17);
    // The closed-form z is identically zero, so V = 0 is the oracle argument.
    SolutionEstimate est = backward_sweep(p.fx.generator, p.xi, p.ens, p.tau, p.trace.cum,
                                          {}, p.settings);
    CHECK(std::abs(est.root_y[0] - std::exp(0.5)) / std::exp(0.5) < 0.02);
}

TEST_CASE("heat fixture: root recovers x^2 + T within 3%") {
    const TimeGrid grid = make_grid(1.0, 64);
    PathEnsemble ens = simulate_brownian(grid, 80000, 1, 23);
    euler_maruyama(brownian_sde(1), 0.0, std::vector<double>{0.0}, ens);
    const TerminalTime tau = TerminalTime::deterministic(ens.n_paths, grid.n_steps);
    GeneratorSpec g;
    g.k = 1;
    g.d = 1;
    g.depends_on_y = false;
    g.depends_on_z = false;
    g.eval = [](double, std::span<const double>, std::span<const double>,
                std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    std::vector<double> xi(static_cast<std::size_t>(ens.n_paths));
    for (int path = 0; path < ens.n_paths; ++path)
        xi[static_cast<std::size_t>(path)] = ens.state(path, 64)[0] * ens.state(path, 64)[0];
    SolverSettings s;
    const auto res = picard_solve(g, xi, ens, tau, {}, s);
    CHECK(std::abs(res.estimate.root_y[0] - 1.0) < 0.03);
}

TEST_CASE("picard on a z-independent driver converges after one sweep") {
    auto p = prepare("zero", 2000, 16, 3);
    // Nontrivial terminal so the first z image is away from zero.
    for (int path = 0; path < 2000; ++path)
        p.xi[static_cast<std::size_t>(path)] = std::sin(p.ens.state(path, 16)[0]);
    const auto res =
        picard_solve(p.fx.generator, p.xi, p.ens, p.tau, p.trace.cum, p.settings);
    REQUIRE(res.distances.size() == 2);
    CHECK(res.distances[0] > 0.0);
    CHECK(res.distances[1] == 0.0);
    CHECK(res.converged);
    CHECK(res.sweeps == 1);
}

TEST_CASE("picard contraction on the linear fixture: ratio below 1/rho + 0.1") {
    auto p = prepare("linear-constant-coeff", 20000, 64, 41);
    p.settings.picard_max = 6;
    p.settings.picard_tol = 0.0;
    const auto res = solve(p);
    REQUIRE(res.distances.size() >= 5);
    for (std::size_t m = 1; m < 5; ++m) {
        const double ratio = res.distances[m] / res.distances[m - 1];
        CHECK(ratio <= 1.0 / p.fx.weights.rho + 0.1);
    }
}

TEST_CASE("ex3.12: implicit sweeps converge and the residual check passes") {
    auto p = prepare("ex3.12-polynomial-monotone", 8000, 32, 29);
    p.settings.picard_max = 8;
    const auto res = solve(p);
    CHECK(res.converged);
    const auto rr = residual_check(res.estimate, p.fx.generator, p.ens, p.tau, p.settings);
    CHECK_FALSE(rr.any_flagged);
}

TEST_CASE("residual check: injected linear oracle passes, defect is flagged") {
    auto p = prepare("linear-constant-coeff", 20000, 32, 31);
    // Closed-form solution injected as an estimate.
    const auto coeff = LinearCoefficients::constant(p.grid, 0.5, 0.3);
    const auto oracle = linear_bsde_pathwise(coeff, LinearTerminal::deterministic(1.0),
                                             p.ens);
    SolutionEstimate est;
    est.k = 1;
    est.d = 1;
    est.n_paths = p.ens.n_paths;
    est.n_nodes = p.grid.n_nodes();
    est.full_history = true;
    est.y = oracle.y;
    est.z = oracle.z;
    const auto clean = residual_check(est, p.fx.generator, p.ens, p.tau, p.settings);
    CHECK_FALSE(clean.any_flagged);

    SolutionEstimate bent = est;
    const int defect_node = 13;
    for (int path = 0; path < bent.n_paths; ++path)
        bent.y[bent.y_idx(path, defect_node)] += 0.1;
    const auto flagged = residual_check(bent, p.fx.generator, p.ens, p.tau, p.settings);
    CHECK(flagged.any_flagged);
    bool defect_found = false;
    for (const auto& row : flagged.rows)
        if (row.flagged && row.node == defect_node) defect_found = true;
    CHECK(defect_found);
}

TEST_CASE("terminal consistency and the z-freeze hold exactly past the exit") {
    // Exit-time terminal: paths die inside the grid.
    const TimeGrid grid = make_grid(2.0, 64);
    PathEnsemble ens = simulate_brownian(grid, 3000, 1, 57);
    SdeSpec sde;
    sde.state_dim = 1;
    sde.d = 1;
    sde.diffusion = [](double, std::span<const double>, std::span<double> out) {
        out[0] = std::sqrt(2.0);
    };
    euler_maruyama(sde, 0.0, std::vector<double>{0.0}, ens);
    const TerminalTime tau = detect_exit(ens, interval_domain(-1.0, 1.0));
    GeneratorSpec g;
    g.k = 1;
    g.d = 1;
    g.depends_on_z = false;
    g.depends_on_y = false;
    g.eval = [](double, std::span<const double>, std::span<const double>,
                std::span<const double>, std::span<double> out) { out[0] = 2.0; };
    std::vector<double> xi(static_cast<std::size_t>(ens.n_paths));
    for (int path = 0; path < ens.n_paths; ++path)
        xi[static_cast<std::size_t>(path)] =
            std::cos(ens.state(path, tau.index[static_cast<std::size_t>(path)])[0]);
    SolverSettings s;
    const auto res = picard_solve(g, xi, ens, tau, {}, s);
    for (int path = 0; path < ens.n_paths; ++path) {
        const int e = tau.index[static_cast<std::size_t>(path)];
        CHECK(res.estimate.y_at(path, e)[0] == xi[static_cast<std::size_t>(path)]);  // exact
        for (int i = e; i <= grid.n_steps; ++i)
            CHECK(res.estimate.y_at(path, i)[0] == xi[static_cast<std::size_t>(path)]);
        for (int i = e; i < grid.n_steps; ++i) CHECK(res.estimate.z_at(path, i)[0] == 0.0);
    }
}

TEST_CASE("regression reproduces an exact basis function to 1e-10") {
    const int n = 500;
    std::vector<double> states(static_cast<std::size_t>(n));
    std::vector<int> alive(static_cast<std::size_t>(n));
    std::vector<double> targets(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        states[static_cast<std::size_t>(i)] = -2.0 + 4.0 * i / (n - 1.0);
        alive[static_cast<std::size_t>(i)] = i;
        const double x = states[static_cast<std::size_t>(i)];
        targets[static_cast<std::size_t>(i)] = 1.0 + 2.0 * x - 0.7 * x * x;
    }
    RegressionBasis basis;
    basis.degree = 3;
    const BasisPlan plan = plan_basis(basis, 1);
    const NodeFit fit = fit_node(basis, plan, {}, states.data(), 1, alive, targets, 1);
    double scratch[16], out;
    for (int i = 0; i < n; i += 37) {
        const double x = states[static_cast<std::size_t>(i)];
        predict(basis, plan, fit, {&x, 1}, {&out, 1}, {scratch, 4});
        CHECK(std::abs(out - targets[static_cast<std::size_t>(i)]) < 1e-10);
    }
    CHECK(fit.cond < 1e3);
}

TEST_CASE("piecewise-constant basis fits bin means") {
    const int n = 1000;
    std::vector<double> states(static_cast<std::size_t>(n));
    std::vector<int> alive(static_cast<std::size_t>(n));
    std::vector<double> targets(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        states[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / (n - 1.0);
        alive[static_cast<std::size_t>(i)] = i;
        targets[static_cast<std::size_t>(i)] = states[static_cast<std::size_t>(i)] > 0 ? 2.0 : -1.0;
    }
    RegressionBasis basis;
    basis.family = RegressionBasis::Family::PiecewiseConstant;
    basis.bin_edges = {0.0};
    const BasisPlan plan = plan_basis(basis, 1);
    const NodeFit fit = fit_node(basis, plan, {}, states.data(), 1, alive, targets, 1);
    double scratch[4], out;
    const double left = -0.5, right = 0.5;
    predict(basis, plan, fit, {&left, 1}, {&out, 1}, {scratch, 2});
    CHECK(out == doctest::Approx(-1.0).epsilon(1e-9));
    predict(basis, plan, fit, {&right, 1}, {&out, 1}, {scratch, 2});
    CHECK(out == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("assumption validator: paper fixtures pass, violators fail") {
    auto ex39 = prepare("ex3.9-exp-abs", 512, 16, 71);
    const auto r39 = validate_assumptions(ex39.fx.generator, ex39.ens, 100000, 5);
    CHECK(r39.monotonicity_pass);
    CHECK(r39.lipschitz_pass);
    CHECK(r39.driver_bound_pass);

    auto ex312 = prepare("ex3.12-polynomial-monotone", 512, 16, 72);
    const auto r312 = validate_assumptions(ex312.fx.generator, ex312.ens, 100000, 6);
    CHECK(r312.monotonicity_pass);
    CHECK(r312.lipschitz_pass);

    auto vq = prepare("violator-quadratic-y", 256, 8, 73);
    const auto rq = validate_assumptions(vq.fx.generator, vq.ens, 100000, 7);
    CHECK_FALSE(rq.monotonicity_pass);
    CHECK(rq.monotonicity_violation > 1e-3);

    auto vl = prepare("violator-lipschitz-z", 256, 8, 74);
    const auto rl = validate_assumptions(vl.fx.generator, vl.ens, 100000, 8);
    CHECK_FALSE(rl.lipschitz_pass);
}

TEST_CASE("solver output is bitwise independent of the worker count") {
    exec::set_workers(1);
    auto p1 = prepare("linear-constant-coeff", 4000, 32, 2001);
    const auto r1 = solve(p1);
    exec::set_workers(3);
    auto p3 = prepare("linear-constant-coeff", 4000, 32, 2001);
    const auto r3 = solve(p3);
    exec::set_workers(0);
    CHECK(r1.estimate.root_y[0] == r3.estimate.root_y[0]);
    REQUIRE(r1.distances.size() == r3.distances.size());
    for (std::size_t i = 0; i < r1.distances.size(); ++i)
        CHECK(r1.distances[i] == r3.distances[i]);
    for (int path = 0; path < 4000; path += 591)
        for (int i = 0; i < 32; i += 7)
            CHECK(r1.estimate.z_at(path, i)[0] == r3.estimate.z_at(path, i)[0]);
}

TEST_CASE("inner fixed point failure names the offending node") {
    auto p = prepare("linear-constant-coeff", 200, 8, 5);
    GeneratorSpec stiff = p.fx.generator;
    stiff.eval = [](double, std::span<const double>, std::span<const double> y,
                    std::span<const double>, std::span<double> out) {
        out[0] = 1e9 * std::sin(1e4 * y[0]);  // no contractive fixed point at this scale
    };
    SolverSettings s;
    s.implicit_y = true;
    s.inner_max = 5;
    CHECK_THROWS_AS(backward_sweep(stiff, p.xi, p.ens, p.tau, p.trace.cum, {}, s),
                    SolverError);
}

TEST_CASE("rising Picard distances raise a divergence error naming the premise") {
    // A flat-norm solve of a strongly z-amplifying driver: the map expands,
    // successive distances grow, and the solver reports the broken premise.
    auto p = prepare("linear-constant-coeff", 2000, 16, 61);
    GeneratorSpec loud = p.fx.generator;
    loud.eval = [](double, std::span<const double>, std::span<const double>,
                   std::span<const double> z, std::span<double> out) {
        out[0] = 25.0 * z[0];
    };
    SolverSettings s;
    s.picard_max = 12;
    s.picard_tol = 0.0;
    CHECK_THROWS_WITH_AS(picard_solve(loud, p.xi, p.ens, p.tau, {}, s),
                         doctest::Contains("rho > 1"), SolverError);
}

TEST_CASE("catalogue fixtures solve at smoke scale without blowing up") {
    for (const char* id : {"ex3.8-exponential-z", "ex3.10-infinite-horizon",
                           "ex3.11-mixed-regimes"}) {
        auto p = prepare(id, 2000, 0, 91);
        const auto res = solve(p);
        for (double v : res.estimate.root_y) CHECK(std::isfinite(v));
        if (p.fx.capped_infinite) CHECK(p.tau.truncation_mass == 1.0);
        CHECK(res.sweeps >= 1);
    }
}

TEST_CASE("contraction report bootstraps nonzero uncertainties") {
    auto p = prepare("linear-constant-coeff", 4000, 32, 83);
    p.settings.picard_max = 5;
    p.settings.picard_tol = 0.0;
    const auto res = solve(p);
    const auto cr = contraction_report(res, 100, 11);
    REQUIRE(cr.ratios.size() >= 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(cr.ratios[i] >= 0.0);
        CHECK(cr.se[i] > 0.0);
    }
}

TEST_SUITE_END();
