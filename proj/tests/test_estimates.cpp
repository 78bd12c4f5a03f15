#include "test_helpers.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/estimates.hpp"
#include "wbsde/oracle.hpp"

#include <doctest.h>

#include <cmath>

using namespace wbsde;
using wbsde::testing::prepare;
using wbsde::testing::solve;

TEST_SUITE_BEGIN("estimates");

TEST_CASE("weighted norms reduce to flat statistics when a = 0") {
    const TimeGrid grid = make_grid(1.0, 16);
    const WeightParams wp{1.0, 2.0, 2.0};
    const int n = 3000;
    CoefficientTrace trace = constant_trace(wp, n, grid, 0.0, 0.0);
    const TerminalTime tau = TerminalTime::deterministic(n, 16);
    SolutionEstimate est;
    est.k = 1;
    est.d = 1;
    est.n_paths = n;
    est.n_nodes = 17;
    est.y.resize(static_cast<std::size_t>(n) * 17);
    est.z.resize(static_cast<std::size_t>(n) * 16);
    std::vector<double> xi(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        xi[static_cast<std::size_t>(p)] = std::sin(p * 0.01);
        for (int i = 0; i <= 16; ++i) est.y[est.y_idx(p, i)] = xi[static_cast<std::size_t>(p)];
        for (int i = 0; i < 16; ++i) est.z[est.z_idx(p, i)] = std::cos(p * 0.02);
    }
    const auto norms = weighted_norms(est, trace, xi, tau, grid);
    double xi_flat = 0.0, z_flat = 0.0;
    for (int p = 0; p < n; ++p) {
        xi_flat += xi[static_cast<std::size_t>(p)] * xi[static_cast<std::size_t>(p)];
        z_flat += std::cos(p * 0.02) * std::cos(p * 0.02);  // integrates to |z|^2 T
    }
    xi_flat /= n;
    z_flat /= n;
    CHECK(norms.xi_norm_sq == doctest::Approx(xi_flat).epsilon(1e-12));
    CHECK(norms.y_norm_sq == doctest::Approx(xi_flat).epsilon(1e-12));
    CHECK(norms.z_norm_sq == doctest::Approx(z_flat).epsilon(1e-12));
}

TEST_CASE("constant rate and unit terminal: xi norm equals e^{2 c T}") {
    const TimeGrid grid = make_grid(1.0, 16);
    const WeightParams wp{1.0, 2.0, 2.0};
    // mu = 0.7, nu = 0 gives a = 0.7 with beta = 1.
    CoefficientTrace trace = constant_trace(wp, 100, grid, 0.7, 0.0);
    const TerminalTime tau = TerminalTime::deterministic(100, 16);
    SolutionEstimate est;
    est.k = 1;
    est.d = 1;
    est.n_paths = 100;
    est.n_nodes = 17;
    est.y.assign(100 * 17, 1.0);
    est.z.assign(100 * 16, 0.0);
    std::vector<double> xi(100, 1.0);
    const auto norms = weighted_norms(est, trace, xi, tau, grid);
    CHECK(norms.xi_norm_sq == doctest::Approx(std::exp(2.0 * 0.7)).epsilon(1e-12));
    CHECK(norms.xi_se == doctest::Approx(0.0));
}

TEST_CASE("oracle-injected linear solution matches the closed-form norm") {
    auto p = prepare("linear-constant-coeff", 20000, 64, 19);
    const auto coeff = LinearCoefficients::constant(p.grid, 0.5, 0.3);
    const auto oracle = linear_bsde_pathwise(coeff, LinearTerminal::deterministic(1.0),
                                             p.ens);
    SolutionEstimate est;
    est.k = 1;
    est.d = 1;
    est.n_paths = p.ens.n_paths;
    est.n_nodes = p.grid.n_nodes();
    est.y = oracle.y;
    est.z = oracle.z;
    const auto norms = weighted_norms(est, p.trace, p.xi, p.tau, p.grid);
    // Deterministic solution: sup_t e^{2 a t} e^{mu (T-t) 2}; a = 0.5 + 0.09 > mu,
    // so the sup sits at t = T with value e^{2 a T}.
    const double a = 0.5 + 0.5 * 2.0 * 0.09;
    const double expect = std::exp(2.0 * a);
    CHECK(norms.y_norm_sq == doctest::Approx(expect).epsilon(1e-10));
    CHECK(norms.z_norm_sq == doctest::Approx(0.0));
}

TEST_CASE("a priori suite: zero fixture sits exactly on the degenerate equality") {
    auto p = prepare("zero", 1000, 8, 7);
    const auto res = solve(p);
    const auto report = apriori_check(res.estimate, p.fx.generator, p.xi, p.trace,
                                      p.fx.weights, p.tau, p.ens);
    REQUIRE(report.rows.size() == 4);
    for (const auto& row : report.rows) {
        CHECK(row.lhs == 0.0);
        CHECK(row.rhs == 0.0);
        CHECK(row.pass);
    }
    CHECK(report.all_pass);
}

TEST_CASE("a priori suite: linear fixture passes with the explicit constant 18496") {
    auto p = prepare("linear-constant-coeff", 20000, 64, 11);
    const auto res = solve(p);
    const auto report = apriori_check(res.estimate, p.fx.generator, p.xi, p.trace,
                                      p.fx.weights, p.tau, p.ens);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows[1].id == "2.03*");
    // C* = 4 (2 + 33 rho_bar/(rho_bar - 1))^2 at rho_bar = 2.
    CHECK(report.rows[1].constant == doctest::Approx(18496.0));
    CHECK(report.rows[0].constant == doctest::Approx(4.0));
    for (const auto& row : report.rows) CHECK(row.pass);
    CHECK(report.empirical_c_204 > 0.0);
    CHECK(report.empirical_c_204 < 18496.0);
}

TEST_CASE("a priori suite passes on the solved ex3.9 generator") {
    auto p = prepare("ex3.9-exp-abs", 20000, 32, 13);
    const auto res = solve(p);
    const auto report = apriori_check(res.estimate, p.fx.generator, p.xi, p.trace,
                                      p.fx.weights, p.tau, p.ens);
    for (const auto& row : report.rows) CHECK(row.pass);
}

TEST_CASE("missing driver bound is a configuration error") {
    auto p = prepare("ex3.8-exponential-z", 500, 8, 3);
    const auto res = solve(p);
    CHECK_THROWS_AS(apriori_check(res.estimate, p.fx.generator, p.xi, p.trace, p.fx.weights,
                                  p.tau, p.ens),
                    ConfigError);
}

TEST_CASE("weighted norms are monotone in beta and rho") {
    auto p = prepare("ex3.9-exp-abs", 4000, 16, 23);
    const auto res = solve(p);
    const auto base = weighted_norms(res.estimate, p.trace, p.xi, p.tau, p.grid);

    for (const WeightParams& wp : {WeightParams{1.5, 2.0, 2.0}, WeightParams{1.0, 3.0, 3.0}}) {
        CoefficientTrace heavier = make_trace(wp, p.trace.n_paths, p.trace.n_nodes,
                                              p.trace.mu, p.trace.nu);
        cumulative_weight(heavier, p.grid);
        const auto norms = weighted_norms(res.estimate, heavier, p.xi, p.tau, p.grid);
        CHECK(norms.xi_norm_sq >= base.xi_norm_sq);
        CHECK(norms.y_norm_sq >= base.y_norm_sq);
        CHECK(norms.z_norm_sq >= base.z_norm_sq);
    }
}

TEST_CASE("the 2.03* left side is non-increasing as rho_bar rises to rho") {
    auto p = prepare("linear-constant-coeff", 5000, 32, 29);
    const auto res = solve(p);
    double prev = 1e300;
    for (double rho_bar : {1.2, 1.5, 2.0}) {
        WeightParams wp{1.0, 2.0, rho_bar};
        const auto report = apriori_check(res.estimate, p.fx.generator, p.xi, p.trace, wp,
                                          p.tau, p.ens);
        CHECK(report.rows[1].lhs <= prev + 1e-12);
        prev = report.rows[1].lhs;
    }
}

TEST_CASE("continuous dependence: identical problems sit at the zero floor") {
    auto p = prepare("linear-constant-coeff", 2000, 16, 31);
    const auto res = solve(p);
    const auto dep = continuous_dependence(res.estimate, res.estimate, p.fx.generator,
                                           p.fx.generator, p.xi, p.xi, p.trace, p.tau,
                                           p.ens);
    CHECK(dep.lhs == 0.0);
    CHECK(dep.rhs_driver == 0.0);
}

TEST_CASE("continuous dependence: quadratic scaling in the terminal shift") {
    auto p = prepare("linear-constant-coeff", 8000, 32, 37);
    p.settings.picard_tol = 1e-14;
    const auto base = solve(p);
    double lhs_01 = 0.0, lhs_005 = 0.0;
    for (double delta : {0.1, 0.05}) {
        std::vector<double> xi_shift = p.xi;
        for (double& v : xi_shift) v += delta;
        const auto shifted = picard_solve(p.fx.generator, xi_shift, p.ens, p.tau,
                                          p.trace.cum, p.settings);
        const auto dep = continuous_dependence(base.estimate, shifted.estimate,
                                               p.fx.generator, p.fx.generator, p.xi,
                                               xi_shift, p.trace, p.tau, p.ens);
        (delta == 0.1 ? lhs_01 : lhs_005) = dep.lhs;
    }
    CHECK(lhs_01 / lhs_005 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("continuous dependence rejects mismatched grids") {
    auto a = prepare("linear-constant-coeff", 500, 16, 41);
    auto b = prepare("linear-constant-coeff", 500, 8, 41);
    const auto ra = solve(a);
    const auto rb = solve(b);
    CHECK_THROWS_AS(continuous_dependence(ra.estimate, rb.estimate, a.fx.generator,
                                          b.fx.generator, a.xi, b.xi, a.trace, a.tau,
                                          a.ens),
                    ConfigError);
}

TEST_CASE("stability: identical sequence sits at the floor; 1/n shifts scale as n^-2") {
    auto p = prepare("linear-constant-coeff", 8000, 32, 43);
    const auto base = solve(p);

    std::vector<PicardResult> solved;
    std::vector<std::vector<double>> xis;
    for (int n : {1, 2, 4}) {
        std::vector<double> xi_n = p.xi;
        for (double& v : xi_n) v += 1.0 / n;
        xis.push_back(xi_n);
        solved.push_back(picard_solve(p.fx.generator, xis.back(), p.ens, p.tau, p.trace.cum,
                                      p.settings));
    }
    std::vector<const SolutionEstimate*> seq;
    std::vector<const GeneratorSpec*> gens;
    std::vector<std::span<const double>> xspans;
    for (std::size_t i = 0; i < solved.size(); ++i) {
        seq.push_back(&solved[i].estimate);
        gens.push_back(&p.fx.generator);
        xspans.emplace_back(xis[i]);
    }
    const auto table = stability_sequence(base.estimate, p.fx.generator, p.xi, seq, gens,
                                          xspans, p.trace, p.tau, p.ens);
    REQUIRE(table.rows.size() == 3);
    CHECK(table.monotone_within_slack);
    // Squared-norm scaling: distance(n) ~ n^-2 means successive ratios of 4.
    CHECK(table.rows[0].distance / table.rows[1].distance == doctest::Approx(4.0).epsilon(0.05));
    CHECK(table.rows[1].distance / table.rows[2].distance == doctest::Approx(4.0).epsilon(0.05));

    // Identical sequence: both columns at the floor.
    std::vector<const SolutionEstimate*> same = {&base.estimate};
    std::vector<const GeneratorSpec*> same_g = {&p.fx.generator};
    std::vector<std::span<const double>> same_xi = {std::span<const double>{p.xi}};
    const auto floor_table = stability_sequence(base.estimate, p.fx.generator, p.xi, same,
                                                same_g, same_xi, p.trace, p.tau, p.ens);
    CHECK(floor_table.rows[0].premise == 0.0);
    CHECK(floor_table.rows[0].distance == 0.0);
}

TEST_SUITE_END();
