#include "wbsde/fixtures.hpp"

#include "wbsde/errors.hpp"

#include <cmath>

namespace wbsde {

namespace {

double state_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double frob_norm(std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return std::sqrt(s);
}

Fixture zero_fixture() {
    Fixture f;
    f.id = "zero";
    f.description = "xi = 0, g = 0; every functional vanishes";
    f.coefficients = "mu = 0, nu = 0";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "degenerate baseline for the inequality suite";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.depends_on_y = false;
    f.generator.depends_on_z = false;
    f.generator.eval = [](double, std::span<const double>, std::span<const double>,
                          std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    f.generator.alpha = alpha_exponential();
    f.generator.f_bound = [](double, std::span<const double>) { return 0.0; };
    f.terminal = constant_terminal({0.0});
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    f.y0_oracle = 0.0;
    return f;
}

Fixture linear_fixture() {
    const double mu0 = 0.5, nu0 = 0.3;
    Fixture f;
    f.id = "linear-constant-coeff";
    f.description = "g = 0.5 y + 0.3 z, xi = 1, T = 1; closed form y_0 = e^{1/2}";
    f.coefficients = "mu = 0.5, nu = 0.3 constant";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "closed-form agreement, contraction ratio, a priori suite, "
                  "dependence and stability scalings";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.eval = [mu0, nu0](double, std::span<const double>, std::span<const double> y,
                                  std::span<const double> z, std::span<double> out) {
        out[0] = mu0 * y[0] + nu0 * z[0];
    };
    f.generator.coeff.mu = [mu0](double, std::span<const double>) { return mu0; };
    f.generator.coeff.nu = [nu0](double, std::span<const double>) { return nu0; };
    f.generator.coeff.state_independent = true;
    f.generator.alpha = alpha_exponential();
    f.generator.f_bound = [](double, std::span<const double>) { return 0.0; };
    f.terminal = constant_terminal({1.0});
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    f.y0_oracle = std::exp(mu0);
    return f;
}

Fixture counterexample_fixture() {
    Fixture f;
    f.id = "motivational-counterexample-rho1";
    f.description = "mu = 0, nu = 1, xi = exp(int b dB - 3/2 int b^2): pathwise-explicit "
                    "linear problem whose sup moment fails at rho = 1";
    f.coefficients = "mu = 0, nu = 1 constant";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "weighted-factor motivation; weight-condition diagnostics";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.depends_on_y = false;
    f.generator.eval = [](double, std::span<const double>, std::span<const double>,
                          std::span<const double> z, std::span<double> out) { out[0] = z[0]; };
    f.generator.coeff.nu = [](double, std::span<const double>) { return 1.0; };
    f.generator.coeff.state_independent = true;
    f.generator.alpha = alpha_exponential();
    f.generator.f_bound = [](double, std::span<const double>) { return 0.0; };
    f.terminal.k = 1;
    f.terminal.eval = [](const TerminalContext& ctx, std::span<double> out) {
        // exp(sum dB_j - 3/2 sum dt) over the whole path.
        double acc = 0.0;
        for (int j = 0; j < ctx.grid->n_steps; ++j)
            acc += ctx.ensemble->increment(ctx.path, j, 0) - 1.5 * ctx.grid->dt;
        out[0] = std::exp(acc);
    };
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    return f;
}

Fixture ex38_fixture() {
    Fixture f;
    f.id = "ex3.8-exponential-z";
    f.description = "g = e^{-|B|^3 y} + |z| on a bounded horizon; general growth held by "
                    "the level process alpha";
    f.coefficients = "mu = 0, nu = 1";
    f.alpha_recipe = "1/(1 + sup_s |B_s|^3)";
    f.exercises = "general growth beyond sup_{|y|<=r} integrability";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.eval = [](double, std::span<const double> x, std::span<const double> y,
                          std::span<const double> z, std::span<double> out) {
        const double w = state_norm(x);
        out[0] = std::exp(-w * w * w * y[0]) + frob_norm(z);
    };
    f.generator.coeff.nu = [](double, std::span<const double>) { return 1.0; };
    f.generator.alpha = alpha_inverse_sup_pow(3);
    f.terminal = terminal_state_map(
        1, [](std::span<const double> x, double, std::span<double> out) {
            out[0] = std::tanh(x[0]);
        });
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    f.t_end = 1.0;
    f.implicit_y = true;
    return f;
}

Fixture ex39_fixture(double beta) {
    Fixture f;
    f.id = "ex3.9-exp-abs";
    f.description = "g = e^{-|B|^4 y} + |B|(|y| + |z|) - 1 with stochastic mu = nu = |B|";
    f.coefficients = "mu = |B_t|, nu = |B_t|";
    f.alpha_recipe = "e^{-beta int |B| - t} / sup_s (1 + |B_s|)^4";
    f.exercises = "stochastic monotonicity + Lipschitz validation, a priori suite";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.eval = [](double, std::span<const double> x, std::span<const double> y,
                          std::span<const double> z, std::span<double> out) {
        const double w = state_norm(x);
        const double w4 = w * w * w * w;
        out[0] = std::exp(-w4 * y[0]) + w * (std::abs(y[0]) + frob_norm(z)) - 1.0;
    };
    f.generator.coeff.mu = [](double, std::span<const double> x) { return state_norm(x); };
    f.generator.coeff.nu = [](double, std::span<const double> x) { return state_norm(x); };
    f.generator.alpha = alpha_running_sup_poly(beta, 4);
    f.generator.f_bound = [](double, std::span<const double>) { return 0.0; };
    f.terminal = terminal_state_map(
        1, [](std::span<const double> x, double, std::span<double> out) { out[0] = x[0]; });
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    f.t_end = 0.25;  // keeps E[e^{rho int |B|^2}] (and its variance) finite
    f.default_steps = 32;
    f.implicit_y = true;  // the e^{-|B|^4 y} term is stiff under explicit stepping
    return f;
}

Fixture ex310_fixture(double rho) {
    Fixture f;
    f.id = "ex3.10-infinite-horizon";
    f.description = "tau = +infinity approximated by a capped horizon; driver decays "
                    "like e^{-t} with nu_t^2 = |B_t| 1_{t<=1} + 1/(1+t^2)";
    f.coefficients = "mu = 0, nu = sqrt(|B_t| 1_{t<=1} + 1/(1+t^2))";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "capped infinite horizon with reported truncation mass";
    f.generator.k = 1;
    f.generator.d = 1;
    // State is augmented: x[0] = B_t, x[1] = int_0^{t n 1} |B_s| ds.
    f.generator.eval = [rho](double t, std::span<const double> x, std::span<const double> y,
                             std::span<const double> z, std::span<double> out) {
        const double nu = std::sqrt(std::abs(x[0]) * (t <= 1.0 ? 1.0 : 0.0) +
                                    1.0 / (1.0 + t * t));
        out[0] = std::exp(-0.5 * rho * x[1] - t) * std::exp(std::max(0.0, -y[0])) +
                 nu * std::sin(frob_norm(z));
    };
    f.generator.coeff.nu = [](double t, std::span<const double> x) {
        return std::sqrt(std::abs(x[0]) * (t <= 1.0 ? 1.0 : 0.0) + 1.0 / (1.0 + t * t));
    };
    f.generator.alpha = alpha_exponential();
    f.terminal = terminal_state_map(
        1, [](std::span<const double> x, double, std::span<double> out) {
            out[0] = std::tanh(x[0]);
        });
    f.sde.state_dim = 2;
    f.sde.d = 1;
    f.sde.drift = [](double t, std::span<const double> x, std::span<double> out) {
        out[0] = 0.0;
        out[1] = (t <= 1.0) ? std::abs(x[0]) : 0.0;
    };
    f.sde.diffusion = [](double, std::span<const double>, std::span<double> out) {
        out[0] = 1.0;
        out[1] = 0.0;
    };
    f.x0 = {0.0, 0.0};
    f.t_end = 4.0;
    f.default_steps = 128;
    f.capped_infinite = true;
    return f;
}

Fixture ex311_fixture() {
    Fixture f;
    f.id = "ex3.11-mixed-regimes";
    f.description = "g = |B|^6 (1 - e^{y+}) + |B| 1_{t<=1} sin y + sqrt(|B| 1_{t<=1}) |z|; "
                    "coefficients switch off after the stopping time";
    f.coefficients = "mu = |B_t| 1_{t<=1}, nu = sqrt(|B_t| 1_{t<=1})";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "coefficients vanishing after a finite stopping time";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.eval = [](double t, std::span<const double> x, std::span<const double> y,
                          std::span<const double> z, std::span<double> out) {
        const double w = state_norm(x);
        const double w6 = w * w * w * w * w * w;
        const double on = t <= 1.0 ? 1.0 : 0.0;
        out[0] = w6 * (1.0 - std::exp(std::max(0.0, y[0]))) + w * on * std::sin(y[0]) +
                 std::sqrt(w * on) * frob_norm(z);
    };
    f.generator.coeff.mu = [](double t, std::span<const double> x) {
        return t <= 1.0 ? state_norm(x) : 0.0;
    };
    f.generator.coeff.nu = [](double t, std::span<const double> x) {
        return t <= 1.0 ? std::sqrt(state_norm(x)) : 0.0;
    };
    f.generator.alpha = alpha_exponential();
    f.terminal = terminal_state_map(
        1, [](std::span<const double> x, double, std::span<double> out) {
            out[0] = std::tanh(x[0]);
        });
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    f.t_end = 2.0;
    f.capped_infinite = true;
    f.implicit_y = true;
    return f;
}

Fixture ex312_fixture(const WeightParams& wp) {
    Fixture f;
    f.id = "ex3.12-polynomial-monotone";
    f.description = "k = 2 polynomial-monotone driver |B|^3 (-y1^5 + y2, -y2^3 - y1) "
                    "+ |B| (sin|z|, |z|); no exponential moment for int a";
    f.coefficients = "mu = |B_t|^3, nu = sqrt(2) |B_t|";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "multidimensional stochastic monotonicity with polynomial growth";
    f.weights = wp;
    f.generator.k = 2;
    f.generator.d = 1;
    f.generator.eval = [](double, std::span<const double> x, std::span<const double> y,
                          std::span<const double> z, std::span<double> out) {
        const double w = state_norm(x);
        const double w3 = w * w * w;
        const double zn = frob_norm(z);
        const double y1 = y[0], y2 = y[1];
        out[0] = w3 * (-y1 * y1 * y1 * y1 * y1 + y2) + w * std::sin(zn);
        out[1] = w3 * (-y2 * y2 * y2 - y1) + w * zn;
    };
    f.generator.coeff.mu = [](double, std::span<const double> x) {
        const double w = state_norm(x);
        return w * w * w;
    };
    // The |.|-difference of (sin|z|, |z|) costs a sqrt(2) factor over a single
    // component, so the declared Lipschitz process carries it.
    f.generator.coeff.nu = [](double, std::span<const double> x) {
        return std::sqrt(2.0) * state_norm(x);
    };
    f.generator.alpha = alpha_exponential();
    f.generator.f_bound = [](double, std::span<const double>) { return 0.0; };
    f.terminal.k = 2;
    f.terminal.eval = [wp](const TerminalContext& ctx, std::span<double> out) {
        // xi = e^{-int_0^tau a} (B_tau, -B_tau)/sqrt(2) with a = beta mu + rho nu^2 / 2.
        double integral = 0.0;
        const int sdim = ctx.state_dim;
        for (int i = 0; i < ctx.exit_index; ++i) {
            const double w = std::abs(ctx.path_states[static_cast<std::size_t>(i) * sdim]);
            integral += (wp.beta * w * w * w + wp.rho * w * w) * ctx.grid->dt;
        }
        const double b = ctx.exit_state[0];
        out[0] = std::exp(-integral) * b / std::sqrt(2.0);
        out[1] = -std::exp(-integral) * b / std::sqrt(2.0);
    };
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    f.t_end = 1.0;
    f.default_steps = 32;
    f.implicit_y = true;
    return f;
}

Fixture violator_quadratic() {
    Fixture f;
    f.id = "violator-quadratic-y";
    f.description = "g = y^2 with declared mu = 0: breaks one-sided monotonicity";
    f.coefficients = "mu = 0 (declared), nu = 0";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "assumption validator failure path";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.depends_on_z = false;
    f.generator.eval = [](double, std::span<const double>, std::span<const double> y,
                          std::span<const double>, std::span<double> out) {
        out[0] = y[0] * y[0];
    };
    f.generator.alpha = alpha_exponential();
    f.terminal = constant_terminal({0.0});
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    return f;
}

Fixture violator_lipschitz() {
    Fixture f;
    f.id = "violator-lipschitz-z";
    f.description = "g = 2|z| with declared nu = 1: breaks the z Lipschitz bound";
    f.coefficients = "mu = 0, nu = 1 (declared)";
    f.alpha_recipe = "e^{-t}";
    f.exercises = "assumption validator failure path";
    f.generator.k = 1;
    f.generator.d = 1;
    f.generator.depends_on_y = false;
    f.generator.eval = [](double, std::span<const double>, std::span<const double>,
                          std::span<const double> z, std::span<double> out) {
        out[0] = 2.0 * frob_norm(z);
    };
    f.generator.coeff.nu = [](double, std::span<const double>) { return 1.0; };
    f.generator.alpha = alpha_exponential();
    f.terminal = constant_terminal({0.0});
    f.sde = brownian_sde(1);
    f.x0 = {0.0};
    return f;
}

}  // namespace

std::vector<FixtureInfo> fixture_catalog() {
    std::vector<FixtureInfo> out;
    const auto add = [&](const Fixture& f) {
        out.push_back({f.id, f.description, f.coefficients, f.alpha_recipe, f.exercises, false});
    };
    add(zero_fixture());
    add(linear_fixture());
    add(counterexample_fixture());
    add(ex38_fixture());
    add(ex39_fixture(1.0));
    add(ex310_fixture(2.0));
    add(ex311_fixture());
    add(ex312_fixture(WeightParams{1.0, 2.0, 2.0}));
    add(violator_quadratic());
    add(violator_lipschitz());
    out.push_back({"heat-quadratic",
                   "parabolic probe: b = 0, sigma = 1, g = 0, h = x^2; u = x^2 + (T - t)",
                   "bar b = 0, bar sigma = 0", "n/a",
                   "parabolic representation vs finite differences", true});
    out.push_back({"elliptic-interval",
                   "elliptic probe: D = (-1,1), sigma = sqrt(2), g = 2, h = 0; u = 1 - x^2",
                   "bar b = 0, bar sigma = 0", "n/a",
                   "elliptic representation vs exit-time solution", true});
    return out;
}

Fixture make_fixture(const std::string& id) {
    if (id == "zero") return zero_fixture();
    if (id == "linear-constant-coeff") return linear_fixture();
    if (id == "motivational-counterexample-rho1") return counterexample_fixture();
    if (id == "ex3.8-exponential-z") return ex38_fixture();
    if (id == "ex3.9-exp-abs") return ex39_fixture(1.0);
    if (id == "ex3.10-infinite-horizon") return ex310_fixture(2.0);
    if (id == "ex3.11-mixed-regimes") return ex311_fixture();
    if (id == "ex3.12-polynomial-monotone")
        return ex312_fixture(WeightParams{1.0, 2.0, 2.0});
    if (id == "violator-quadratic-y") return violator_quadratic();
    if (id == "violator-lipschitz-z") return violator_lipschitz();
    throw ConfigError("unknown fixture id: " + id);
}

bool is_pde_fixture(const std::string& id) {
    return id == "heat-quadratic" || id == "elliptic-interval";
}

PdeProblemSpec make_pde_fixture(const std::string& id) {
    if (id == "heat-quadratic") {
        PdeProblemSpec spec;
        spec.sde = brownian_sde(1);
        spec.h = [](std::span<const double> x) { return x[0] * x[0]; };
        spec.generator.k = 1;
        spec.generator.d = 1;
        spec.generator.depends_on_y = false;
        spec.generator.depends_on_z = false;
        spec.generator.eval = [](double, std::span<const double>, std::span<const double>,
                                 std::span<const double>, std::span<double> out) {
            out[0] = 0.0;
        };
        spec.growth_k = 2.0;
        spec.growth_p = 1.0;
        spec.growth_q = 1.0;
        spec.t_end = 1.0;
        return spec;
    }
    if (id == "elliptic-interval") {
        PdeProblemSpec spec;
        spec.sde.state_dim = 1;
        spec.sde.d = 1;
        spec.sde.diffusion = [](double, std::span<const double>, std::span<double> out) {
            out[0] = std::sqrt(2.0);
        };
        spec.h = [](std::span<const double>) { return 0.0; };
        spec.generator.k = 1;
        spec.generator.d = 1;
        spec.generator.depends_on_y = false;
        spec.generator.depends_on_z = false;
        spec.generator.eval = [](double, std::span<const double>, std::span<const double>,
                                 std::span<const double>, std::span<double> out) {
            out[0] = 2.0;
        };
        spec.domain = interval_domain(-1.0, 1.0);
        spec.t_cap = 3.0;
        spec.growth_k = 2.0;
        spec.growth_q = 1.0;
        return spec;
    }
    throw ConfigError("unknown PDE fixture id: " + id);
}

}  // namespace wbsde
