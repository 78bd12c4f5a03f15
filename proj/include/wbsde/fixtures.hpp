#pragma once

#include "wbsde/ensemble.hpp"
#include "wbsde/feynman_kac.hpp"
#include "wbsde/generator.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wbsde {

/// A ready-to-solve BSDE problem: driver, terminal map, forward state model,
/// weights, and (when known) the closed-form root value.
struct Fixture {
    std::string id;
    std::string description;
    std::string coefficients;  // declared (mu, nu) recipe, human-readable
    std::string alpha_recipe;
    std::string exercises;  // which results the fixture stresses

    GeneratorSpec generator;
    TerminalCondition terminal;
    SdeSpec sde;
    std::vector<double> x0;
    WeightParams weights{1.0, 2.0, 2.0};
    double t_end = 1.0;
    int default_steps = 64;
    bool capped_infinite = false;  // horizon truncates an infinite tau
    bool implicit_y = false;
    std::optional<double> y0_oracle;
};

struct FixtureInfo {
    std::string id;
    std::string description;
    std::string coefficients;
    std::string alpha_recipe;
    std::string exercises;
    bool is_pde = false;
};

std::vector<FixtureInfo> fixture_catalog();

Fixture make_fixture(const std::string& id);

/// PDE fixtures for the Feynman-Kac harness ("heat-quadratic",
/// "elliptic-interval").
PdeProblemSpec make_pde_fixture(const std::string& id);

bool is_pde_fixture(const std::string& id);

}  // namespace wbsde
