#pragma once

#include "strata/dynamics.hpp"
#include "strata/model.hpp"
#include "strata/solver_types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace strata {

/// Everything one optimization needs: team, graph, start, target, thresholds.
/// `model` is stored as provided (non-cumulative traits not yet binarized).
struct Scenario {
    std::string name;
    TraitModel model;
    TaskGraph graph;
    AbstractState initial_state;
    Eigen::MatrixXd target;
    Goal goal = Goal::ExactMatching;
    OptimizerConfig config;

    friend bool operator==(const Scenario& a, const Scenario& b) {
        return a.name == b.name && a.model == b.model && a.graph == b.graph &&
               a.initial_state == b.initial_state && a.target == b.target && a.goal == b.goal &&
               a.config == b.config;
    }
};

/// Cross-checks dimensions and populations; throws InvariantViolation naming
/// the first failed check.
inline void validate_scenario(const Scenario& sc) {
    const int S = sc.model.num_species();
    const int U = sc.model.num_traits();
    const int M = sc.graph.num_tasks();
    require(sc.graph.num_species() == S, ErrorKind::InvariantViolation,
            "rate ceilings have " + std::to_string(sc.graph.num_species()) + " species rows, model has " +
                std::to_string(S));
    require(sc.initial_state.num_tasks() == M && sc.initial_state.num_species() == S, ErrorKind::InvariantViolation,
            "initial state must be " + std::to_string(M) + " x " + std::to_string(S));
    require(sc.target.rows() == M && sc.target.cols() == U, ErrorKind::InvariantViolation,
            "target must be " + std::to_string(M) + " x " + std::to_string(U));
    for (Eigen::Index i = 0; i < sc.target.rows(); ++i) {
        for (Eigen::Index j = 0; j < sc.target.cols(); ++j) {
            require(std::isfinite(sc.target(i, j)) && sc.target(i, j) >= 0.0, ErrorKind::InvariantViolation,
                    "target entry (" + std::to_string(i) + "," + std::to_string(j) + ") must be finite and >= 0");
        }
    }
    const Eigen::VectorXd totals = sc.initial_state.species_totals();
    for (int s = 0; s < S; ++s) {
        const double n = sc.model.species_sizes()[static_cast<std::size_t>(s)];
        require(std::abs(totals(s) - n) <= kTolerances.conservation_relative * n, ErrorKind::InvariantViolation,
                "initial state column for species '" + sc.model.labels().species_names[static_cast<std::size_t>(s)] +
                    "' sums to " + std::to_string(totals(s)) + ", expected " + std::to_string(static_cast<int>(n)));
    }
    validate_config(sc.config);
}

} // namespace strata
