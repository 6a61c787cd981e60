#pragma once

// Binary-trait baseline: species either have a trait or not, and the target is
// rescaled into "number of capable agents" units before running the same
// settle-time optimization.

#include "strata/model.hpp"
#include "strata/optimizer.hpp"
#include "strata/scenario.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace strata {

struct BinaryBootstrap {
    Eigen::MatrixXd q_bar;  // S x U, entries in {0, 1}
    Eigen::MatrixXd y_bar;  // M x U, nonnegative integers
};

/// sign(mu_Q): 1 where a species has a positive mean trait value.
inline Eigen::MatrixXd binary_trait_matrix(const TraitModel& model) {
    return (model.mean().array() > 0.0).cast<double>().matrix();
}

/// floor(Y*_mi / mean_s mu_si), column by column.
inline Eigen::MatrixXd binary_target(const Eigen::MatrixXd& target, const TraitModel& model) {
    require(target.cols() == model.num_traits(), ErrorKind::DimensionMismatch, "target must have one column per trait");
    const Eigen::RowVectorXd means = model.mean().colwise().mean();
    Eigen::MatrixXd y(target.rows(), target.cols());
    for (Eigen::Index u = 0; u < target.cols(); ++u) {
        if (target.col(u).isZero(0.0)) {
            y.col(u).setZero();
            continue;
        }
        require(means(u) > 0.0, ErrorKind::ZeroMeanTrait,
                "trait '" + model.labels().trait_names[static_cast<std::size_t>(u)] +
                    "' is demanded but no species has it");
        for (Eigen::Index m = 0; m < target.rows(); ++m) y(m, u) = std::floor(target(m, u) / means(u));
    }
    return y;
}

inline BinaryBootstrap binary_bootstrap(const Scenario& sc) {
    return {binary_trait_matrix(sc.model), binary_target(sc.target, sc.model)};
}

/// The scenario the baseline actually optimizes: the binary model (all traits
/// cumulative, zero variance) against the rescaled target. Only eps1 changes,
/// scaled so it stays the same fraction of the target norm.
inline Scenario baseline_scenario(const Scenario& sc) {
    const auto boot = binary_bootstrap(sc);
    const int S = sc.model.num_species();
    const int U = sc.model.num_traits();
    TraitModel binary = build_trait_model(boot.q_bar, Eigen::MatrixXd::Zero(S, U),
                                          std::vector<TraitKind>(static_cast<std::size_t>(U), TraitKind::cumulative()),
                                          sc.model.species_sizes(), sc.model.labels());
    Scenario out{sc.name + "-baseline", std::move(binary), sc.graph, sc.initial_state, boot.y_bar, sc.goal, sc.config};
    const double target_norm = sc.target.norm();
    if (target_norm > 0.0) {
        const double ratio = boot.y_bar.norm() / target_norm;
        out.config.eps1 = ratio > 0.0 ? sc.config.eps1 * ratio * ratio : sc.config.eps1;
    }
    return out;
}

/// Solves in the binary space, then re-measures the plan against the original
/// model and target; `converged` refers to the original requirements.
inline SolveReport solve_baseline(const Scenario& sc, Goal goal, const OptimizerConfig& config) {
    validate_scenario(sc);
    Scenario binary = baseline_scenario(sc);
    const double eps1_scale = binary.config.eps1 / sc.config.eps1;
    binary.config = config;
    binary.config.eps1 = config.eps1 * eps1_scale;
    SolveReport report = solve(binary, goal, binary.config);

    const TraitModel original = binarize_noncumulative(sc.model);
    report.residuals = plan_residuals(report.plan, sc.initial_state, original, sc.target, goal, config.nu);
    report.bounds = residual_bounds(config);
    report.converged = within_bounds(report.residuals, report.bounds);
    return report;
}

inline SolveReport solve_baseline(const Scenario& sc) { return solve_baseline(sc, sc.goal, sc.config); }

} // namespace strata
