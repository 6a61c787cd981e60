#pragma once

#include "strata/dynamics.hpp"
#include "strata/local_solver.hpp"
#include "strata/objectives.hpp"
#include "strata/scenario.hpp"
#include "strata/solver_types.hpp"

#include <Eigen/Dense>

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace strata {

namespace detail {

// Decision vector z = [u_00 .. u_{S-1,E-1}, v] with k = u * k_max and
// tau = v * tau_ref, so every coordinate lives on a unit-ish scale.
class SettleTimeProblem {
public:
    static constexpr int kNumConstraints = 3;
    static constexpr double kTauLower = 1e-6;   // in units of tau_ref
    static constexpr double kTauUpper = 50.0;
    static constexpr double kMargin = 1e-4;     // constraints solved to (1 - margin) of their bound

    SettleTimeProblem(const TaskGraph& graph, TraitModel model, AbstractState x0, Eigen::MatrixXd target, Goal goal,
                      const OptimizerConfig& config)
        : graph_(graph), model_(std::move(model)), x0_(std::move(x0)), target_(std::move(target)), goal_(goal),
          config_(config) {
        S_ = graph_.num_species();
        E_ = graph_.num_edges();
        tau_ref_ = E_ > 0 ? graph_.num_tasks() / graph_.rate_ceiling().mean() : 1.0;
        bounds_ = {config_.eps1, config_.eps2, config_.eps_var};
    }

    int size() const { return S_ * E_ + 1; }
    double tau_ref() const { return tau_ref_; }
    const TaskGraph& graph() const { return graph_; }

    Eigen::VectorXd lower() const {
        Eigen::VectorXd lo = Eigen::VectorXd::Zero(size());
        lo(size() - 1) = kTauLower;
        return lo;
    }
    Eigen::VectorXd upper() const {
        Eigen::VectorXd hi = Eigen::VectorXd::Ones(size());
        hi(size() - 1) = kTauUpper;
        return hi;
    }

    Eigen::VectorXd initial_point() const {
        Eigen::VectorXd z = Eigen::VectorXd::Constant(size(), 0.5);
        z(size() - 1) = 1.0;  // tau = M / mean k_max
        return z;
    }

    double tau(const Eigen::VectorXd& z) const { return z(size() - 1) * tau_ref_; }

    Eigen::MatrixXd rates(const Eigen::VectorXd& z) const {
        Eigen::MatrixXd r(S_, E_);
        for (int s = 0; s < S_; ++s)
            for (int e = 0; e < E_; ++e)
                r(s, e) = std::clamp(z(s * E_ + e), 0.0, 1.0) * graph_.rate_ceiling()(s, e);
        return r;
    }

    std::vector<Eigen::MatrixXd> matrices(const Eigen::VectorXd& z) const {
        const Eigen::MatrixXd r = rates(z);
        std::vector<Eigen::MatrixXd> Ks;
        Ks.reserve(static_cast<std::size_t>(S_));
        for (int s = 0; s < S_; ++s) {
            const Eigen::VectorXd row = r.row(s).transpose();
            Ks.push_back(build_rate_matrix(graph_, s, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
        }
        return Ks;
    }

    void evaluate(const Eigen::VectorXd& z, bool want_gradients, local::Evaluation& ev) {
        const auto Ks = matrices(z);
        const double t = tau(z);
        const int n = size();
        ev.value = z(n - 1);
        ev.constraints.resize(kNumConstraints);

        std::array<double, kNumConstraints> g{};
        std::array<Eigen::VectorXd, kNumConstraints> dg;
        if (want_gradients) {
            const auto grads = constraint_gradients(t, Ks, x0_, model_, target_, goal_, config_.nu);
            if (grads.used_fallback) ++fallbacks_;
            const std::array<const GradientTerm*, kNumConstraints> terms{&grads.trait_error, &grads.steady_state,
                                                                        &grads.variance_norm};
            for (int i = 0; i < kNumConstraints; ++i) {
                g[static_cast<std::size_t>(i)] = terms[static_cast<std::size_t>(i)]->value;
                const Eigen::MatrixXd dr = rate_gradient(graph_, terms[static_cast<std::size_t>(i)]->d_rate_matrix);
                Eigen::VectorXd d(n);
                for (int s = 0; s < S_; ++s)
                    for (int e = 0; e < E_; ++e) d(s * E_ + e) = dr(s, e) * graph_.rate_ceiling()(s, e);
                d(n - 1) = terms[static_cast<std::size_t>(i)]->d_tau * tau_ref_;
                dg[static_cast<std::size_t>(i)] = d;
            }
        } else {
            g[0] = trait_error(goal_, t, Ks, x0_, model_, target_);
            g[1] = error_steady(t, Ks, x0_, config_.nu);
            g[2] = variance_norm(t, Ks, x0_, model_);
        }

        // c_i = sqrt(g_i / eps_i) - (1 - margin): same feasible set as g_i <= eps_i,
        // but linear in the residual norm.
        if (want_gradients) {
            ev.gradient = Eigen::VectorXd::Zero(n);
            ev.gradient(n - 1) = 1.0;
            ev.jacobian.resize(kNumConstraints, n);
        }
        for (int i = 0; i < kNumConstraints; ++i) {
            const double gi = std::max(0.0, g[static_cast<std::size_t>(i)]);
            const double eps = bounds_[static_cast<std::size_t>(i)];
            const double root = std::sqrt(gi / eps);
            ev.constraints(i) = root - (1.0 - kMargin);
            if (want_gradients) {
                if (gi > 1e-300) ev.jacobian.row(i) = (0.5 / std::sqrt(gi * eps)) * dg[static_cast<std::size_t>(i)].transpose();
                else ev.jacobian.row(i).setZero();
            }
        }
    }

    int fallbacks() const { return fallbacks_; }

private:
    const TaskGraph& graph_;
    TraitModel model_;
    AbstractState x0_;
    Eigen::MatrixXd target_;
    Goal goal_;
    OptimizerConfig config_;
    int S_ = 0;
    int E_ = 0;
    double tau_ref_ = 1.0;
    std::array<double, kNumConstraints> bounds_{};
    int fallbacks_ = 0;
};

struct Candidate {
    Eigen::VectorXd z;
    double tau = std::numeric_limits<double>::infinity();
    double violation = std::numeric_limits<double>::infinity();  // max_i g_i / eps_i - 1, clipped at 0
    bool feasible = false;
};

} // namespace detail

/// Residuals of a plan recomputed through the propagation path (Pade), in the
/// units of `model` and `target`.
inline std::map<std::string, double> plan_residuals(const RatePlan& plan, const AbstractState& x0,
                                                    const TraitModel& model, const Eigen::MatrixXd& target, Goal goal,
                                                    double nu) {
    const double t = plan.settle_time;
    return {
        {kTraitErrorResidual, trait_error(goal, t, plan.rate_matrices, x0, model, target)},
        {kSteadyStateResidual, error_steady(t, plan.rate_matrices, x0, nu)},
        {kVarianceResidual, variance_norm(t, plan.rate_matrices, x0, model)},
    };
}

inline std::map<std::string, double> residual_bounds(const OptimizerConfig& config) {
    return {{kTraitErrorResidual, config.eps1}, {kSteadyStateResidual, config.eps2}, {kVarianceResidual, config.eps_var}};
}

inline bool within_bounds(const std::map<std::string, double>& residuals, const std::map<std::string, double>& bounds) {
    for (const auto& [name, value] : residuals) {
        if (!(value <= bounds.at(name))) return false;
    }
    return true;
}

/// Minimum settle-time rate optimization with basin hopping: a constrained
/// local solve from k = k_max/2, tau = M / k_max, then `meta_iterations - 1`
/// restarts from random perturbations of the best point found so far.
/// Never throws for infeasibility; `converged` reports it.
inline SolveReport solve(const Scenario& scenario, Goal goal, const OptimizerConfig& config) {
    validate_scenario(scenario);
    validate_config(config);
    const auto started = std::chrono::steady_clock::now();

    const TraitModel model = binarize_noncumulative(scenario.model);
    detail::SettleTimeProblem problem(scenario.graph, model, scenario.initial_state, scenario.target, goal, config);
    const Eigen::VectorXd lo = problem.lower();
    const Eigen::VectorXd hi = problem.upper();
    const auto bounds = residual_bounds(config);

    local::AugmentedLagrangianOptions al;
    al.inner.max_iterations = config.local_max_iters;
    al.max_evaluations = 10 * config.local_max_iters;

    auto assess = [&](const Eigen::VectorXd& z) {
        detail::Candidate c;
        c.z = z;
        c.tau = problem.tau(z);
        const RatePlan plan{problem.matrices(z), c.tau};
        const auto res = plan_residuals(plan, scenario.initial_state, model, scenario.target, goal, config.nu);
        double worst = 0.0;
        for (const auto& [name, value] : res) worst = std::max(worst, value / bounds.at(name) - 1.0);
        c.violation = std::max(0.0, worst);
        c.feasible = within_bounds(res, bounds);
        return c;
    };

    const local::ConstrainedObjective objective = [&](const Eigen::VectorXd& z, bool grads, local::Evaluation& ev) {
        problem.evaluate(z, grads, ev);
    };

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    detail::Candidate best;       // best feasible point
    detail::Candidate incumbent;  // least infeasible point while nothing is feasible
    SolveReport report;
    report.goal = goal;

    for (int it = 0; it < config.meta_iterations; ++it) {
        Eigen::VectorXd start;
        if (it == 0) {
            start = problem.initial_point();
        } else {
            start = best.feasible ? best.z : incumbent.z;
            for (int i = 0; i + 1 < start.size(); ++i) start(i) += config.step_scale * unit(rng);
            start(start.size() - 1) *= 1.0 + 0.5 * unit(rng);
            start = local::project(start, lo, hi);
        }
        const auto result = local::minimize_constrained(objective, detail::SettleTimeProblem::kNumConstraints, start,
                                                        lo, hi, al);
        const auto cand = assess(result.x);
        if (cand.feasible) {
            if (!best.feasible || cand.tau < best.tau) best = cand;
        } else if (!best.feasible && cand.violation < incumbent.violation) {
            incumbent = cand;
        }
        if (incumbent.z.size() == 0) incumbent = cand;
        report.best_history.push_back(best.feasible ? best.tau : std::numeric_limits<double>::infinity());
        report.restarts_used = it + 1;
    }

    const detail::Candidate& chosen = best.feasible ? best : incumbent;
    report.plan = RatePlan{problem.matrices(chosen.z), problem.tau(chosen.z)};
    report.residuals = plan_residuals(report.plan, scenario.initial_state, model, scenario.target, goal, config.nu);
    report.bounds = bounds;
    report.converged = within_bounds(report.residuals, report.bounds);
    report.gradient_fallbacks = problem.fallbacks();
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

inline SolveReport solve(const Scenario& scenario) { return solve(scenario, scenario.goal, scenario.config); }

} // namespace strata
