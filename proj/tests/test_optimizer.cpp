#include "test_support.hpp"

#include "strata/local_solver.hpp"
#include "strata/optimizer.hpp"

#include <gtest/gtest.h>

#include <random>

namespace strata {
namespace {

TEST(MinimizeBox, BoundedQuadratic) {
    // min (x-2)^2 + 10 (y+1)^2 on [0,1]^2 -> (1, 0)
    const local::Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) *g = Eigen::Vector2d(2 * (x(0) - 2), 20 * (x(1) + 1));
        return (x(0) - 2) * (x(0) - 2) + 10 * (x(1) + 1) * (x(1) + 1);
    };
    const auto r = local::minimize_box(f, Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x(0), 1.0, 1e-12);
    EXPECT_NEAR(r.x(1), 0.0, 1e-12);
}

TEST(MinimizeBox, Rosenbrock) {
    const local::Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        const double a = 1 - x(0), b = x(1) - x(0) * x(0);
        if (g) *g = Eigen::Vector2d(-2 * a - 400 * x(0) * b, 200 * b);
        return a * a + 100 * b * b;
    };
    local::BoxOptions opt;
    opt.max_iterations = 500;
    const auto r = local::minimize_box(f, Eigen::Vector2d(-1.2, 1), Eigen::Vector2d(-5, -5), Eigen::Vector2d(5, 5), opt);
    EXPECT_NEAR(r.x(0), 1.0, 1e-5);
    EXPECT_NEAR(r.x(1), 1.0, 1e-5);
}

TEST(AugmentedLagrangian, DiskConstraint) {
    // min x + y  s.t. x^2 + y^2 <= 1 -> (-1/sqrt2, -1/sqrt2)
    const local::ConstrainedObjective eval = [](const Eigen::VectorXd& x, bool grads, local::Evaluation& ev) {
        ev.value = x.sum();
        ev.constraints = Eigen::VectorXd::Constant(1, x.squaredNorm() - 1);
        if (grads) {
            ev.gradient = Eigen::Vector2d(1, 1);
            ev.jacobian = 2 * x.transpose();
        }
    };
    const auto r = local::minimize_constrained(eval, 1, Eigen::Vector2d(0.3, 0.1), Eigen::Vector2d(-3, -3),
                                               Eigen::Vector2d(3, 3));
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x(0), -std::sqrt(0.5), 1e-5);
    EXPECT_NEAR(r.x(1), -std::sqrt(0.5), 1e-5);
    EXPECT_NEAR(r.multipliers(0), std::sqrt(0.5), 1e-4);
}

TEST(SettleTimeProblem, ScaledJacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        std::uniform_int_distribution<int> Md(2, 4), Sd(1, 3);
        const int M = Md(rng), S = Sd(rng), U = 2;
        const TaskGraph graph = TaskGraph::uniform(M, testing::complete_edges(M), S, 0.5);
        const Eigen::MatrixXd mu = testing::random_matrix(S, U, 0.5, 5, rng);
        const auto model = build_trait_model(mu, testing::random_matrix(S, U, 0.1, 1, rng),
                                             {TraitKind::cumulative(), TraitKind::cumulative()},
                                             std::vector<int>(static_cast<std::size_t>(S), 10));
        const AbstractState x0(testing::random_matrix(M, S, 0, 10, rng));
        const Eigen::MatrixXd target = testing::random_matrix(M, S, 0, 10, rng) * mu;
        OptimizerConfig cfg;
        cfg.eps1 = cfg.eps2 = 5.0;
        cfg.eps_var = 50.0;
        for (Goal goal : {Goal::ExactMatching, Goal::MinimumMatching}) {
            detail::SettleTimeProblem p(graph, model, x0, target, goal, cfg);
            Eigen::VectorXd z = testing::random_matrix(p.size(), 1, 0.1, 0.9, rng);
            z(p.size() - 1) = 0.2 + 0.5 * trial / 10.0;
            local::Evaluation ev;
            p.evaluate(z, true, ev);
            for (int c = 0; c < 3; ++c) {
                const auto fd = testing::central_difference(
                    [&](const Eigen::VectorXd& zz) {
                        local::Evaluation e;
                        p.evaluate(zz, false, e);
                        return e.constraints(c);
                    },
                    z);
                EXPECT_LT(testing::relative_error(ev.jacobian.row(c).transpose(), fd, 1e-6), 1e-5)
                    << "trial " << trial << " constraint " << c;
            }
        }
    }
}

TEST(Solve, RunningExampleExactMatching) {
    const Scenario sc = testing::fixture("running_example.json");
    const auto report = solve(sc);
    EXPECT_TRUE(report.converged);
    EXPECT_TRUE(within_bounds(report.residuals, report.bounds));
    EXPECT_NO_THROW(validate_plan(sc.graph, report.plan));
    EXPECT_EQ(report.restarts_used, sc.config.meta_iterations);
    // Moving 25 agents one hop at rate <= 0.02 needs e^{-0.02 tau} small.
    EXPECT_GT(report.plan.settle_time, 50.0);
    EXPECT_LT(report.plan.settle_time, 400.0);
    const auto again = plan_residuals(report.plan, sc.initial_state, binarize_noncumulative(sc.model), sc.target,
                                      Goal::ExactMatching, sc.config.nu);
    EXPECT_EQ(again, report.residuals);
}

TEST(Solve, HistoryNeverIncreases) {
    const Scenario sc = testing::fixture("ctf.json");
    const auto report = solve(sc);
    ASSERT_EQ(static_cast<int>(report.best_history.size()), sc.config.meta_iterations);
    for (std::size_t i = 1; i < report.best_history.size(); ++i)
        EXPECT_LE(report.best_history[i], report.best_history[i - 1]);
    EXPECT_TRUE(report.converged);
    EXPECT_EQ(report.best_history.back(), report.plan.settle_time);
}

TEST(Solve, SameSeedSamePlan) {
    const Scenario sc = testing::fixture("ctf.json");
    const auto a = solve(sc);
    const auto b = solve(sc);
    EXPECT_EQ(a.plan.settle_time, b.plan.settle_time);
    for (std::size_t s = 0; s < a.plan.rate_matrices.size(); ++s)
        EXPECT_EQ(a.plan.rate_matrices[s], b.plan.rate_matrices[s]);
    EXPECT_EQ(a.best_history, b.best_history);
}

TEST(Solve, FeasibleAtStartGivesShortSettleTime) {
    const auto model = testing::example_model();
    Scenario sc{"start", model, TaskGraph::uniform(5, testing::ring_edges(5), 4, 0.02),
                testing::example_initial_state(), trait_mean(testing::example_initial_state(), model),
                Goal::ExactMatching, {}};
    sc.config.eps1 = sc.config.eps2 = 1e4;
    sc.config.eps_var = 1e12;
    sc.config.meta_iterations = 3;
    const auto report = solve(sc);
    EXPECT_TRUE(report.converged);
    const double tau_ref = 5 / 0.02;
    EXPECT_LT(report.plan.settle_time, 1e-3 * tau_ref);
}

TEST(Solve, UnreachableTargetReportsNonConvergence) {
    const auto model = testing::example_model();
    Scenario sc{"far", model, TaskGraph::uniform(5, testing::ring_edges(5), 4, 0.02),
                testing::example_initial_state(), 10.0 * trait_mean(testing::example_initial_state(), model),
                Goal::MinimumMatching, {}};
    const double e = 0.05 * sc.target.norm();
    sc.config.eps1 = sc.config.eps2 = e * e;
    sc.config.eps_var = 1e12;
    sc.config.meta_iterations = 3;
    SolveReport report;
    EXPECT_NO_THROW(report = solve(sc));
    EXPECT_FALSE(report.converged);
    for (double t : report.best_history) EXPECT_TRUE(std::isinf(t));
    EXPECT_GT(report.residuals.at(kTraitErrorResidual), report.bounds.at(kTraitErrorResidual));
}

TEST(Solve, MinimumMatchingOnRunningExample) {
    const Scenario sc = testing::fixture("running_example.json");
    const auto report = solve(sc, Goal::MinimumMatching, sc.config);
    EXPECT_TRUE(report.converged);
    EXPECT_EQ(report.goal, Goal::MinimumMatching);
}

TEST(Solve, RejectsBadConfig) {
    Scenario sc = testing::fixture("ctf.json");
    OptimizerConfig cfg = sc.config;
    cfg.eps1 = 0;
    EXPECT_THROW(solve(sc, sc.goal, cfg), Error);
    cfg = sc.config;
    cfg.meta_iterations = 0;
    EXPECT_THROW(solve(sc, sc.goal, cfg), Error);
}

} // namespace
} // namespace strata
