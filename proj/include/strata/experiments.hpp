#pragma once

// Mismatch metrics, randomized scenarios and the strategy benchmark.

#include "strata/baseline.hpp"
#include "strata/dynamics.hpp"
#include "strata/model.hpp"
#include "strata/optimizer.hpp"
#include "strata/scenario.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace strata {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Percent mismatch curves. delta_g1 = 100 ||Y* - X mu||_F / ||Y*||_F and
/// delta_g2 the same with only the deficit max(Y* - X mu, 0) counted.
struct MetricSeries {
    std::vector<double> times;
    std::vector<double> delta_g1_mean;
    std::vector<double> delta_g2_mean;
    std::vector<MeanStd> delta_g1_sampled;
    std::vector<MeanStd> delta_g2_sampled;
};

inline std::pair<double, double> mismatch_at(const Eigen::MatrixXd& X, const Eigen::MatrixXd& traits,
                                             const Eigen::MatrixXd& target) {
    const double denom = target.norm();
    require(denom > 0.0, ErrorKind::ZeroTarget, "mismatch is undefined for an all-zero target");
    const Eigen::MatrixXd r = target - X * traits;
    return {100.0 * r.norm() / denom, 100.0 * r.cwiseMax(0.0).norm() / denom};
}

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) return out;
    double sum = 0.0;
    for (double x : v) sum += x;
    out.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return out;
}

/// Mismatch of `plan` started from the scenario's initial state at each time.
/// Sampled variants draw `q_samples` trait matrices once and reuse them along
/// the whole curve.
inline MetricSeries mismatch_metrics(const RatePlan& plan, const Scenario& sc, const std::vector<double>& times,
                                     int q_samples, std::uint64_t seed) {
    validate_scenario(sc);
    require(q_samples >= 0, ErrorKind::InvalidArgument, "q_samples must be nonnegative");
    require(sc.target.norm() > 0.0, ErrorKind::ZeroTarget, "mismatch is undefined for an all-zero target");
    const TraitModel model = binarize_noncumulative(sc.model);
    std::mt19937_64 rng(seed);
    std::vector<Eigen::MatrixXd> draws;
    for (int i = 0; i < q_samples; ++i) draws.push_back(sample_trait_matrix(model, rng));

    MetricSeries out;
    out.times = times;
    for (double t : times) {
        const Eigen::MatrixXd X = propagate(sc.initial_state, plan, t).counts();
        const auto [g1, g2] = mismatch_at(X, model.mean(), sc.target);
        out.delta_g1_mean.push_back(g1);
        out.delta_g2_mean.push_back(g2);
        std::vector<double> s1, s2;
        for (const auto& Q : draws) {
            const auto [a, b] = mismatch_at(X, Q, sc.target);
            s1.push_back(a);
            s2.push_back(b);
        }
        out.delta_g1_sampled.push_back(mean_std(s1));
        out.delta_g2_sampled.push_back(mean_std(s2));
    }
    return out;
}

struct BenchParams {
    int num_tasks = 8;
    int num_traits = 5;
    int num_noncumulative = 2;  // the last traits are non-cumulative
    int num_species = 5;
    int agents_per_species = 200;
    int runs = 100;
    double rate_ceiling = 0.02;
    double eps_fraction = 0.05;
    int q_samples = 10;
    int meta_iterations = 20;
    int time_points = 100;
    double extra_edge_probability = 0.25;
    std::uint64_t seed = 0;
};

inline void validate_bench_params(const BenchParams& p) {
    require(p.num_tasks >= 2 && p.num_traits >= 1 && p.num_species >= 1 && p.agents_per_species >= 1 && p.runs >= 1,
            ErrorKind::InvalidArgument, "bench sizes must be positive (at least two tasks)");
    require(p.num_noncumulative >= 0 && p.num_noncumulative <= p.num_traits, ErrorKind::InvalidArgument,
            "num_noncumulative must lie in [0, num_traits]");
    require(p.rate_ceiling > 0.0 && p.eps_fraction > 0.0 && std::isfinite(p.rate_ceiling), ErrorKind::InvalidArgument,
            "rate_ceiling and eps_fraction must be positive");
    require(p.q_samples >= 0 && p.meta_iterations >= 1 && p.time_points >= 2, ErrorKind::InvalidArgument,
            "q_samples >= 0, meta_iterations >= 1 and time_points >= 2 required");
    require(p.extra_edge_probability >= 0.0 && p.extra_edge_probability <= 1.0, ErrorKind::InvalidArgument,
            "extra_edge_probability must lie in [0, 1]");
}

inline std::mt19937_64 run_rng(std::uint64_t seed, int run_index, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run_index), static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

/// Each agent of each species lands on a uniformly random task.
inline Eigen::MatrixXd random_partition(int num_tasks, const std::vector<int>& sizes, std::mt19937_64& rng) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(num_tasks, static_cast<Eigen::Index>(sizes.size()));
    std::uniform_int_distribution<int> task(0, num_tasks - 1);
    for (std::size_t s = 0; s < sizes.size(); ++s)
        for (int a = 0; a < sizes[s]; ++a) x(task(rng), static_cast<Eigen::Index>(s)) += 1.0;
    return x;
}

/// Random spanning tree traversable both ways, plus extra directed edges.
inline std::vector<Edge> random_edges(int M, double extra_probability, std::mt19937_64& rng) {
    for (;;) {
        std::vector<Edge> edges;
        std::vector<int> order(static_cast<std::size_t>(M));
        for (int i = 0; i < M; ++i) order[static_cast<std::size_t>(i)] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (int i = 1; i < M; ++i) {
            std::uniform_int_distribution<int> parent(0, i - 1);
            const int a = order[static_cast<std::size_t>(parent(rng))];
            const int b = order[static_cast<std::size_t>(i)];
            edges.push_back({a, b});
            edges.push_back({b, a});
        }
        std::bernoulli_distribution extra(extra_probability);
        for (int i = 0; i < M; ++i) {
            for (int j = 0; j < M; ++j) {
                if (i == j) continue;
                const Edge e{i, j};
                if (std::find(edges.begin(), edges.end(), e) == edges.end() && extra(rng)) edges.push_back(e);
            }
        }
        std::sort(edges.begin(), edges.end());
        if (is_strongly_connected(M, edges)) return edges;
    }
}

/// One randomized scenario. Cumulative trait means ~ U(0, 10); non-cumulative
/// means ~ U{0, 1} with q_min = 1; variances ~ U(0, 2). X(0) and X* are
/// independent random partitions and Y* = X* mu_Q.
inline Scenario random_scenario(const BenchParams& p, int run_index) {
    validate_bench_params(p);
    auto rng = run_rng(p.seed, run_index, 0);
    const int M = p.num_tasks, S = p.num_species, U = p.num_traits;
    const int C = U - p.num_noncumulative;

    const auto edges = random_edges(M, p.extra_edge_probability, rng);
    const TaskGraph graph = TaskGraph::uniform(M, edges, S, p.rate_ceiling);

    std::uniform_real_distribution<double> cont(0.0, 10.0), spread(0.0, 2.0);
    std::uniform_int_distribution<int> bit(0, 1);
    Eigen::MatrixXd mu(S, U), var(S, U);
    for (int s = 0; s < S; ++s) {
        for (int u = 0; u < U; ++u) {
            mu(s, u) = u < C ? cont(rng) : static_cast<double>(bit(rng));
            var(s, u) = spread(rng);
        }
    }
    std::vector<TraitKind> kinds;
    for (int u = 0; u < U; ++u) kinds.push_back(u < C ? TraitKind::cumulative() : TraitKind::non_cumulative(1.0));
    const std::vector<int> sizes(static_cast<std::size_t>(S), p.agents_per_species);
    TraitModel model = build_trait_model(mu, var, kinds, sizes);

    const Eigen::MatrixXd x0 = random_partition(M, sizes, rng);
    const Eigen::MatrixXd xstar = random_partition(M, sizes, rng);
    const TraitModel binary = binarize_noncumulative(model);
    const Eigen::MatrixXd target = xstar * binary.mean();

    OptimizerConfig cfg;
    const double e = p.eps_fraction * target.norm();
    cfg.eps1 = e > 0.0 ? e * e : 1.0;
    cfg.eps2 = cfg.eps1;
    const double v = 2.0 * trait_variance(AbstractState(xstar), binary).norm();
    cfg.eps_var = v > 0.0 ? v * v : 1.0;
    cfg.meta_iterations = p.meta_iterations;
    cfg.seed = run_rng(p.seed, run_index, 1)();

    return Scenario{"run-" + std::to_string(run_index), std::move(model), graph, AbstractState(x0), target,
                    Goal::ExactMatching, cfg};
}

enum class Strategy { Strata, Baseline, Random };

inline const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::Strata: return "strata";
    case Strategy::Baseline: return "baseline";
    case Strategy::Random: return "random";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "strata") return Strategy::Strata;
    if (s == "baseline") return Strategy::Baseline;
    if (s == "random") return Strategy::Random;
    fail(ErrorKind::InvalidArgument, "unknown strategy '" + s + "' (strata, baseline, random)");
}

struct RunRecord {
    int run = 0;
    Strategy strategy = Strategy::Strata;
    Goal goal = Goal::ExactMatching;
    bool converged = false;
    double settle_time = 0.0;
    std::map<std::string, double> residuals;
    double delta_g1_at_settle = 0.0;
    double delta_g2_at_settle = 0.0;
    MetricSeries metrics;
    std::string error;   // non-empty when the run failed outright
    double wall_time = 0.0;
};

struct CurvePoint {
    double time = 0.0;  // mean over the aggregated runs
    double mean = 0.0;
    double std = 0.0;
};

struct Aggregate {
    Strategy strategy = Strategy::Strata;
    Goal goal = Goal::ExactMatching;
    int runs = 0;
    int converged = 0;
    std::map<std::string, std::vector<CurvePoint>> curves;  // over converged runs only
};

struct ProportionTest {
    Goal goal = Goal::ExactMatching;
    double strata_rate = 0.0;
    double baseline_rate = 0.0;
    double z = 0.0;
    double p_value = 1.0;  // two-sided
};

struct BenchReport {
    BenchParams params;
    std::vector<Strategy> strategies;
    std::vector<RunRecord> records;
    std::vector<Aggregate> aggregates;
    std::vector<ProportionTest> tests;
};

inline ProportionTest two_proportion_test(Goal goal, int x1, int n1, int x2, int n2) {
    ProportionTest t;
    t.goal = goal;
    t.strata_rate = n1 > 0 ? static_cast<double>(x1) / n1 : 0.0;
    t.baseline_rate = n2 > 0 ? static_cast<double>(x2) / n2 : 0.0;
    const double pooled = (n1 + n2) > 0 ? static_cast<double>(x1 + x2) / (n1 + n2) : 0.0;
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / std::max(n1, 1) + 1.0 / std::max(n2, 1)));
    if (se > 0.0) {
        t.z = (t.strata_rate - t.baseline_rate) / se;
        t.p_value = std::erfc(std::abs(t.z) / std::sqrt(2.0));
    }
    return t;
}

inline std::vector<double> time_grid(double horizon, int points) {
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = horizon * i / (points - 1);
    return t;
}

inline RunRecord run_strategy(const Scenario& sc, Strategy strategy, Goal goal, const BenchParams& p, int run_index) {
    const auto started = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.run = run_index;
    rec.strategy = strategy;
    rec.goal = goal;
    try {
        Scenario used = sc;
        RatePlan plan;
        SolveReport report;
        if (strategy == Strategy::Random) {
            auto rng = run_rng(p.seed, run_index, 2);
            used.initial_state = AbstractState(random_partition(sc.graph.num_tasks(), sc.model.species_sizes(), rng));
            const int M = sc.graph.num_tasks();
            plan.rate_matrices.assign(static_cast<std::size_t>(sc.model.num_species()), Eigen::MatrixXd::Zero(M, M));
            // No dynamics: judged at t = 0, plotted over the nominal horizon M / k_max.
            plan.settle_time = 0.0;
            const auto res = plan_residuals(plan, used.initial_state, binarize_noncumulative(sc.model), sc.target,
                                            goal, sc.config.nu);
            rec.residuals = res;
            rec.converged = within_bounds(res, residual_bounds(sc.config));
            plan.settle_time = M / p.rate_ceiling;
        } else {
            report = strategy == Strategy::Strata ? solve(sc, goal, sc.config) : solve_baseline(sc, goal, sc.config);
            plan = report.plan;
            rec.residuals = report.residuals;
            rec.converged = report.converged;
        }
        rec.settle_time = strategy == Strategy::Random ? 0.0 : plan.settle_time;
        rec.metrics = mismatch_metrics(plan, used, time_grid(1.5 * plan.settle_time, p.time_points), p.q_samples,
                                       run_rng(p.seed, run_index, 3)());
        const TraitModel binary = binarize_noncumulative(sc.model);
        const Eigen::MatrixXd X = propagate(used.initial_state, plan, rec.settle_time).counts();
        std::tie(rec.delta_g1_at_settle, rec.delta_g2_at_settle) = mismatch_at(X, binary.mean(), sc.target);
    } catch (const Error& e) {
        rec.converged = false;
        rec.error = e.what();
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

inline Aggregate aggregate(const std::vector<RunRecord>& records, Strategy strategy, Goal goal) {
    Aggregate a;
    a.strategy = strategy;
    a.goal = goal;
    std::vector<const RunRecord*> used;
    for (const auto& r : records) {
        if (r.strategy != strategy || r.goal != goal) continue;
        ++a.runs;
        if (r.converged && r.error.empty()) {
            ++a.converged;
            used.push_back(&r);
        }
    }
    if (used.empty()) return a;
    const std::size_t n = used.front()->metrics.times.size();
    using Getter = double (*)(const MetricSeries&, std::size_t);
    const std::vector<std::pair<std::string, Getter>> metrics{
        {"delta_g1_mean", [](const MetricSeries& m, std::size_t i) { return m.delta_g1_mean[i]; }},
        {"delta_g2_mean", [](const MetricSeries& m, std::size_t i) { return m.delta_g2_mean[i]; }},
        {"delta_g1_sampled", [](const MetricSeries& m, std::size_t i) { return m.delta_g1_sampled[i].mean; }},
        {"delta_g2_sampled", [](const MetricSeries& m, std::size_t i) { return m.delta_g2_sampled[i].mean; }},
    };
    for (const auto& [name, get] : metrics) {
        auto& curve = a.curves[name];
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> values, times;
            for (const auto* r : used) {
                values.push_back(get(r->metrics, i));
                times.push_back(r->metrics.times[i]);
            }
            const MeanStd ms = mean_std(values);
            curve.push_back({mean_std(times).mean, ms.mean, ms.std});
        }
    }
    return a;
}

/// Runs every strategy on every randomized scenario under both goals.
/// Runs use RNG streams derived from (seed, run index) only.
inline BenchReport run_benchmark(const BenchParams& p, const std::vector<Strategy>& strategies,
                                 const std::function<void(const RunRecord&)>& on_record = {}) {
    validate_bench_params(p);
    require(!strategies.empty(), ErrorKind::InvalidArgument, "at least one strategy is required");
    BenchReport report;
    report.params = p;
    report.strategies = strategies;
    const Goal goals[] = {Goal::ExactMatching, Goal::MinimumMatching};
    for (int run = 0; run < p.runs; ++run) {
        const Scenario sc = random_scenario(p, run);
        for (Goal goal : goals) {
            for (Strategy s : strategies) {
                report.records.push_back(run_strategy(sc, s, goal, p, run));
                if (on_record) on_record(report.records.back());
            }
        }
    }
    for (Goal goal : goals)
        for (Strategy s : strategies) report.aggregates.push_back(aggregate(report.records, s, goal));

    auto find = [&](Strategy s, Goal g) -> const Aggregate* {
        for (const auto& a : report.aggregates)
            if (a.strategy == s && a.goal == g) return &a;
        return nullptr;
    };
    for (Goal goal : goals) {
        const auto* a = find(Strategy::Strata, goal);
        const auto* b = find(Strategy::Baseline, goal);
        if (a && b) report.tests.push_back(two_proportion_test(goal, a->converged, a->runs, b->converged, b->runs));
    }
    return report;
}

} // namespace strata
