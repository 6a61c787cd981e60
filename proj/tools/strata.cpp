// strata: command-line front end.
//
//   strata solve SCENARIO [--goal exact|minimum] [-o PLAN]
//   strata simulate PLAN --time T [--agents] [-o STATE]
//   strata diversity SCENARIO [-o REPORT]
//   strata metrics PLAN SCENARIO [-o REPORT] [--csv FILE] [--svg FILE]
//   strata bench [--runs N] [--seed S] [...] [--json F] [--csv F] [--svg F]
//
// Exit status: 0 success, 1 invalid input, 2 no convergence, 3 I/O failure.

#include "strata/baseline.hpp"
#include "strata/diversity.hpp"
#include "strata/dynamics.hpp"
#include "strata/experiments.hpp"
#include "strata/optimizer.hpp"
#include "strata/report.hpp"
#include "strata/scenario_io.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace strata;
using io::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitIo = 3;

std::optional<std::uint64_t> env_seed() {
    const char* v = std::getenv("STRATA_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t used = 0;
        const auto seed = std::stoull(v, &used);
        if (used != std::string(v).size()) throw std::invalid_argument("trailing characters");
        return seed;
    } catch (const std::exception&) {
        fail(ErrorKind::InvalidArgument, std::string("STRATA_SEED is not an unsigned integer: '") + v + "'");
    }
}

std::optional<std::uint64_t> resolve_seed(const std::optional<std::uint64_t>& flag) {
    return flag ? flag : env_seed();
}

void print_matrix(const std::string& title, const Eigen::MatrixXd& m) {
    std::printf("%s\n", title.c_str());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::printf("  ");
        for (Eigen::Index j = 0; j < m.cols(); ++j) std::printf("%12.6g", m(i, j));
        std::printf("\n");
    }
}

void print_residuals(const std::map<std::string, double>& res, const std::map<std::string, double>& bounds) {
    std::printf("  %-14s %14s %14s  %s\n", "residual", "value", "bound", "ok");
    for (const auto& [name, value] : res) {
        const double b = bounds.at(name);
        std::printf("  %-14s %14.6g %14.6g  %s\n", name.c_str(), value, b, value <= b ? "yes" : "no");
    }
}

struct SolveArgs {
    std::string scenario;
    std::string goal;
    std::string out = "plan.json";
    std::optional<std::uint64_t> seed;
    int meta_iterations = 0;
    bool baseline = false;
};

int run_solve(const SolveArgs& a) {
    const Scenario sc = io::load_scenario(a.scenario);
    const Goal goal = a.goal.empty() ? sc.goal : io::parse_goal(a.goal);
    OptimizerConfig cfg = sc.config;
    if (const auto s = resolve_seed(a.seed)) cfg.seed = *s;
    if (a.meta_iterations > 0) cfg.meta_iterations = a.meta_iterations;

    const SolveReport report = a.baseline ? solve_baseline(sc, goal, cfg) : solve(sc, goal, cfg);
    json doc = io::plan_json(report, sc);
    doc["strategy"] = a.baseline ? "baseline" : "strata";
    io::write_file_atomic(a.out, io::dump(doc));

    std::printf("scenario      %s\n", sc.name.c_str());
    std::printf("strategy      %s\n", a.baseline ? "baseline" : "strata");
    std::printf("goal          %s\n", to_string(goal));
    std::printf("converged     %s\n", report.converged ? "yes" : "no");
    std::printf("settle time   %.6g\n", report.plan.settle_time);
    std::printf("restarts      %d\n", report.restarts_used);
    std::printf("wall time     %.3f s\n", report.wall_time);
    print_residuals(report.residuals, report.bounds);
    std::printf("plan written to %s\n", a.out.c_str());
    return report.converged ? kExitOk : kExitNotConverged;
}

struct SimulateArgs {
    std::string plan;
    double time = -1.0;
    std::string out = "state.json";
    bool agents = false;
    std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
    const io::PlanFile pf = io::load_plan(a.plan);
    const double t = a.time >= 0.0 ? a.time : pf.plan.settle_time;
    AbstractState x;
    std::string method = "mean_field";
    if (a.agents) {
        x = simulate_agents(pf.initial_state, pf.plan, t, resolve_seed(a.seed).value_or(0));
        method = "agents";
    } else {
        x = propagate(pf.initial_state, pf.plan, t);
    }
    io::write_file_atomic(a.out, io::dump(io::state_json(x, t, method)));
    std::printf("state at t = %.6g (%s)\n", t, method.c_str());
    print_matrix("counts (tasks x species)", x.counts());
    std::printf("state written to %s\n", a.out.c_str());
    return kExitOk;
}

struct DiversityArgs {
    std::string scenario;
    std::string out = "diversity.json";
    int alpha_max = 0;
};

int run_diversity(const DiversityArgs& a) {
    const Scenario sc = io::load_scenario(a.scenario);
    CombinationOptions opt;
    opt.alpha_max = a.alpha_max;
    const auto eig = eigenspecies(sc.model, opt);
    const auto cov = coverspecies(sc.model, opt);
    auto named = [&](const MinspeciesResult& r) {
        json j = io::minspecies_json(r);
        json names = json::array();
        for (int m : r.members) names.push_back(sc.model.labels().species_names[static_cast<std::size_t>(m)]);
        j["member_names"] = names;
        return j;
    };
    const json doc = {{"schema_version", io::kSchemaVersion},
                      {"kind", "diversity"},
                      {"scenario", sc.name},
                      {"species", sc.model.labels().species_names},
                      {"eigenspecies", named(eig)},
                      {"coverspecies", named(cov)}};
    io::write_file_atomic(a.out, io::dump(doc));

    auto line = [&](const char* label, const MinspeciesResult& r) {
        std::string members;
        for (int m : r.members) members += (members.empty() ? "" : ", ") + sc.model.labels().species_names[static_cast<std::size_t>(m)];
        std::printf("%-13s %d  {%s}\n", label, r.cardinality, members.c_str());
    };
    line("eigenspecies", eig);
    line("coverspecies", cov);
    std::printf("report written to %s\n", a.out.c_str());
    return kExitOk;
}

struct MetricsArgs {
    std::string plan;
    std::string scenario;
    std::string out = "metrics.json";
    std::string csv;
    std::string svg;
    int points = 100;
    int q_samples = 10;
    std::optional<std::uint64_t> seed;
};

int run_metrics(const MetricsArgs& a) {
    Scenario sc = io::load_scenario(a.scenario);
    const io::PlanFile pf = io::load_plan(a.plan);
    require(pf.initial_state.num_tasks() == sc.graph.num_tasks() &&
                pf.initial_state.num_species() == sc.model.num_species(),
            ErrorKind::InvariantViolation, "plan and scenario dimensions differ");
    validate_plan(sc.graph, pf.plan);
    require(a.points >= 2, ErrorKind::InvalidArgument, "--points must be at least 2");
    sc.initial_state = pf.initial_state;
    const auto times = time_grid(1.5 * pf.plan.settle_time, a.points);
    const auto m = mismatch_metrics(pf.plan, sc, times, a.q_samples, resolve_seed(a.seed).value_or(0));

    json doc = io::series_json(m);
    doc["schema_version"] = io::kSchemaVersion;
    doc["kind"] = "metrics";
    doc["scenario"] = sc.name;
    doc["settle_time"] = pf.plan.settle_time;
    io::write_file_atomic(a.out, io::dump(doc));
    if (!a.csv.empty()) {
        std::string csv = "time,metric,mean,std\n";
        for (std::size_t i = 0; i < times.size(); ++i) {
            const auto t = io::format_number(times[i]);
            csv += t + ",delta_g1_mean," + io::format_number(m.delta_g1_mean[i]) + ",0\n";
            csv += t + ",delta_g2_mean," + io::format_number(m.delta_g2_mean[i]) + ",0\n";
            csv += t + ",delta_g1_sampled," + io::format_number(m.delta_g1_sampled[i].mean) + "," +
                   io::format_number(m.delta_g1_sampled[i].std) + "\n";
            csv += t + ",delta_g2_sampled," + io::format_number(m.delta_g2_sampled[i].mean) + "," +
                   io::format_number(m.delta_g2_sampled[i].std) + "\n";
        }
        io::write_file_atomic(a.csv, csv);
    }
    if (!a.svg.empty()) {
        io::SvgPanel panel{"Trait mismatch for " + sc.name, {}};
        auto add = [&](const char* label, const std::vector<double>& y, const char* color, bool dashed) {
            panel.series.push_back({label, times, y, color, dashed});
        };
        std::vector<double> g1s, g2s;
        for (const auto& v : m.delta_g1_sampled) g1s.push_back(v.mean);
        for (const auto& v : m.delta_g2_sampled) g2s.push_back(v.mean);
        add("exact, mean traits", m.delta_g1_mean, "#1f77b4", false);
        add("deficit, mean traits", m.delta_g2_mean, "#1f77b4", true);
        add("exact, sampled", g1s, "#ff7f0e", false);
        add("deficit, sampled", g2s, "#ff7f0e", true);
        io::write_file_atomic(a.svg, io::line_chart_svg({panel}, "time", "trait mismatch (%)"));
    }

    std::printf("%12s %12s %12s %18s %18s\n", "time", "d_exact %", "d_deficit %", "d_exact sampled", "d_deficit sampled");
    const std::size_t stride = std::max<std::size_t>(1, times.size() / 10);
    for (std::size_t i = 0; i < times.size(); i += stride) {
        std::printf("%12.4g %12.4f %12.4f %10.4f±%-7.4f %10.4f±%-7.4f\n", times[i], m.delta_g1_mean[i],
                    m.delta_g2_mean[i], m.delta_g1_sampled[i].mean, m.delta_g1_sampled[i].std,
                    m.delta_g2_sampled[i].mean, m.delta_g2_sampled[i].std);
    }
    std::printf("report written to %s\n", a.out.c_str());
    return kExitOk;
}

struct BenchArgs {
    BenchParams params;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> strategies{"strata", "baseline", "random"};
    std::string json_out = "bench.json";
    std::string csv_out;
    std::string svg_out;
    bool quiet = false;
};

int run_bench(BenchArgs a) {
    if (const auto s = resolve_seed(a.seed)) a.params.seed = *s;
    std::vector<Strategy> strategies;
    for (const auto& s : a.strategies) strategies.push_back(parse_strategy(s));
    const auto started = std::chrono::steady_clock::now();
    const BenchReport report = run_benchmark(a.params, strategies, [&](const RunRecord& r) {
        if (!a.quiet)
            std::fprintf(stderr, "run %3d  %-8s %-7s %s  tau=%.4g\n", r.run, to_string(r.strategy), to_string(r.goal),
                         r.converged ? "converged" : "failed   ", r.settle_time);
    });
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    io::write_file_atomic(a.json_out, io::dump(io::bench_json(report)));
    if (!a.csv_out.empty()) io::write_file_atomic(a.csv_out, io::bench_csv(report));
    if (!a.svg_out.empty()) io::write_file_atomic(a.svg_out, io::bench_svg(report));

    std::printf("%-9s %-8s %10s\n", "strategy", "goal", "converged");
    int total_converged = 0;
    for (const auto& g : report.aggregates) {
        std::printf("%-9s %-8s %6d/%-3d\n", to_string(g.strategy), to_string(g.goal), g.converged, g.runs);
        total_converged += g.converged;
    }
    for (const auto& t : report.tests)
        std::printf("z-test (%s): strata %.2f vs baseline %.2f, z = %.3f, p = %.3g\n", to_string(t.goal),
                    t.strata_rate, t.baseline_rate, t.z, t.p_value);
    std::printf("wall time %.1f s\n", elapsed);
    return total_converged > 0 ? kExitOk : kExitNotConverged;
}

int exit_code_for(const Error& e) {
    return e.kind() == ErrorKind::Io ? kExitIo : kExitInvalid;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trait-based task assignment for heterogeneous teams"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "strata 1.0.0");

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "Optimize transition rates for a scenario");
    solve_cmd->add_option("scenario", solve_args.scenario, "Scenario JSON")->required();
    solve_cmd->add_option("--goal", solve_args.goal, "exact or minimum (default: scenario's goal)")
        ->check(CLI::IsMember({"exact", "minimum"}));
    solve_cmd->add_option("-o,--out", solve_args.out, "Plan JSON output")->capture_default_str();
    solve_cmd->add_option("--seed", solve_args.seed, "Restart seed (default: STRATA_SEED, then scenario)");
    solve_cmd->add_option("--meta-iterations", solve_args.meta_iterations, "Override the number of restarts");
    solve_cmd->add_flag("--baseline", solve_args.baseline, "Use the binary-trait baseline");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Propagate a plan's initial state");
    sim_cmd->add_option("plan", sim_args.plan, "Plan JSON")->required();
    sim_cmd->add_option("-t,--time", sim_args.time, "Time (default: the plan's settle time)")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("-o,--out", sim_args.out, "State JSON output")->capture_default_str();
    sim_cmd->add_flag("--agents", sim_args.agents, "Agent-level stochastic simulation instead of the mean field");
    sim_cmd->add_option("--seed", sim_args.seed, "Seed for --agents (default: STRATA_SEED, then 0)");

    DiversityArgs div_args;
    auto* div_cmd = app.add_subcommand("diversity", "Eigenspecies and coverspecies of a team");
    div_cmd->add_option("scenario", div_args.scenario, "Scenario JSON")->required();
    div_cmd->add_option("-o,--out", div_args.out, "Report JSON output")->capture_default_str();
    div_cmd->add_option("--alpha-max", div_args.alpha_max, "Coefficient bound (default: derived per row)")
        ->check(CLI::NonNegativeNumber);

    MetricsArgs met_args;
    auto* met_cmd = app.add_subcommand("metrics", "Trait mismatch curves of a plan");
    met_cmd->add_option("plan", met_args.plan, "Plan JSON")->required();
    met_cmd->add_option("scenario", met_args.scenario, "Scenario JSON")->required();
    met_cmd->add_option("-o,--out", met_args.out, "Report JSON output")->capture_default_str();
    met_cmd->add_option("--csv", met_args.csv, "Curves as CSV");
    met_cmd->add_option("--svg", met_args.svg, "Curves as SVG");
    met_cmd->add_option("--points", met_args.points, "Time samples on [0, 1.5 tau]")->capture_default_str();
    met_cmd->add_option("--q-samples", met_args.q_samples, "Sampled trait matrices")->capture_default_str();
    met_cmd->add_option("--seed", met_args.seed, "Sampling seed (default: STRATA_SEED, then 0)");

    BenchArgs bench_args;
    auto& bp = bench_args.params;
    auto* bench_cmd = app.add_subcommand("bench", "Randomized comparison of strategies");
    bench_cmd->add_option("--runs", bp.runs, "Independent runs")->capture_default_str();
    bench_cmd->add_option("--seed", bench_args.seed, "Base seed (default: STRATA_SEED, then 0)");
    bench_cmd->add_option("--tasks", bp.num_tasks, "Tasks per graph")->capture_default_str();
    bench_cmd->add_option("--species", bp.num_species, "Species")->capture_default_str();
    bench_cmd->add_option("--traits", bp.num_traits, "Traits")->capture_default_str();
    bench_cmd->add_option("--noncumulative", bp.num_noncumulative, "How many of the traits are non-cumulative")
        ->capture_default_str();
    bench_cmd->add_option("--agents", bp.agents_per_species, "Agents per species")->capture_default_str();
    bench_cmd->add_option("--meta-iterations", bp.meta_iterations, "Restarts per solve")->capture_default_str();
    bench_cmd->add_option("--q-samples", bp.q_samples, "Sampled trait matrices per run")->capture_default_str();
    bench_cmd->add_option("--rate-ceiling", bp.rate_ceiling, "Maximum transition rate")->capture_default_str();
    bench_cmd->add_option("--eps-fraction", bp.eps_fraction, "Trait tolerance as a fraction of ||Y*||")
        ->capture_default_str();
    bench_cmd->add_option("--time-points", bp.time_points, "Samples on [0, 1.5 tau]")->capture_default_str();
    bench_cmd->add_option("--strategy", bench_args.strategies, "strata, baseline, random (repeatable)")
        ->check(CLI::IsMember({"strata", "baseline", "random"}))
        ->capture_default_str();
    bench_cmd->add_option("--json", bench_args.json_out, "Report JSON output")->capture_default_str();
    bench_cmd->add_option("--csv", bench_args.csv_out, "Aggregated curves as CSV");
    bench_cmd->add_option("--svg", bench_args.svg_out, "Aggregated curves as SVG");
    bench_cmd->add_flag("-q,--quiet", bench_args.quiet, "No per-run progress on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*solve_cmd) return run_solve(solve_args);
        if (*sim_cmd) return run_simulate(sim_args);
        if (*div_cmd) return run_diversity(div_args);
        if (*met_cmd) return run_metrics(met_args);
        if (*bench_cmd) return run_bench(bench_args);
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", to_string(e.kind()), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    }
    return kExitInvalid;
}
