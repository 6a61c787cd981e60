// Acceptance checks, one line per criterion:
//   strata_acceptance [N ...]     (default: all of 1..10)
// Exit status is nonzero when any selected criterion fails.

#include "test_support.hpp"

#include "strata/baseline.hpp"
#include "strata/diversity.hpp"
#include "strata/experiments.hpp"
#include "strata/expm.hpp"
#include "strata/optimizer.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace strata;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string members_str(const std::vector<int>& m) {
    std::string s = "{";
    for (std::size_t i = 0; i < m.size(); ++i) s += (i ? "," : "") + std::to_string(m[i] + 1);
    return s + "}";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Trait mean (five traits, speed binarized) and variance (four cumulative
// traits) of the running example at t = 0.
Outcome golden_fixture() {
    const auto t0 = std::chrono::steady_clock::now();
    Eigen::MatrixXd mean(5, 5), var(5, 4);
    mean << 1250, 375, 500, 3500, 25,
            3750, 250, 250, 0, 0,
            4375, 0, 625, 1500, 0,
            5000, 875, 750, 3500, 25,
            0, 0, 0, 0, 0;
    var << 1875, 625, 937.5, 3500,
           1250, 937.5, 312.5, 0,
           625, 0, 1500, 5437.5,
           3750, 1437.5, 2437.5, 5750,
           0, 0, 0, 0;
    const auto x = testing::example_initial_state();
    const auto with_speed = binarize_noncumulative(testing::example_model_with_speed());
    const double dm = (trait_mean(x, with_speed) - mean).cwiseAbs().maxCoeff();
    const double dv = (trait_variance(x, testing::example_model()) - var).cwiseAbs().maxCoeff();
    const double elapsed = seconds_since(t0);
    return {dm <= 1e-9 && dv <= 1e-9 && elapsed < 1.0,
            "max |mean diff| " + fmt("%.3g", dm) + ", max |var diff| " + fmt("%.3g", dv) + ", " +
                fmt("%.3f", elapsed) + " s"};
}

// 2. Eigenspecies 3 {1,2,3} and coverspecies 1 {4} of the five-trait example.
Outcome diversity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = testing::example_model_with_speed();
    const auto eig = eigenspecies(model);
    const auto cov = coverspecies(model);
    const double elapsed = seconds_since(t0);
    const bool eig_ok = eig.cardinality == 3 && eig.members == std::vector<int>{0, 1, 2};
    const bool cov_ok = cov.cardinality == 1 && cov.members == std::vector<int>{3};
    std::string detail = "eigenspecies " + std::to_string(eig.cardinality) + " " + members_str(eig.members) +
                         " (expected 3 {1,2,3}), coverspecies " + std::to_string(cov.cardinality) + " " +
                         members_str(cov.members) + " (expected 1 {4}), " + fmt("%.3f", elapsed) + " s";
    if (!eig_ok) {
        // Diagnostic: the fourth row is S1 + S2 in every trait except the
        // second, where 15 + 10 = 25 but the matrix holds 35.
        Eigen::MatrixXd mu = binarize_noncumulative(model).mean();
        mu(3, 1) = 25;
        const auto fixed = eigenspecies(build_trait_model(mu, Eigen::MatrixXd::Zero(4, 5),
                                                          std::vector<TraitKind>(5, TraitKind::cumulative()),
                                                          {25, 25, 25, 25}));
        detail += "; row 4 is not a natural combination of the others (mu(S4,q2) = 35, S1+S2 gives 25); with 25 "
                  "the result is " +
                  std::to_string(fixed.cardinality) + " " + members_str(fixed.members);
    }
    return {eig_ok && cov_ok && elapsed < 1.0, detail};
}

// 3. Speed column against q_min = 7.
Outcome binarization() {
    const auto b = binarize_noncumulative(testing::example_model_with_speed());
    Eigen::VectorXd expected(4);
    expected << 1, 0, 0, 1;
    std::ostringstream got;
    got << b.mean().col(4).transpose();
    return {b.mean().col(4) == expected, "speed [8,2,5,10] -> [" + got.str() + "]"};
}

// 4. Analytical gradients against central differences on 50 instances.
Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto inst = testing::make_instance(rng);
        const Eigen::VectorXd theta = testing::pack(inst.rates, inst.tau);
        const auto Ks = testing::matrices_from(inst.graph, theta);
        const double nu = 0.8;
        auto check = [&](const GradientTerm& term, const std::function<double(double, const std::vector<Eigen::MatrixXd>&)>& f) {
            const auto fd = testing::central_difference(
                [&](const Eigen::VectorXd& t) { return f(t(t.size() - 1), testing::matrices_from(inst.graph, t)); },
                theta);
            worst = std::max(worst, testing::relative_error(testing::pack_gradient(inst.graph, term), fd,
                                                            1e-10 * (1.0 + term.value)));
        };
        const auto g1 = constraint_gradients(inst.tau, Ks, inst.x0, inst.model, inst.target, Goal::ExactMatching, nu);
        const auto g2 = constraint_gradients(inst.tau, Ks, inst.x0, inst.model, inst.target, Goal::MinimumMatching, nu);
        check(g1.trait_error, [&](double t, const auto& K) { return error_exact(t, K, inst.x0, inst.model, inst.target); });
        check(g2.trait_error,
              [&](double t, const auto& K) { return error_minimum(t, K, inst.x0, inst.model, inst.target); });
        check(g1.steady_state, [&](double t, const auto& K) { return error_steady(t, K, inst.x0, nu); });
        check(g1.variance_norm, [&](double t, const auto& K) { return variance_norm(t, K, inst.x0, inst.model); });
    }
    const double elapsed = seconds_since(t0);
    return {worst < 1e-5 && elapsed < 30.0,
            "worst relative error " + fmt("%.3g", worst) + " over 50 instances, " + fmt("%.2f", elapsed) + " s"};
}

// 5. Generator structure, stochastic exponentials and population conservation.
Outcome conservation() {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> Md(2, 8), Sd(1, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0), taud(0.0, 20.0);
    double col = 0.0, stoch = 0.0, pop = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int M = Md(rng), S = Sd(rng);
        const TaskGraph graph = TaskGraph::uniform(M, random_edges(M, 0.3, rng), S, 1.0);
        std::vector<Eigen::MatrixXd> Ks;
        for (int s = 0; s < S; ++s) {
            std::vector<double> rates(static_cast<std::size_t>(graph.num_edges()));
            for (auto& r : rates) r = unit(rng);
            Ks.push_back(build_rate_matrix(graph, s, std::span<const double>(rates)));
            col = std::max(col, Ks.back().colwise().sum().cwiseAbs().maxCoeff());
        }
        const double tau = taud(rng);
        for (const auto& K : Ks)
            stoch = std::max(stoch, (expm(K * tau).colwise().sum().array() - 1.0).abs().maxCoeff());
        const AbstractState x0(testing::random_matrix(M, S, 0.0, 50.0, rng));
        const auto x = propagate(x0, RatePlan{Ks, tau}, tau);
        const Eigen::VectorXd before = x0.species_totals(), after = x.species_totals();
        for (Eigen::Index s = 0; s < before.size(); ++s)
            pop = std::max(pop, std::abs(after(s) - before(s)) / std::max(before(s), 1e-300));
    }
    return {col <= 1e-12 && stoch <= 1e-10 && pop <= 1e-9,
            "max |col sum K| " + fmt("%.3g", col) + ", max |col sum e^Kt - 1| " + fmt("%.3g", stoch) +
                ", max relative population drift " + fmt("%.3g", pop)};
}

// 6. Monte-Carlo variance of X Q against (X o X) Var_Q.
Outcome variance_law() {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> Md(2, 5), Sd(1, 3), Ud(1, 4);
    const int n = 10000;
    double worst = 0.0;
    for (int pair = 0; pair < 20; ++pair) {
        const int M = Md(rng), S = Sd(rng), U = Ud(rng);
        // Means at least four standard deviations above zero, so the clamp at
        // zero in the sampler does not bias the variance.
        const Eigen::MatrixXd mu = testing::random_matrix(S, U, 4.0, 10.0, rng);
        const Eigen::MatrixXd var = testing::random_matrix(S, U, 0.0, 1.0, rng);
        const auto model = build_trait_model(mu, var, std::vector<TraitKind>(static_cast<std::size_t>(U), TraitKind::cumulative()),
                                             std::vector<int>(static_cast<std::size_t>(S), 10));
        const AbstractState x(testing::random_matrix(M, S, 0.0, 10.0, rng));
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(M, U), sq = Eigen::MatrixXd::Zero(M, U);
        for (int i = 0; i < n; ++i) {
            const Eigen::MatrixXd y = x.counts() * sample_trait_matrix(model, rng);
            sum += y;
            sq += y.cwiseAbs2();
        }
        const Eigen::MatrixXd m = sum / n;
        const Eigen::MatrixXd emp = (sq / n - m.cwiseAbs2()) * n / (n - 1.0);
        const Eigen::MatrixXd law = trait_variance(x, model);
        const Eigen::MatrixXd mean_y = trait_mean(x, model);
        for (int i = 0; i < M; ++i) {
            for (int u = 0; u < U; ++u) {
                const double floor = 1e-6 * mean_y(i, u) * mean_y(i, u) + 1e-12;
                worst = std::max(worst, std::abs(emp(i, u) - law(i, u)) / std::max(law(i, u), floor));
            }
        }
    }
    return {worst <= 0.05, "worst relative deviation " + fmt("%.4f", worst) + " over 20 pairs, 1e4 samples each"};
}

// 7. Agent-level simulation averaged over 200 seeds against the mean field.
Outcome mean_field() {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    int entries = 0;
    for (int inst = 0; inst < 3; ++inst) {
        const int M = 4, S = 2, Ns = 200;
        const TaskGraph graph = TaskGraph::uniform(M, testing::ring_edges(M), S, 1.0);
        std::vector<Eigen::MatrixXd> Ks;
        for (int s = 0; s < S; ++s) {
            const Eigen::MatrixXd r = testing::random_matrix(1, graph.num_edges(), 0.05, 0.5, rng);
            Ks.push_back(build_rate_matrix(graph, s, std::span<const double>(r.data(), static_cast<std::size_t>(r.size()))));
        }
        Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(M, S);
        x0(0, 0) = Ns;
        x0.col(1).setConstant(Ns / M);
        const RatePlan plan{Ks, 3.0};
        const AbstractState start(x0);
        const int seeds = 200;
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(M, S), sq = Eigen::MatrixXd::Zero(M, S);
        for (int k = 0; k < seeds; ++k) {
            const Eigen::MatrixXd x = simulate_agents(start, plan, plan.settle_time, 1000u * inst + k).counts();
            sum += x;
            sq += x.cwiseAbs2();
        }
        const Eigen::MatrixXd mean = sum / seeds;
        const Eigen::MatrixXd sd = ((sq / seeds - mean.cwiseAbs2()) * seeds / (seeds - 1.0)).cwiseMax(0.0).cwiseSqrt();
        const Eigen::MatrixXd mf = propagate(start, plan, plan.settle_time).counts();
        for (int i = 0; i < M; ++i) {
            for (int s = 0; s < S; ++s) {
                const double se = sd(i, s) / std::sqrt(static_cast<double>(seeds));
                worst = std::max(worst, std::abs(mean(i, s) - mf(i, s)) / std::max(se, 1e-9));
                ++entries;
            }
        }
    }
    return {worst <= 3.0, "worst deviation " + fmt("%.2f", worst) + " standard errors over " +
                              std::to_string(entries) + " entries"};
}

BenchParams criterion8_params() {
    BenchParams p;
    p.num_tasks = 4;
    p.num_species = 3;
    p.num_traits = 4;
    p.agents_per_species = 50;
    p.runs = 30;
    p.meta_iterations = 10;
    return p;
}

struct BenchRun {
    BenchReport report;
    double seconds = 0.0;
};

const BenchRun& criterion8_bench() {
    static std::optional<BenchRun> cached;
    if (!cached) {
        const auto t0 = std::chrono::steady_clock::now();
        BenchRun r;
        r.report = run_benchmark(criterion8_params(), {Strategy::Strata, Strategy::Baseline});
        r.seconds = seconds_since(t0);
        cached = std::move(r);
    }
    return *cached;
}

// 8. Converged-run counts, STRATA against the binary baseline.
Outcome benchmark_ordering() {
    const auto& run = criterion8_bench();
    bool ok = run.seconds < 900.0;
    std::string detail;
    for (Goal goal : {Goal::ExactMatching, Goal::MinimumMatching}) {
        int strata_n = 0, base_n = 0;
        for (const auto& a : run.report.aggregates) {
            if (a.goal != goal) continue;
            (a.strategy == Strategy::Strata ? strata_n : base_n) = a.converged;
        }
        ok = ok && strata_n > base_n;
        detail += std::string(to_string(goal)) + ": strata " + std::to_string(strata_n) + "/30 vs baseline " +
                  std::to_string(base_n) + "/30; ";
    }
    return {ok, detail + fmt("%.1f", run.seconds) + " s"};
}

// 9. Deficit mismatch never exceeds full mismatch; converged exact runs settle within 5%.
Outcome mismatch_dominance() {
    const auto& run = criterion8_bench();
    long checked = 0, violations = 0;
    double worst_settle = 0.0;
    int converged_g1 = 0;
    for (const auto& rec : run.report.records) {
        if (!rec.error.empty()) continue;
        const auto& m = rec.metrics;
        for (std::size_t i = 0; i < m.times.size(); ++i) {
            ++checked;
            if (m.delta_g2_mean[i] > m.delta_g1_mean[i]) ++violations;
            if (m.delta_g2_sampled[i].mean > m.delta_g1_sampled[i].mean) ++violations;
        }
        ++checked;
        if (rec.delta_g2_at_settle > rec.delta_g1_at_settle) ++violations;
        if (rec.goal == Goal::ExactMatching && rec.converged) {
            ++converged_g1;
            worst_settle = std::max(worst_settle, rec.delta_g1_at_settle);
        }
    }
    return {violations == 0 && worst_settle <= 5.0,
            std::to_string(violations) + " dominance violations in " + std::to_string(checked) +
                " states; worst delta_G1 at settle " + fmt("%.4f", worst_settle) + "% over " +
                std::to_string(converged_g1) + " converged exact runs"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Two executions of the command-line tool with the same seed.
Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / ("strata_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string cli = STRATA_CLI;
    const std::string data = STRATA_DATA_DIR;
    std::vector<std::string> files;
    bool ran = true;
    for (int pass = 0; pass < 2; ++pass) {
        const std::string p = (dir / std::to_string(pass)).string();
        fs::create_directories(p);
        const std::vector<std::string> cmds = {
            cli + " solve " + data + "/running_example.json -o " + p + "/running.json --seed 11",
            cli + " solve " + data + "/ctf.json -o " + p + "/ctf.json",
            cli + " bench --runs 3 --tasks 3 --species 2 --traits 3 --noncumulative 1 --agents 20 "
                  "--meta-iterations 3 --q-samples 4 --time-points 20 --seed 5 --strategy strata --strategy baseline "
                  "--strategy random -q --json " + p + "/bench.json --csv " + p + "/bench.csv --svg " + p + "/bench.svg",
        };
        for (const auto& c : cmds) {
            const int rc = std::system((c + " > /dev/null").c_str());
            ran = ran && rc == 0;
        }
    }
    int identical = 0, total = 0;
    std::string differing;
    for (const char* name : {"running.json", "ctf.json", "bench.json", "bench.csv", "bench.svg"}) {
        ++total;
        const std::string a = slurp(dir / "0" / name), b = slurp(dir / "1" / name);
        if (!a.empty() && a == b) ++identical;
        else differing += std::string(" ") + name;
    }
    fs::remove_all(dir);
    return {ran && identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                           " output files byte-identical" + (ran ? "" : ", a command failed") +
                                           (differing.empty() ? "" : ", differing:" + differing)};
}

} // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, Outcome (*)()>> criteria = {
        {1, {"golden fixture", golden_fixture}},
        {2, {"diversity", diversity}},
        {3, {"binarization", binarization}},
        {4, {"gradient correctness", gradients}},
        {5, {"conservation and stochasticity", conservation}},
        {6, {"variance law", variance_law}},
        {7, {"mean-field validity", mean_field}},
        {8, {"benchmark ordering", benchmark_ordering}},
        {9, {"mismatch dominance", mismatch_dominance}},
        {10, {"determinism", determinism}},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int id = std::atoi(argv[i]);
        if (!criteria.count(id)) {
            std::fprintf(stderr, "unknown criterion '%s' (expected 1..10)\n", argv[i]);
            return 2;
        }
        selected.push_back(id);
    }
    if (selected.empty())
        for (const auto& [id, _] : criteria) selected.push_back(id);

    int failed = 0;
    for (int id : selected) {
        const auto& [name, run] = criteria.at(id);
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
