#pragma once

// JSON codec for scenarios, plans and states. Matrices are row-major arrays of
// arrays; non-finite numbers are rejected; files are written to a temporary
// sibling and renamed into place.

#include "strata/dynamics.hpp"
#include "strata/error.hpp"
#include "strata/model.hpp"
#include "strata/scenario.hpp"
#include "strata/solver_types.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace strata::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) fail(ErrorKind::ParseError, ctx + ": missing field '" + key + "'");
    return j.at(key);
}

inline double number(const json& j, const std::string& ctx) {
    if (!j.is_number()) fail(ErrorKind::ParseError, ctx + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(ErrorKind::ParseError, ctx + ": non-finite number");
    return v;
}

inline Eigen::MatrixXd matrix(const json& j, const std::string& ctx) {
    if (!j.is_array()) fail(ErrorKind::ParseError, ctx + ": expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    if (!j[0].is_array()) fail(ErrorKind::ParseError, ctx + ": expected an array of rows");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        const std::string rctx = ctx + "[" + std::to_string(r) + "]";
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            fail(ErrorKind::ParseError, rctx + ": ragged matrix row");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = number(row[static_cast<std::size_t>(c)], rctx + "[" + std::to_string(c) + "]");
    }
    return m;
}

inline void check_version(const json& j, const std::string& ctx) {
    const auto& v = field(j, "schema_version", ctx);
    if (!v.is_number_integer()) fail(ErrorKind::ParseError, ctx + ".schema_version: expected an integer");
    if (v.get<int>() != kSchemaVersion)
        fail(ErrorKind::SchemaVersionMismatch, ctx + ": schema_version " + std::to_string(v.get<int>()) +
                                                   ", expected " + std::to_string(kSchemaVersion));
}

inline std::size_t line_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

template <class F>
auto wrap_domain_errors(F&& f, const std::string& ctx) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::SchemaVersionMismatch) throw;
        throw Error(ErrorKind::InvariantViolation, ctx + ": " + e.what());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, ctx + ": " + e.what());
    }
}

} // namespace detail

inline json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            require(std::isfinite(m(r, c)), ErrorKind::NonFinite, "refusing to serialize a non-finite value");
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Goal parse_goal(const std::string& s) {
    if (s == "exact" || s == "G1") return Goal::ExactMatching;
    if (s == "minimum" || s == "G2") return Goal::MinimumMatching;
    fail(ErrorKind::ParseError, "goal must be 'exact' or 'minimum', got '" + s + "'");
}

inline json config_json(const OptimizerConfig& c) {
    return {{"eps1", c.eps1},
            {"eps2", c.eps2},
            {"eps_var", c.eps_var},
            {"nu", c.nu},
            {"meta_iterations", c.meta_iterations},
            {"step_scale", c.step_scale},
            {"local_max_iters", c.local_max_iters},
            {"seed", c.seed}};
}

inline OptimizerConfig config_from_json(const json& j, const std::string& ctx) {
    OptimizerConfig c;
    c.eps1 = detail::number(detail::field(j, "eps1", ctx), ctx + ".eps1");
    c.eps2 = detail::number(detail::field(j, "eps2", ctx), ctx + ".eps2");
    c.eps_var = detail::number(detail::field(j, "eps_var", ctx), ctx + ".eps_var");
    if (j.contains("nu")) c.nu = detail::number(j.at("nu"), ctx + ".nu");
    if (j.contains("meta_iterations")) c.meta_iterations = j.at("meta_iterations").get<int>();
    if (j.contains("step_scale")) c.step_scale = detail::number(j.at("step_scale"), ctx + ".step_scale");
    if (j.contains("local_max_iters")) c.local_max_iters = j.at("local_max_iters").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline json scenario_json(const Scenario& sc) {
    const auto& m = sc.model;
    json traits = json::array();
    for (int u = 0; u < m.num_traits(); ++u) {
        const auto& kind = m.kinds()[static_cast<std::size_t>(u)];
        json t = {{"name", m.labels().trait_names[static_cast<std::size_t>(u)]},
                  {"units", m.labels().trait_units[static_cast<std::size_t>(u)]},
                  {"kind", kind.is_cumulative() ? "cumulative" : "noncumulative"}};
        if (!kind.is_cumulative()) t["q_min"] = *kind.q_min();
        traits.push_back(std::move(t));
    }
    json edges = json::array();
    for (const auto& e : sc.graph.edges()) edges.push_back({e.from, e.to});
    return {{"schema_version", kSchemaVersion},
            {"name", sc.name},
            {"species", m.labels().species_names},
            {"species_sizes", m.species_sizes()},
            {"traits", traits},
            {"trait_mean", matrix_json(m.mean())},
            {"trait_variance", matrix_json(m.variance())},
            {"graph", {{"num_tasks", sc.graph.num_tasks()}, {"edges", edges}, {"rate_ceiling", matrix_json(sc.graph.rate_ceiling())}}},
            {"initial_state", matrix_json(sc.initial_state.counts())},
            {"target", matrix_json(sc.target)},
            {"goal", to_string(sc.goal)},
            {"config", config_json(sc.config)}};
}

inline Scenario scenario_from_json_unchecked(const json& j) {
    const std::string ctx = "scenario";
    detail::check_version(j, ctx);

    const auto& traits = detail::field(j, "traits", ctx);
    if (!traits.is_array()) fail(ErrorKind::ParseError, "scenario.traits: expected an array");
    TraitLabels labels;
    std::vector<TraitKind> kinds;
    for (std::size_t u = 0; u < traits.size(); ++u) {
        const std::string tctx = ctx + ".traits[" + std::to_string(u) + "]";
        const auto& t = traits[u];
        labels.trait_names.push_back(detail::field(t, "name", tctx).get<std::string>());
        labels.trait_units.push_back(t.value("units", std::string{}));
        const auto kind = detail::field(t, "kind", tctx).get<std::string>();
        if (kind == "cumulative") {
            kinds.push_back(TraitKind::cumulative());
        } else if (kind == "noncumulative") {
            const double q_min = detail::number(detail::field(t, "q_min", tctx), tctx + ".q_min");
            kinds.push_back(detail::wrap_domain_errors([&] { return TraitKind::non_cumulative(q_min); }, tctx));
        } else {
            fail(ErrorKind::ParseError, tctx + ".kind: expected 'cumulative' or 'noncumulative'");
        }
    }
    labels.species_names = detail::field(j, "species", ctx).get<std::vector<std::string>>();
    const auto sizes = detail::field(j, "species_sizes", ctx).get<std::vector<int>>();
    const Eigen::MatrixXd mu = detail::matrix(detail::field(j, "trait_mean", ctx), ctx + ".trait_mean");
    const Eigen::MatrixXd var = detail::matrix(detail::field(j, "trait_variance", ctx), ctx + ".trait_variance");

    const auto& g = detail::field(j, "graph", ctx);
    const int M = detail::field(g, "num_tasks", ctx + ".graph").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : detail::field(g, "edges", ctx + ".graph")) {
        if (!e.is_array() || e.size() != 2) fail(ErrorKind::ParseError, "scenario.graph.edges: expected [from, to] pairs");
        edges.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    const auto& ceil_j = detail::field(g, "rate_ceiling", ctx + ".graph");
    Eigen::MatrixXd ceiling;
    if (ceil_j.is_number()) {
        ceiling = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(sizes.size()), static_cast<Eigen::Index>(edges.size()),
                                            detail::number(ceil_j, ctx + ".graph.rate_ceiling"));
    } else {
        ceiling = detail::matrix(ceil_j, ctx + ".graph.rate_ceiling");
    }

    Scenario sc{
        j.value("name", std::string{}),
        detail::wrap_domain_errors([&] { return build_trait_model(mu, var, kinds, sizes, labels); }, ctx + ".model"),
        detail::wrap_domain_errors([&] { return TaskGraph(M, edges, ceiling); }, ctx + ".graph"),
        detail::wrap_domain_errors(
            [&] { return AbstractState(detail::matrix(detail::field(j, "initial_state", ctx), ctx + ".initial_state")); },
            ctx + ".initial_state"),
        detail::matrix(detail::field(j, "target", ctx), ctx + ".target"),
        parse_goal(j.value("goal", std::string("exact"))),
        config_from_json(detail::field(j, "config", ctx), ctx + ".config"),
    };
    detail::wrap_domain_errors([&] { validate_scenario(sc); return 0; }, ctx);
    return sc;
}

/// Decodes and validates a scenario document. JSON type errors (a string where
/// a number belongs, etc.) surface as ParseError.
inline Scenario scenario_from_json(const json& j) {
    try {
        return scenario_from_json_unchecked(j);
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, std::string("scenario: ") + e.what());
    }
}

inline json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::ParseError, "line " + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, e.what());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes next to the destination and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) fail(ErrorKind::Io, "failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        fail(ErrorKind::Io, "cannot rename into '" + path.string() + "'");
    }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline Scenario load_scenario(const std::filesystem::path& path) {
    return scenario_from_json(parse_text(read_file(path)));
}

inline void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
    write_file_atomic(path, dump(scenario_json(sc)));
}

// ---- plans --------------------------------------------------------------

inline json plan_json(const SolveReport& report, const Scenario& sc) {
    json mats = json::array();
    for (const auto& K : report.plan.rate_matrices) mats.push_back(matrix_json(K));
    json history = json::array();
    for (double t : report.best_history) history.push_back(std::isfinite(t) ? json(t) : json(nullptr));
    return {{"schema_version", kSchemaVersion},
            {"kind", "plan"},
            {"scenario", sc.name},
            {"goal", to_string(report.goal)},
            {"converged", report.converged},
            {"settle_time", report.plan.settle_time},
            {"restarts_used", report.restarts_used},
            {"residuals", report.residuals},
            {"bounds", report.bounds},
            {"best_history", history},
            {"species", sc.model.labels().species_names},
            {"rate_matrices", mats},
            {"initial_state", matrix_json(sc.initial_state.counts())}};
}

struct PlanFile {
    RatePlan plan;
    AbstractState initial_state;
    Goal goal = Goal::ExactMatching;
    bool converged = false;
};

inline PlanFile plan_from_json_unchecked(const json& j) {
    const std::string ctx = "plan";
    detail::check_version(j, ctx);
    PlanFile pf;
    pf.plan.settle_time = detail::number(detail::field(j, "settle_time", ctx), ctx + ".settle_time");
    std::size_t s = 0;
    for (const auto& K : detail::field(j, "rate_matrices", ctx))
        pf.plan.rate_matrices.push_back(detail::matrix(K, ctx + ".rate_matrices[" + std::to_string(s++) + "]"));
    pf.initial_state = detail::wrap_domain_errors(
        [&] { return AbstractState(detail::matrix(detail::field(j, "initial_state", ctx), ctx + ".initial_state")); },
        ctx + ".initial_state");
    pf.goal = parse_goal(j.value("goal", std::string("exact")));
    pf.converged = j.value("converged", false);
    require(static_cast<int>(pf.plan.rate_matrices.size()) == pf.initial_state.num_species(),
            ErrorKind::InvariantViolation, "plan: one rate matrix per species required");
    for (const auto& K : pf.plan.rate_matrices) {
        require(K.rows() == pf.initial_state.num_tasks() && K.cols() == pf.initial_state.num_tasks(),
                ErrorKind::InvariantViolation, "plan: rate matrices must be M x M");
    }
    return pf;
}

inline PlanFile plan_from_json(const json& j) {
    try {
        return plan_from_json_unchecked(j);
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, std::string("plan: ") + e.what());
    }
}

inline PlanFile load_plan(const std::filesystem::path& path) { return plan_from_json(parse_text(read_file(path))); }

inline json state_json(const AbstractState& x, double t, const std::string& method) {
    return {{"schema_version", kSchemaVersion},
            {"kind", "state"},
            {"time", t},
            {"method", method},
            {"counts", matrix_json(x.counts())}};
}

} // namespace strata::io
