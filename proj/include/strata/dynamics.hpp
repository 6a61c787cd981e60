#pragma once

#include "strata/config.hpp"
#include "strata/error.hpp"
#include "strata/expm.hpp"
#include "strata/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace strata {

/// Directed task switch: agents at `from` may move to `to`.
struct Edge {
    int from = 0;
    int to = 0;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

namespace detail {

inline std::vector<bool> reachable(int num_tasks, const std::vector<Edge>& edges, bool reverse) {
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(num_tasks));
    for (const auto& e : edges) {
        if (reverse) adjacency[static_cast<std::size_t>(e.to)].push_back(e.from);
        else adjacency[static_cast<std::size_t>(e.from)].push_back(e.to);
    }
    std::vector<bool> seen(static_cast<std::size_t>(num_tasks), false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adjacency[static_cast<std::size_t>(v)]) {
            if (!seen[static_cast<std::size_t>(w)]) {
                seen[static_cast<std::size_t>(w)] = true;
                stack.push_back(w);
            }
        }
    }
    return seen;
}

} // namespace detail

inline bool is_strongly_connected(int num_tasks, const std::vector<Edge>& edges) {
    if (num_tasks <= 0) return false;
    const auto fwd = detail::reachable(num_tasks, edges, false);
    const auto bwd = detail::reachable(num_tasks, edges, true);
    return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
           std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

/// Strongly connected task graph with per-species, per-edge rate ceilings
/// (`rate_ceiling(s, e)` bounds the rate of species s along edges()[e]).
class TaskGraph {
public:
    TaskGraph(int num_tasks, std::vector<Edge> edges, Eigen::MatrixXd rate_ceiling)
        : num_tasks_(num_tasks), edges_(std::move(edges)), ceiling_(std::move(rate_ceiling)) {
        require(num_tasks_ > 0, ErrorKind::InvalidGraph, "task graph needs at least one task");
        for (const auto& e : edges_) {
            require(e.from >= 0 && e.from < num_tasks_ && e.to >= 0 && e.to < num_tasks_, ErrorKind::InvalidGraph,
                    "edge (" + std::to_string(e.from) + "," + std::to_string(e.to) + ") references a missing task");
            require(e.from != e.to, ErrorKind::InvalidGraph,
                    "self-loop at task " + std::to_string(e.from));
        }
        auto sorted = edges_;
        std::sort(sorted.begin(), sorted.end());
        require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::InvalidGraph,
                "duplicate edge");
        require(is_strongly_connected(num_tasks_, edges_), ErrorKind::InvalidGraph,
                "task graph is not strongly connected");
        require(ceiling_.cols() == static_cast<Eigen::Index>(edges_.size()) && ceiling_.rows() > 0,
                ErrorKind::DimensionMismatch, "rate ceiling must be S x |edges|");
        for (Eigen::Index s = 0; s < ceiling_.rows(); ++s) {
            for (Eigen::Index e = 0; e < ceiling_.cols(); ++e) {
                require(std::isfinite(ceiling_(s, e)) && ceiling_(s, e) > 0.0, ErrorKind::InvalidGraph,
                        "rate ceilings must be positive and finite");
            }
        }
    }

    /// Same ceiling for every species and edge.
    static TaskGraph uniform(int num_tasks, std::vector<Edge> edges, int num_species, double ceiling) {
        const auto E = static_cast<Eigen::Index>(edges.size());
        return TaskGraph(num_tasks, std::move(edges), Eigen::MatrixXd::Constant(num_species, E, ceiling));
    }

    int num_tasks() const noexcept { return num_tasks_; }
    int num_edges() const noexcept { return static_cast<int>(edges_.size()); }
    int num_species() const noexcept { return static_cast<int>(ceiling_.rows()); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Eigen::MatrixXd& rate_ceiling() const noexcept { return ceiling_; }

    std::optional<int> edge_index(Edge e) const {
        for (std::size_t k = 0; k < edges_.size(); ++k) {
            if (edges_[k] == e) return static_cast<int>(k);
        }
        return std::nullopt;
    }

    friend bool operator==(const TaskGraph& a, const TaskGraph& b) {
        return a.num_tasks_ == b.num_tasks_ && a.edges_ == b.edges_ && a.ceiling_ == b.ceiling_;
    }

private:
    int num_tasks_;
    std::vector<Edge> edges_;
    Eigen::MatrixXd ceiling_;
};

/// M x S agent counts (task x species). Real valued: the mean-field model
/// produces fractional agents.
class AbstractState {
public:
    AbstractState() = default;

    explicit AbstractState(Eigen::MatrixXd counts) : counts_(std::move(counts)) {
        for (Eigen::Index i = 0; i < counts_.rows(); ++i) {
            for (Eigen::Index s = 0; s < counts_.cols(); ++s) {
                double& v = counts_(i, s);
                require(std::isfinite(v), ErrorKind::NonFinite, "state entry is not finite");
                require(v >= -kTolerances.state_negative_slack, ErrorKind::NegativeEntry,
                        "state entry (" + std::to_string(i) + "," + std::to_string(s) + ") is negative");
                v = std::max(v, 0.0);
            }
        }
    }

    int num_tasks() const noexcept { return static_cast<int>(counts_.rows()); }
    int num_species() const noexcept { return static_cast<int>(counts_.cols()); }
    const Eigen::MatrixXd& counts() const noexcept { return counts_; }
    Eigen::VectorXd species_totals() const { return counts_.colwise().sum().transpose(); }

    friend bool operator==(const AbstractState& a, const AbstractState& b) { return a.counts_ == b.counts_; }

private:
    Eigen::MatrixXd counts_;
};

/// Per-species rate matrices K^(s) (column convention: dx/dt = K x) and the
/// settle time at which the plan is evaluated.
struct RatePlan {
    std::vector<Eigen::MatrixXd> rate_matrices;
    double settle_time = 0.0;
};

struct TraitDistribution {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd variance;
};

/// Rate matrix of one species from per-edge rates aligned with graph.edges():
/// K(j, i) = k_ij on edges, diagonal = minus total outgoing rate.
inline Eigen::MatrixXd build_rate_matrix(const TaskGraph& graph, int species, std::span<const double> rates) {
    require(species >= 0 && species < graph.num_species(), ErrorKind::IndexOutOfRange, "species index out of range");
    require(static_cast<int>(rates.size()) == graph.num_edges(), ErrorKind::DimensionMismatch,
            "one rate per edge required");
    const int M = graph.num_tasks();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(M, M);
    for (int e = 0; e < graph.num_edges(); ++e) {
        const double k = rates[static_cast<std::size_t>(e)];
        const auto& edge = graph.edges()[static_cast<std::size_t>(e)];
        require(std::isfinite(k), ErrorKind::NonFinite, "rate is not finite");
        require(k >= 0.0, ErrorKind::NegativeRate,
                "negative rate on edge (" + std::to_string(edge.from) + "," + std::to_string(edge.to) + ")");
        require(k <= graph.rate_ceiling()(species, e), ErrorKind::RateAboveCeiling,
                "rate on edge (" + std::to_string(edge.from) + "," + std::to_string(edge.to) + ") exceeds ceiling");
        K(edge.to, edge.from) += k;
        K(edge.from, edge.from) -= k;
    }
    return K;
}

inline Eigen::MatrixXd build_rate_matrix(const TaskGraph& graph, int species, const std::map<Edge, double>& rates) {
    std::vector<double> dense(static_cast<std::size_t>(graph.num_edges()), 0.0);
    for (const auto& [edge, k] : rates) {
        const auto idx = graph.edge_index(edge);
        require(idx.has_value(), ErrorKind::UnknownEdge,
                "edge (" + std::to_string(edge.from) + "," + std::to_string(edge.to) + ") is not in the graph");
        dense[static_cast<std::size_t>(*idx)] = k;
    }
    return build_rate_matrix(graph, species, std::span<const double>(dense));
}

/// Per-edge rates read back out of a rate matrix (S x |edges|).
inline Eigen::MatrixXd plan_rates(const TaskGraph& graph, const RatePlan& plan) {
    Eigen::MatrixXd rates(static_cast<Eigen::Index>(plan.rate_matrices.size()), graph.num_edges());
    for (std::size_t s = 0; s < plan.rate_matrices.size(); ++s) {
        for (int e = 0; e < graph.num_edges(); ++e) {
            const auto& edge = graph.edges()[static_cast<std::size_t>(e)];
            rates(static_cast<Eigen::Index>(s), e) = plan.rate_matrices[s](edge.to, edge.from);
        }
    }
    return rates;
}

/// Checks the generator structure of every K^(s) against the graph and ceilings.
inline void validate_plan(const TaskGraph& graph, const RatePlan& plan) {
    require(static_cast<int>(plan.rate_matrices.size()) == graph.num_species(), ErrorKind::DimensionMismatch,
            "plan needs one rate matrix per species");
    require(std::isfinite(plan.settle_time) && plan.settle_time > 0.0, ErrorKind::InvariantViolation,
            "settle time must be positive");
    const int M = graph.num_tasks();
    for (std::size_t s = 0; s < plan.rate_matrices.size(); ++s) {
        const auto& K = plan.rate_matrices[s];
        require(K.rows() == M && K.cols() == M, ErrorKind::DimensionMismatch, "rate matrix must be M x M");
        for (int j = 0; j < M; ++j) {
            for (int i = 0; i < M; ++i) {
                if (i == j) continue;
                const auto idx = graph.edge_index(Edge{j, i});
                if (!idx) {
                    require(K(i, j) == 0.0, ErrorKind::InvariantViolation,
                            "rate matrix has a rate on a missing edge");
                    continue;
                }
                require(K(i, j) >= 0.0, ErrorKind::NegativeRate, "negative off-diagonal rate");
                require(K(i, j) <= graph.rate_ceiling()(static_cast<Eigen::Index>(s), *idx),
                        ErrorKind::RateAboveCeiling, "rate exceeds ceiling");
            }
            const double col = K.col(j).sum();
            const double scale = std::max(1.0, K.col(j).cwiseAbs().maxCoeff());
            require(std::abs(col) <= kTolerances.generator_column_sum * scale, ErrorKind::InvariantViolation,
                    "rate matrix column does not sum to zero");
        }
    }
}

/// X(t): column s is e^{K^(s) t} x^(s)(0).
inline AbstractState propagate(const AbstractState& x0, const RatePlan& plan, double t) {
    require(static_cast<int>(plan.rate_matrices.size()) == x0.num_species(), ErrorKind::DimensionMismatch,
            "plan and state disagree on the number of species");
    Eigen::MatrixXd out(x0.num_tasks(), x0.num_species());
    for (int s = 0; s < x0.num_species(); ++s) {
        const auto& K = plan.rate_matrices[static_cast<std::size_t>(s)];
        require(K.rows() == x0.num_tasks() && K.cols() == x0.num_tasks(), ErrorKind::DimensionMismatch,
                "rate matrix size does not match the number of tasks");
        out.col(s) = matrix_exponential(K, t) * x0.counts().col(s);
    }
    return AbstractState(std::move(out));
}

inline Eigen::MatrixXd trait_mean(const AbstractState& x, const TraitModel& model) {
    require(x.num_species() == model.num_species(), ErrorKind::DimensionMismatch,
            "state and model disagree on the number of species");
    return x.counts() * model.mean();
}

inline Eigen::MatrixXd trait_variance(const AbstractState& x, const TraitModel& model) {
    require(x.num_species() == model.num_species(), ErrorKind::DimensionMismatch,
            "state and model disagree on the number of species");
    return x.counts().cwiseAbs2() * model.variance();
}

inline TraitDistribution trait_distribution(const AbstractState& x, const TraitModel& model) {
    return {trait_mean(x, model), trait_variance(x, model)};
}

/// Cov(Y_ij, Y_kl); zero unless both entries refer to the same trait.
inline double trait_covariance(const AbstractState& x, const TraitModel& model, int i, int j, int k, int l) {
    require(x.num_species() == model.num_species(), ErrorKind::DimensionMismatch,
            "state and model disagree on the number of species");
    const int M = x.num_tasks();
    const int U = model.num_traits();
    require(i >= 0 && i < M && k >= 0 && k < M && j >= 0 && j < U && l >= 0 && l < U, ErrorKind::IndexOutOfRange,
            "covariance index out of range");
    if (j != l) return 0.0;
    double cov = 0.0;
    for (int s = 0; s < model.num_species(); ++s) {
        cov += x.counts()(i, s) * x.counts()(k, s) * model.variance()(s, j);
    }
    return cov;
}

/// Agent-level continuous-time Markov jump simulation of the same plan; each
/// agent holds at task i for Exp(-K(i,i)) and jumps to j with weight K(j,i).
inline AbstractState simulate_agents(const AbstractState& x0, const RatePlan& plan, double t, std::uint64_t seed) {
    require(static_cast<int>(plan.rate_matrices.size()) == x0.num_species(), ErrorKind::DimensionMismatch,
            "plan and state disagree on the number of species");
    require(std::isfinite(t) && t >= 0.0, ErrorKind::InvalidArgument, "time must be finite and nonnegative");
    const int M = x0.num_tasks();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M, x0.num_species());

    for (int s = 0; s < x0.num_species(); ++s) {
        const auto& K = plan.rate_matrices[static_cast<std::size_t>(s)];
        require(K.rows() == M && K.cols() == M, ErrorKind::DimensionMismatch,
                "rate matrix size does not match the number of tasks");
        for (int i = 0; i < M; ++i) {
            const double c = x0.counts()(i, s);
            const double n = std::round(c);
            require(std::abs(c - n) < 1e-9, ErrorKind::InvalidArgument, "agent simulation needs integer counts");
            for (long a = 0; a < static_cast<long>(n); ++a) {
                int node = i;
                double clock = 0.0;
                while (true) {
                    const double out_rate = -K(node, node);
                    if (out_rate <= 0.0) break;
                    clock += -std::log1p(-unit(rng)) / out_rate;
                    if (clock > t) break;
                    double pick = unit(rng) * out_rate;
                    int next = node;
                    for (int j = 0; j < M; ++j) {
                        if (j == node || K(j, node) <= 0.0) continue;
                        next = j;
                        pick -= K(j, node);
                        if (pick < 0.0) break;
                    }
                    node = next;
                }
                out(node, s) += 1.0;
            }
        }
    }
    return AbstractState(std::move(out));
}

} // namespace strata
