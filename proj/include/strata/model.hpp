#pragma once

#include "strata/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace strata {

/// Cumulative traits add up across agents; non-cumulative ones are reduced to
/// a 0/1 "meets the minimum" indicator against `q_min`.
class TraitKind {
public:
    static TraitKind cumulative() { return TraitKind{}; }

    static TraitKind non_cumulative(double q_min) {
        require(std::isfinite(q_min) && q_min >= 0.0, ErrorKind::NegativeEntry,
                "q_min must be finite and nonnegative");
        TraitKind kind;
        kind.q_min_ = q_min;
        return kind;
    }

    bool is_cumulative() const noexcept { return !q_min_.has_value(); }
    std::optional<double> q_min() const noexcept { return q_min_; }

    friend bool operator==(const TraitKind&, const TraitKind&) = default;

private:
    TraitKind() = default;
    std::optional<double> q_min_;
};

/// Reporting labels; units are free-form strings with no algebra attached.
struct TraitLabels {
    std::vector<std::string> species_names;
    std::vector<std::string> trait_names;
    std::vector<std::string> trait_units;
};

class TraitModel;
TraitModel build_trait_model(Eigen::MatrixXd mu, Eigen::MatrixXd var, std::vector<TraitKind> kinds,
                             std::vector<int> species_sizes, TraitLabels labels = {});

/// Species-trait model: per-species Gaussian trait means and variances
/// (independent entries, so the covariance is just the S x U variance matrix).
class TraitModel {
public:
    int num_species() const noexcept { return static_cast<int>(mean_.rows()); }
    int num_traits() const noexcept { return static_cast<int>(mean_.cols()); }

    const Eigen::MatrixXd& mean() const noexcept { return mean_; }
    const Eigen::MatrixXd& variance() const noexcept { return variance_; }
    const std::vector<TraitKind>& kinds() const noexcept { return kinds_; }
    const std::vector<int>& species_sizes() const noexcept { return sizes_; }
    const TraitLabels& labels() const noexcept { return labels_; }
    bool binarized() const noexcept { return binarized_; }

    long total_agents() const {
        long total = 0;
        for (int n : sizes_) total += n;
        return total;
    }

    friend bool operator==(const TraitModel& a, const TraitModel& b) {
        return a.mean_ == b.mean_ && a.variance_ == b.variance_ && a.kinds_ == b.kinds_ &&
               a.sizes_ == b.sizes_ && a.binarized_ == b.binarized_ &&
               a.labels_.species_names == b.labels_.species_names &&
               a.labels_.trait_names == b.labels_.trait_names &&
               a.labels_.trait_units == b.labels_.trait_units;
    }

private:
    friend TraitModel build_trait_model(Eigen::MatrixXd, Eigen::MatrixXd, std::vector<TraitKind>,
                                        std::vector<int>, TraitLabels);
    friend TraitModel binarize_noncumulative(const TraitModel&);

    TraitModel() = default;

    Eigen::MatrixXd mean_;
    Eigen::MatrixXd variance_;
    std::vector<TraitKind> kinds_;
    std::vector<int> sizes_;
    TraitLabels labels_;
    bool binarized_ = false;
};

namespace detail {

inline void check_nonnegative_finite(const Eigen::MatrixXd& m, const char* name) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            require(std::isfinite(v), ErrorKind::NonFinite,
                    std::string(name) + "(" + std::to_string(i) + "," + std::to_string(j) + ") is not finite");
            require(v >= 0.0, ErrorKind::NegativeEntry,
                    std::string(name) + "(" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
        }
    }
}

inline std::vector<std::string> default_names(const char* prefix, int n) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i + 1));
    return names;
}

} // namespace detail

inline TraitModel build_trait_model(Eigen::MatrixXd mu, Eigen::MatrixXd var, std::vector<TraitKind> kinds,
                                    std::vector<int> species_sizes, TraitLabels labels) {
    const auto S = mu.rows();
    const auto U = mu.cols();
    require(S > 0 && U > 0, ErrorKind::EmptyTeam, "trait model needs at least one species and one trait");
    require(var.rows() == S && var.cols() == U, ErrorKind::DimensionMismatch,
            "variance matrix must match the mean matrix shape");
    require(static_cast<Eigen::Index>(kinds.size()) == U, ErrorKind::DimensionMismatch,
            "one trait kind per trait column required");
    require(static_cast<Eigen::Index>(species_sizes.size()) == S, ErrorKind::DimensionMismatch,
            "one species size per species row required");
    detail::check_nonnegative_finite(mu, "mu");
    detail::check_nonnegative_finite(var, "var");
    for (std::size_t s = 0; s < species_sizes.size(); ++s) {
        require(species_sizes[s] > 0, ErrorKind::EmptyTeam,
                "species " + std::to_string(s) + " has no agents");
    }

    if (labels.species_names.empty()) labels.species_names = detail::default_names("S", static_cast<int>(S));
    if (labels.trait_names.empty()) labels.trait_names = detail::default_names("q", static_cast<int>(U));
    if (labels.trait_units.empty()) labels.trait_units.assign(static_cast<std::size_t>(U), "");
    require(static_cast<Eigen::Index>(labels.species_names.size()) == S &&
                static_cast<Eigen::Index>(labels.trait_names.size()) == U &&
                static_cast<Eigen::Index>(labels.trait_units.size()) == U,
            ErrorKind::DimensionMismatch, "label counts must match the model dimensions");

    TraitModel model;
    model.mean_ = std::move(mu);
    model.variance_ = std::move(var);
    model.kinds_ = std::move(kinds);
    model.sizes_ = std::move(species_sizes);
    model.labels_ = std::move(labels);
    return model;
}

/// Replaces every non-cumulative column by the indicator mu >= q_min and zeroes
/// its variance. A model that is already binarized is returned unchanged.
inline TraitModel binarize_noncumulative(const TraitModel& model) {
    if (model.binarized_) return model;
    TraitModel out = model;
    for (int u = 0; u < model.num_traits(); ++u) {
        const auto q_min = model.kinds_[static_cast<std::size_t>(u)].q_min();
        if (!q_min) continue;
        for (int s = 0; s < model.num_species(); ++s) {
            out.mean_(s, u) = model.mean_(s, u) >= *q_min ? 1.0 : 0.0;
            out.variance_(s, u) = 0.0;
        }
    }
    out.binarized_ = true;
    return out;
}

/// One realization of the species-trait matrix Q. Gaussian draws are clamped
/// at zero; binarized non-cumulative entries are copied from the mean.
template <class Engine>
Eigen::MatrixXd sample_trait_matrix(const TraitModel& model, Engine& rng) {
    const auto& mu = model.mean();
    const auto& var = model.variance();
    Eigen::MatrixXd q(mu.rows(), mu.cols());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index s = 0; s < mu.rows(); ++s) {
        for (Eigen::Index u = 0; u < mu.cols(); ++u) {
            const bool fixed = model.binarized() && !model.kinds()[static_cast<std::size_t>(u)].is_cumulative();
            if (fixed || var(s, u) == 0.0) {
                q(s, u) = mu(s, u);
                continue;
            }
            q(s, u) = std::max(0.0, mu(s, u) + std::sqrt(var(s, u)) * normal(rng));
        }
    }
    return q;
}

inline Eigen::MatrixXd sample_trait_matrix(const TraitModel& model, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_trait_matrix(model, rng);
}

} // namespace strata
