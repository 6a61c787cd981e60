#pragma once

// Minimal species subsets (eigenspecies / coverspecies): the fewest rows of the
// binarized mean trait matrix from which every other row can be rebuilt
// (exactly, or dominated entrywise) as a natural-number combination.

#include "strata/error.hpp"
#include "strata/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace strata {

enum class Relation { Equal, Cover };

struct CombinationOptions {
    int alpha_max = 0;                         // 0 selects the default bound per target
    double tol = 1e-6;                         // relative, per entry
    std::uint64_t budget = 10'000'000;         // candidate coefficient vectors
};

struct MinspeciesResult {
    int cardinality = 0;
    std::vector<int> members;        // zero-based species indices, ascending
    Eigen::MatrixXi combination;     // S x |members|, mu ~ combination * reduced_traits
    Eigen::MatrixXd reduced_traits;  // |members| x U
    int total_coefficient = 0;       // sum of combination entries
};

namespace detail {

inline bool entry_matches(double value, double target, Relation rel, double tol) {
    const double slack = tol * std::max(1.0, std::abs(target));
    return rel == Relation::Equal ? std::abs(value - target) <= slack : value >= target - slack;
}

inline bool satisfies(const Eigen::RowVectorXd& value, const Eigen::RowVectorXd& target, Relation rel, double tol) {
    for (Eigen::Index u = 0; u < target.size(); ++u)
        if (!entry_matches(value(u), target(u), rel, tol)) return false;
    return true;
}

// ceil(max target entry / smallest positive contributor entry), in [1, 50].
inline int default_alpha_max(const Eigen::MatrixXd& rows, const Eigen::RowVectorXd& target) {
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows.size(); ++i)
        if (rows.data()[i] > 0.0) smallest = std::min(smallest, rows.data()[i]);
    const double biggest = target.size() > 0 ? target.maxCoeff() : 0.0;
    if (!std::isfinite(smallest) || biggest <= 0.0) return 1;
    return static_cast<int>(std::clamp(std::ceil(biggest / smallest - 1e-9), 1.0, 50.0));
}

} // namespace detail

/// Searches natural-number coefficients alpha (each <= alpha_max) with
/// sum_s alpha_s * rows.row(s) equal to (or entrywise >=) target. Candidates are
/// visited by increasing coefficient sum, so the first hit has minimal sum.
/// Returns nullopt when no combination exists within the bound; throws
/// BoundTooLarge when the budget runs out before the search completes.
inline std::optional<Eigen::VectorXi> nonneg_integer_combination(const Eigen::MatrixXd& rows,
                                                                 const Eigen::RowVectorXd& target, Relation rel,
                                                                 const CombinationOptions& opt = {}) {
    require(rows.cols() == target.size(), ErrorKind::DimensionMismatch, "rows and target must have equal length");
    require(opt.alpha_max >= 0 && opt.tol >= 0.0, ErrorKind::InvalidArgument, "alpha_max and tol must be nonnegative");
    const int k = static_cast<int>(rows.rows());
    const int amax = opt.alpha_max > 0 ? opt.alpha_max : detail::default_alpha_max(rows, target);

    if (k == 0) {
        if (detail::satisfies(Eigen::RowVectorXd::Zero(target.size()), target, rel, opt.tol)) return Eigen::VectorXi(0);
        return std::nullopt;
    }
    if (rel == Relation::Cover) {
        const Eigen::RowVectorXd most = static_cast<double>(amax) * rows.colwise().sum();
        if (!detail::satisfies(most, target, rel, opt.tol)) return std::nullopt;
    }

    std::uint64_t visited = 0;
    Eigen::VectorXi alpha = Eigen::VectorXi::Zero(k);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(target.size());

    // Depth-first fill of alpha(i..k-1) with exactly `remaining` units left.
    auto fill = [&](auto&& self, int i, int remaining) -> bool {
        if (i == k - 1) {
            if (remaining > amax) return false;
            if (++visited > opt.budget)
                fail(ErrorKind::BoundTooLarge, "combination search exceeded its budget of " +
                                                   std::to_string(opt.budget) + " candidates");
            alpha(i) = remaining;
            const Eigen::RowVectorXd value = acc + remaining * rows.row(i);
            return detail::satisfies(value, target, rel, opt.tol);
        }
        for (int a = std::min(amax, remaining); a >= 0; --a) {
            if (remaining - a > amax * (k - 1 - i)) break;
            alpha(i) = a;
            acc += a * rows.row(i);
            const bool hit = self(self, i + 1, remaining - a);
            acc -= a * rows.row(i);
            if (hit) return true;
        }
        alpha(i) = 0;
        return false;
    };

    for (int total = 0; total <= amax * k; ++total) {
        alpha.setZero();
        if (fill(fill, 0, total)) return alpha;
    }
    return std::nullopt;
}

namespace detail {

inline std::optional<MinspeciesResult> try_subset(const Eigen::MatrixXd& mu, const std::vector<int>& members,
                                                  Relation rel, const CombinationOptions& opt) {
    const auto S = mu.rows();
    const auto c = static_cast<Eigen::Index>(members.size());
    MinspeciesResult r;
    r.cardinality = static_cast<int>(c);
    r.members = members;
    r.reduced_traits.resize(c, mu.cols());
    for (Eigen::Index j = 0; j < c; ++j) r.reduced_traits.row(j) = mu.row(members[static_cast<std::size_t>(j)]);
    r.combination = Eigen::MatrixXi::Zero(S, c);
    for (Eigen::Index s = 0; s < S; ++s) {
        const auto pos = std::find(members.begin(), members.end(), static_cast<int>(s));
        if (pos != members.end()) {
            r.combination(s, pos - members.begin()) = 1;
            r.total_coefficient += 1;
            continue;
        }
        const auto alpha = nonneg_integer_combination(r.reduced_traits, mu.row(s), rel, opt);
        if (!alpha) return std::nullopt;
        r.combination.row(s) = alpha->transpose();
        r.total_coefficient += alpha->sum();
    }
    return r;
}

// Smallest cardinality first; within it, the smallest total coefficient sum,
// then the lexicographically smallest member set.
inline MinspeciesResult minspecies(const TraitModel& model, Relation rel, const CombinationOptions& opt) {
    const Eigen::MatrixXd mu = binarize_noncumulative(model).mean();
    const int S = static_cast<int>(mu.rows());
    require(S <= 20, ErrorKind::BoundTooLarge, "subset enumeration is limited to 20 species");
    for (int c = 1; c <= S; ++c) {
        std::optional<MinspeciesResult> best;
        std::vector<int> idx(static_cast<std::size_t>(c));
        for (int i = 0; i < c; ++i) idx[static_cast<std::size_t>(i)] = i;
        while (true) {
            auto r = try_subset(mu, idx, rel, opt);
            if (r && (!best || r->total_coefficient < best->total_coefficient)) best = std::move(r);
            int i = c - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == S - c + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < c; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
        if (best) return *best;
    }
    fail(ErrorKind::InvariantViolation, "the full species set must always qualify");
}

} // namespace detail

inline MinspeciesResult eigenspecies(const TraitModel& model, const CombinationOptions& opt = {}) {
    return detail::minspecies(model, Relation::Equal, opt);
}

inline MinspeciesResult coverspecies(const TraitModel& model, const CombinationOptions& opt = {}) {
    return detail::minspecies(model, Relation::Cover, opt);
}

} // namespace strata
