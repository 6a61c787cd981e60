#include "test_support.hpp"

#include "strata/diversity.hpp"

#include <gtest/gtest.h>

#include <random>

namespace strata {
namespace {

Eigen::MatrixXd speed_model_means() { return binarize_noncumulative(testing::example_model_with_speed()).mean(); }

TraitModel model_from(const Eigen::MatrixXd& mu) {
    return build_trait_model(mu, Eigen::MatrixXd::Zero(mu.rows(), mu.cols()),
                             std::vector<TraitKind>(static_cast<std::size_t>(mu.cols()), TraitKind::cumulative()),
                             std::vector<int>(static_cast<std::size_t>(mu.rows()), 1));
}

// Independent oracle: full grid over alpha in [0, amax]^k.
bool brute_force_exists(const Eigen::MatrixXd& rows, const Eigen::RowVectorXd& target, Relation rel, int amax,
                        int* best_sum = nullptr) {
    const int k = static_cast<int>(rows.rows());
    std::vector<int> a(static_cast<std::size_t>(k), 0);
    bool found = false;
    int best = 1 << 30;
    while (true) {
        Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(target.size());
        int sum = 0;
        for (int i = 0; i < k; ++i) {
            v += a[static_cast<std::size_t>(i)] * rows.row(i);
            sum += a[static_cast<std::size_t>(i)];
        }
        bool ok = true;
        for (Eigen::Index u = 0; u < target.size(); ++u) {
            const double slack = 1e-6 * std::max(1.0, std::abs(target(u)));
            ok = ok && (rel == Relation::Equal ? std::abs(v(u) - target(u)) <= slack : v(u) >= target(u) - slack);
        }
        if (ok) {
            found = true;
            best = std::min(best, sum);
        }
        int i = 0;
        while (i < k && a[static_cast<std::size_t>(i)] == amax) a[static_cast<std::size_t>(i++)] = 0;
        if (i == k) break;
        ++a[static_cast<std::size_t>(i)];
    }
    if (best_sum) *best_sum = best;
    return found;
}

TEST(Combination, SecondTraitBreaksPrintedSum) {
    // rows 1 + 2 give 25 in the second trait, the fourth row has 35.
    const Eigen::MatrixXd mu = speed_model_means();
    const auto alpha = nonneg_integer_combination(mu.topRows(2), mu.row(3), Relation::Equal);
    EXPECT_FALSE(alpha.has_value());
    Eigen::RowVectorXd corrected = mu.row(3);
    corrected(1) = 25;
    const auto fixed = nonneg_integer_combination(mu.topRows(2), corrected, Relation::Equal);
    ASSERT_TRUE(fixed.has_value());
    EXPECT_EQ(*fixed, Eigen::Vector2i(1, 1));
}

TEST(Combination, SingleRowTargetGetsUnitCoefficient) {
    const Eigen::MatrixXd mu = speed_model_means();
    const auto alpha = nonneg_integer_combination(mu.topRows(3), mu.row(2), Relation::Equal);
    ASSERT_TRUE(alpha.has_value());
    EXPECT_EQ(*alpha, Eigen::Vector3i(0, 0, 1));
}

TEST(Combination, CoverUsesMinimalSum) {
    Eigen::MatrixXd rows(1, 2);
    rows << 50, 15;
    const auto alpha = nonneg_integer_combination(rows, Eigen::RowVector2d(175, 0), Relation::Cover);
    ASSERT_TRUE(alpha.has_value());
    EXPECT_EQ((*alpha)(0), 4);
}

TEST(Combination, BudgetIsReported) {
    Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(6, 1, 3.0);
    CombinationOptions opt;
    opt.alpha_max = 50;
    opt.budget = 1000;
    try {
        nonneg_integer_combination(rows, Eigen::RowVectorXd::Constant(1, 1.0), Relation::Equal, opt);
        FAIL() << "expected BoundTooLarge";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::BoundTooLarge);
    }
}

TEST(Combination, AgreesWithExhaustiveGrid) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> small(0, 3);
    for (int trial = 0; trial < 300; ++trial) {
        Eigen::MatrixXd rows(3, 3);
        for (int i = 0; i < 9; ++i) rows.data()[i] = small(rng);
        Eigen::RowVectorXd target(3);
        for (int i = 0; i < 3; ++i) target(i) = small(rng) * 2;
        for (Relation rel : {Relation::Equal, Relation::Cover}) {
            CombinationOptions opt;
            opt.alpha_max = 3;
            int best = 0;
            const bool exists = brute_force_exists(rows, target, rel, 3, &best);
            const auto got = nonneg_integer_combination(rows, target, rel, opt);
            ASSERT_EQ(got.has_value(), exists) << "trial " << trial;
            if (got) {
                EXPECT_EQ(got->sum(), best);
                EXPECT_TRUE(got->maxCoeff() <= 3 && got->minCoeff() >= 0);
            }
        }
    }
}

TEST(Minspecies, RunningExample) {
    const auto model = testing::example_model_with_speed();
    const auto cover = coverspecies(model);
    EXPECT_EQ(cover.cardinality, 1);
    EXPECT_EQ(cover.members, std::vector<int>{3});
    EXPECT_EQ(cover.combination, Eigen::MatrixXi::Ones(4, 1));
    // The exact relation fails for the fourth row, so every species is needed.
    const auto eig = eigenspecies(model);
    EXPECT_EQ(eig.cardinality, 4);
}

TEST(Minspecies, CorrectedRunningExampleFactorizes) {
    Eigen::MatrixXd mu = speed_model_means();
    mu(3, 1) = 25;
    const auto eig = eigenspecies(model_from(mu));
    EXPECT_EQ(eig.cardinality, 3);
    EXPECT_EQ(eig.members, (std::vector<int>{0, 1, 2}));
    Eigen::MatrixXi A(4, 3);
    A << 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 0;
    EXPECT_EQ(eig.combination, A);
    EXPECT_TRUE((A.cast<double>() * eig.reduced_traits - mu).isZero(1e-9));
}

TEST(Minspecies, SmallCases) {
    Eigen::MatrixXd one(1, 2);
    one << 3, 4;
    EXPECT_EQ(eigenspecies(model_from(one)).cardinality, 1);
    EXPECT_EQ(coverspecies(model_from(one)).cardinality, 1);

    Eigen::MatrixXd dup(3, 2);
    dup << 1, 2, 5, 1, 1, 2;
    const auto eig = eigenspecies(model_from(dup));
    EXPECT_EQ(eig.cardinality, 2);
    EXPECT_EQ(eig.members, (std::vector<int>{0, 1}));

    Eigen::MatrixXd dominated(3, 2);
    dominated << 1, 1, 9, 9, 2, 3;
    const auto cov = coverspecies(model_from(dominated));
    EXPECT_EQ(cov.cardinality, 1);
    EXPECT_EQ(cov.members, std::vector<int>{1});
}

// Exhaustive subsets x exhaustive coefficient grids.
int brute_force_cardinality(const Eigen::MatrixXd& mu, Relation rel, int amax) {
    const int S = static_cast<int>(mu.rows());
    int best = S;
    for (int mask = 1; mask < (1 << S); ++mask) {
        std::vector<int> members;
        for (int s = 0; s < S; ++s)
            if (mask & (1 << s)) members.push_back(s);
        if (static_cast<int>(members.size()) >= best) continue;
        Eigen::MatrixXd rows(static_cast<Eigen::Index>(members.size()), mu.cols());
        for (std::size_t j = 0; j < members.size(); ++j) rows.row(static_cast<Eigen::Index>(j)) = mu.row(members[j]);
        bool ok = true;
        for (int s = 0; s < S && ok; ++s)
            if (!(mask & (1 << s))) ok = brute_force_exists(rows, mu.row(s), rel, amax);
        if (ok) best = static_cast<int>(members.size());
    }
    return best;
}

TEST(Minspecies, AgreesWithExhaustiveSearchAndInvariants) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> small(0, 4), Sd(1, 4), Ud(1, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const int S = Sd(rng), U = Ud(rng);
        Eigen::MatrixXd mu(S, U);
        for (int i = 0; i < S * U; ++i) mu.data()[i] = small(rng);
        // Build some combinations in so that exact matches occur.
        if (S >= 3 && trial % 2 == 0) mu.row(S - 1) = mu.row(0) + 2 * mu.row(1);
        CombinationOptions opt;
        opt.alpha_max = 4;
        const auto eig = eigenspecies(model_from(mu), opt);
        const auto cov = coverspecies(model_from(mu), opt);
        EXPECT_EQ(eig.cardinality, brute_force_cardinality(mu, Relation::Equal, 4)) << "trial " << trial;
        EXPECT_EQ(cov.cardinality, brute_force_cardinality(mu, Relation::Cover, 4)) << "trial " << trial;
        EXPECT_LE(cov.cardinality, eig.cardinality);
        EXPECT_GE(cov.cardinality, 1);
        EXPECT_LE(eig.cardinality, S);
        const Eigen::MatrixXd rebuilt = eig.combination.cast<double>() * eig.reduced_traits;
        EXPECT_TRUE((rebuilt - mu).isZero(1e-9));
        const Eigen::MatrixXd covered = cov.combination.cast<double>() * cov.reduced_traits;
        EXPECT_TRUE(((covered - mu).array() >= -1e-9).all());

        // Reversing the species order permutes the answer, never changes its size.
        const Eigen::MatrixXd rev = mu.colwise().reverse();
        EXPECT_EQ(eigenspecies(model_from(rev), opt).cardinality, eig.cardinality);
        EXPECT_EQ(coverspecies(model_from(rev), opt).cardinality, cov.cardinality);
    }
}

} // namespace
} // namespace strata
