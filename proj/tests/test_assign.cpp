#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "kmeval/assign.hpp"
#include "kmeval/errors.hpp"
#include "oracles.hpp"

using namespace kmeval;

namespace {

ContingencyTable random_table(std::mt19937_64& gen, std::size_t r, std::size_t c, int max_count = 20) {
    std::vector<std::int64_t> counts(r * c);
    for (auto& x : counts) x = static_cast<std::int64_t>(gen() % static_cast<unsigned>(max_count + 1));
    return ContingencyTable(r, c, std::move(counts));
}

std::vector<std::vector<double>> as_rows(const ContingencyTable& t) {
    std::vector<std::vector<double>> w(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) w[i][j] = static_cast<double>(t(i, j));
    return w;
}

bool is_injective(const std::vector<std::size_t>& m) {
    std::set<std::size_t> seen;
    for (auto v : m)
        if (v != kUnassigned && !seen.insert(v).second) return false;
    return true;
}

}  // namespace

TEST(Hungarian, IdentityFavoring) {
    Matrix cost(2, 2);
    cost << 0, 9, 9, 0;
    const auto r = hungarian(cost);
    EXPECT_EQ(r.row_to_col, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(r.cost, 0.0);
}

TEST(Hungarian, SingleRowPicksArgmin) {
    Matrix cost(1, 4);
    cost << 5, 2, 7, 2;
    const auto r = hungarian(cost);
    EXPECT_EQ(r.row_to_col, (std::vector<std::size_t>{1}));
    EXPECT_EQ(r.cost, 2.0);
}

TEST(Hungarian, TallMatrixLeavesRowsOut) {
    Matrix cost(3, 1);
    cost << 4, 1, 3;
    const auto r = hungarian(cost);
    EXPECT_EQ(r.row_to_col, (std::vector<std::size_t>{kUnassigned, 0, kUnassigned}));
    EXPECT_EQ(r.cost, 1.0);
}

TEST(Hungarian, RandomSixBySixMatchesPermutationOracle) {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix cost(6, 6);
        std::vector<std::vector<double>> rows(6, std::vector<double>(6));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) rows[i][j] = cost(i, j) = static_cast<double>(gen() % 100);
        const auto r = hungarian(cost);
        EXPECT_TRUE(is_injective(r.row_to_col));
        EXPECT_EQ(r.cost, oracle::min_injective(rows));
    }
}

TEST(Hungarian, RectangularMatchesInjectiveOracle) {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t r = 1 + gen() % 5, c = r + gen() % 3;
        Matrix cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        std::vector<std::vector<double>> rows(r, std::vector<double>(c));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                rows[i][j] = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    static_cast<double>(gen() % 50) - 25.0;
        EXPECT_EQ(hungarian(cost).cost, oracle::min_injective(rows));
        // Transposed problem has the same optimum.
        EXPECT_EQ(hungarian(cost.transpose()).cost, oracle::min_injective(rows));
    }
}

TEST(Hungarian, ValueShiftsWithRowAndColumnConstants) {
    std::mt19937_64 gen(77);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix cost(5, 5);
        for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = static_cast<double>(gen() % 30);
        const double base = hungarian(cost).cost;
        const auto row = static_cast<Eigen::Index>(gen() % 5), col = static_cast<Eigen::Index>(gen() % 5);
        Matrix shifted = cost;
        shifted.row(row).array() += 17.0;
        shifted.col(col).array() -= 4.0;
        EXPECT_EQ(hungarian(shifted).cost, base + 17.0 - 4.0);
    }
}

TEST(Hungarian, RejectsNaN) {
    Matrix cost(2, 2);
    cost << 1, std::numeric_limits<double>::quiet_NaN(), 0, 1;
    EXPECT_THROW(hungarian(cost), NumericError);
}

TEST(OptimalClassMap, WorkedExamples) {
    auto r = optimal_class_map(ContingencyTable(3, 3, {5, 0, 0, 0, 3, 0, 0, 0, 2}));
    EXPECT_EQ(r.map.assignment, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(r.matched, 10);
    r = optimal_class_map(ContingencyTable(2, 2, {0, 4, 4, 0}));
    EXPECT_EQ(r.map.assignment, (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(r.matched, 8);
    EXPECT_THROW(optimal_class_map(ContingencyTable(2, 3, {1, 0, 0, 0, 1, 0})), UsageError);
}

TEST(OptimalClassMap, MatchesPermutationEnumeration) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + gen() % 7;
        const auto t = random_table(gen, n, n);
        const auto r = optimal_class_map(t);
        EXPECT_EQ(static_cast<double>(r.matched), oracle::max_injective(as_rows(t)));
        EXPECT_TRUE(is_injective(r.map.assignment));
        // Never worse than any other permutation, checked via accuracy.
        if (t.total() == 0) continue;
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        const double best = accuracy(t, r.map);
        do {
            EXPECT_LE(accuracy(t, ClassMap{perm}), best + 1e-15);
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}

TEST(OverclusterMap, WorkedExample) {
    const auto r = overcluster_map(ContingencyTable(3, 2, {10, 0, 0, 10, 3, 1}));
    EXPECT_EQ(r.map.assignment, (std::vector<std::size_t>{0, 1, 0}));
    EXPECT_EQ(r.matched, 23);
}

TEST(OverclusterMap, SquareReducesToOptimal) {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + gen() % 7;
        const auto t = random_table(gen, n, n);
        const auto a = overcluster_map(t), b = optimal_class_map(t);
        EXPECT_EQ(a.map, b.map);
        EXPECT_EQ(a.matched, b.matched);
    }
}

TEST(OverclusterMap, EveryClassCoveredAndStageOneOptimal) {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 1 + gen() % 4, r = c + gen() % 3;
        const auto t = random_table(gen, r, c);
        const auto res = overcluster_map(t);
        std::set<std::size_t> covered(res.map.assignment.begin(), res.map.assignment.end());
        EXPECT_EQ(covered.size(), c);
        // Stage one alone reaches the injective optimum; stage two only adds.
        const double stage_one = oracle::max_injective(as_rows(t.transposed()));
        EXPECT_GE(static_cast<double>(res.matched), stage_one);
    }
}

TEST(UnderclusterMap, WorkedExamples) {
    auto r = undercluster_map(ContingencyTable(1, 3, {1, 5, 2}));
    EXPECT_EQ(r.map.assignment, (std::vector<std::size_t>{1}));
    EXPECT_EQ(r.matched, 5);
    r = undercluster_map(ContingencyTable(2, 3, {5, 0, 0, 0, 0, 5}));
    EXPECT_EQ(r.map.assignment, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(r.matched, 10);
}

TEST(UnderclusterMap, MatchesInjectiveEnumeration) {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = random_table(gen, 3, 5);
        const auto r = undercluster_map(t);
        EXPECT_EQ(static_cast<double>(r.matched), oracle::max_injective(as_rows(t)));
        EXPECT_TRUE(is_injective(r.map.assignment));
    }
}

TEST(Accuracy, WorkedExamples) {
    EXPECT_EQ(accuracy(ContingencyTable(2, 2, {3, 0, 0, 4}), ClassMap{{0, 1}}), 1.0);
    const auto t = build_contingency(Partition({1, 1, 0, 0, 2}), Partition({0, 0, 1, 1, 2}));
    EXPECT_EQ(accuracy(t, optimal_class_map(t).map), 1.0);
    const auto single = build_contingency(Partition({0, 0, 0, 0}), Partition({0, 1, 0, 1}));
    EXPECT_EQ(accuracy(single, undercluster_map(single).map), 0.5);
}

TEST(Accuracy, Errors) {
    const ContingencyTable t(2, 2, {1, 0, 0, 1});
    EXPECT_THROW(accuracy(t, ClassMap{{0}}), InputError);
    EXPECT_THROW(accuracy(t, ClassMap{{0, 2}}), InputError);
}

TEST(Accuracy, InvariantUnderConsistentRowPermutation) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 2 + gen() % 5, c = 1 + gen() % 4;
        const auto t = random_table(gen, r, c);
        if (t.total() == 0) continue;
        ClassMap m;
        for (std::size_t i = 0; i < r; ++i) m.assignment.push_back(gen() % c);
        std::vector<std::size_t> perm(r);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<std::int64_t> counts(r * c);
        ClassMap pm;
        pm.assignment.resize(r);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) counts[perm[i] * c + j] = t(i, j);
            pm.assignment[perm[i]] = m[i];
        }
        EXPECT_EQ(accuracy(ContingencyTable(r, c, counts), pm), accuracy(t, m));
    }
}
