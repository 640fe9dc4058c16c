#include <random>

#include <gtest/gtest.h>

#include "kmeval/core.hpp"
#include "kmeval/errors.hpp"
#include "oracles.hpp"

using namespace kmeval;

namespace {

std::vector<std::int64_t> row_major(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
    std::vector<std::int64_t> v;
    for (auto r : rows) v.insert(v.end(), r.begin(), r.end());
    return v;
}

}  // namespace

TEST(Partition, InfersGroupCount) {
    Partition p({0, 2, 2});
    EXPECT_EQ(p.n_groups(), 3u);
    EXPECT_EQ(p.size(), 3u);
}

TEST(Partition, RejectsEmptyAndOutOfRange) {
    EXPECT_THROW(Partition(std::vector<std::size_t>{}), InputError);
    EXPECT_THROW(Partition({0, 3}, 2), InputError);
    EXPECT_NO_THROW(Partition({0, 1}, 5));
}

TEST(BuildContingency, IdenticalPartitions) {
    const auto t = build_contingency(Partition({0, 0, 1, 1}), Partition({0, 0, 1, 1}));
    EXPECT_EQ(t.counts(), row_major({{2, 0}, {0, 2}}));
    EXPECT_EQ(t.total(), 4);
}

TEST(BuildContingency, SingleCluster) {
    const auto t = build_contingency(Partition({0, 0, 0, 0}), Partition({0, 1, 2, 3}));
    EXPECT_EQ(t.rows(), 1u);
    EXPECT_EQ(t.counts(), row_major({{1, 1, 1, 1}}));
    EXPECT_EQ(t.total(), 4);
}

TEST(BuildContingency, HandTabulated) {
    const auto t = build_contingency(Partition({0, 0, 1, 1}), Partition({0, 0, 1, 2}));
    EXPECT_EQ(t.counts(), row_major({{2, 0, 0}, {0, 1, 1}}));
    EXPECT_EQ(t.row_marginals(), (std::vector<std::int64_t>{2, 2}));
    EXPECT_EQ(t.col_marginals(), (std::vector<std::int64_t>{2, 1, 1}));
}

TEST(BuildContingency, LengthMismatch) {
    EXPECT_THROW(build_contingency(Partition({0, 1}), Partition({0, 1, 1})), InputError);
}

TEST(BuildContingency, PropertiesOnRandomPartitions) {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + gen() % 40;
        const auto u = oracle::random_labels(gen, n, 1 + gen() % 5);
        const auto v = oracle::random_labels(gen, n, 1 + gen() % 5);
        const Partition pu(u), pv(v);
        const auto t = build_contingency(pu, pv);

        // Marginal and cell-bound invariants.
        std::int64_t sum = 0;
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) {
                sum += t(i, j);
                EXPECT_LE(t(i, j), std::min(t.row_marginals()[i], t.col_marginals()[j]));
            }
        EXPECT_EQ(sum, t.total());
        EXPECT_EQ(t.total(), static_cast<std::int64_t>(n));

        // Transpose symmetry.
        EXPECT_EQ(build_contingency(pv, pu), t.transposed());

        // Full keep-set is the identity.
        std::set<std::size_t> all;
        for (std::size_t c = 0; c < pv.n_groups(); ++c) all.insert(c);
        const auto [rp, rt] = restrict_to_classes(pu, pv, all);
        EXPECT_EQ(build_contingency(rp, rt), t);
    }
}

TEST(RestrictToClasses, SingleClass) {
    const auto [p, t] = restrict_to_classes(Partition({5, 5, 6, 6}), Partition({0, 1, 2, 1}), {1});
    EXPECT_EQ(t.labels(), (std::vector<std::size_t>{0, 0}));
    EXPECT_EQ(p.labels(), (std::vector<std::size_t>{5, 6}));
    EXPECT_EQ(p.n_groups(), 7u);
}

TEST(RestrictToClasses, AllClassesIsIdentity) {
    const Partition pred({1, 0, 2}), truth({0, 1, 1});
    const auto [p, t] = restrict_to_classes(pred, truth, {0, 1});
    EXPECT_EQ(p, pred);
    EXPECT_EQ(t, truth);
}

TEST(RestrictToClasses, HandEnumerated) {
    const auto [p, t] = restrict_to_classes(Partition({1, 1, 0, 0, 2}), Partition({0, 0, 1, 2, 2}), {0, 2});
    EXPECT_EQ(t.labels(), (std::vector<std::size_t>{0, 0, 1, 1}));
    EXPECT_EQ(p.labels(), (std::vector<std::size_t>{1, 1, 0, 2}));
}

TEST(RestrictToClasses, Errors) {
    const Partition pred({0, 1}), truth({0, 0}, 2);
    EXPECT_THROW(restrict_to_classes(pred, truth, {}), InputError);
    EXPECT_THROW(restrict_to_classes(pred, truth, {1}), InputError);  // nothing left
    EXPECT_THROW(restrict_to_classes(pred, truth, {4}), InputError);
}

TEST(MatrixSource, ChunksCoverAllRows) {
    Matrix m(7, 2);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(i);
    MatrixSource src(m, 3);
    Matrix chunk;
    std::vector<Eigen::Index> sizes;
    while (src.next(chunk)) {
        EXPECT_EQ(chunk.cols(), 2);
        sizes.push_back(chunk.rows());
    }
    EXPECT_EQ(sizes, (std::vector<Eigen::Index>{3, 3, 1}));
    src.rewind();
    ASSERT_TRUE(src.next(chunk));
    EXPECT_EQ(chunk(0, 1), 1.0);
}

TEST(MatrixSource, NonFiniteIsAnError) {
    Matrix m = Matrix::Zero(3, 2);
    m(2, 1) = std::numeric_limits<double>::quiet_NaN();
    MatrixSource src(m, 2);
    Matrix chunk;
    EXPECT_TRUE(src.next(chunk));
    EXPECT_THROW(src.next(chunk), NumericError);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
    for (std::size_t threads : {1u, 2u, 3u, 8u}) {
        std::vector<int> hits(101, 0);
        parallel_for(hits.size(), threads, [&](std::size_t b, std::size_t e) {
            for (auto i = b; i < e; ++i) ++hits[i];
        });
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(ParallelFor, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(10, 4, [](std::size_t b, std::size_t) {
                     if (b == 0) throw InputError("boom");
                 }),
                 InputError);
}
