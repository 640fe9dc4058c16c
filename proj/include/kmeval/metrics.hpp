#pragma once

// Partition-comparison metrics over a contingency table. Logarithms are
// natural; entropies and mutual information are in nats.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kmeval/core.hpp"

namespace kmeval {

/// ln(n!) for n in [0, max_n], via lgamma.
class LogFactorial {
public:
    explicit LogFactorial(std::size_t max_n);
    double operator()(std::int64_t n) const { return table_[static_cast<std::size_t>(n)]; }

private:
    std::vector<double> table_;
};

double entropy(std::span<const std::int64_t> marginals, std::int64_t total);

double mutual_information(const ContingencyTable& table);

/// MI over the arithmetic mean of the two entropies; 1 when both
/// partitions are a single group.
double nmi(const ContingencyTable& table);

/// E[MI] under random relabelings with both marginals fixed
/// (hypergeometric cell distribution). Rows are summed independently and
/// then combined in row order, so the value does not depend on `threads`.
double expected_mutual_information(const ContingencyTable& table, std::size_t threads = 1);

/// (MI - E[MI]) / (mean(H_U, H_V) - E[MI]). A vanishing denominator gives
/// 1 for identical trivial partitions and 0 otherwise.
double ami(const ContingencyTable& table, std::size_t threads = 1);

struct PairCounts {
    double pairs = 0;       // C(N, 2)
    double same_both = 0;   // sum_ij C(n_ij, 2)
    double same_rows = 0;   // sum_i C(a_i, 2)
    double same_cols = 0;   // sum_j C(b_j, 2)
};

PairCounts pair_counts(const ContingencyTable& table);

double rand_index(const ContingencyTable& table);

/// Chance-adjusted Rand index; a vanishing denominator gives 1 for
/// identical partitions and 0 otherwise.
double ari(const ContingencyTable& table);

}  // namespace kmeval
