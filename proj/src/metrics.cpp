#include "kmeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kmeval/errors.hpp"

namespace kmeval {

namespace {

double choose2(std::int64_t n) {
    return n < 2 ? 0.0 : static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
}

}  // namespace

LogFactorial::LogFactorial(std::size_t max_n) : table_(max_n + 1) {
    for (std::size_t n = 0; n <= max_n; ++n) table_[n] = std::lgamma(static_cast<double>(n) + 1.0);
}

double entropy(std::span<const std::int64_t> marginals, std::int64_t total) {
    if (total <= 0) throw InputError("entropy of an empty partition");
    std::int64_t sum = 0;
    double h = 0.0;
    const auto n = static_cast<double>(total);
    for (auto m : marginals) {
        if (m < 0) throw InputError("negative count in entropy");
        sum += m;
        if (m == 0) continue;
        const double p = static_cast<double>(m) / n;
        h -= p * std::log(p);
    }
    if (sum != total) throw InputError("marginals do not sum to the total");
    return std::max(h, 0.0);
}

double mutual_information(const ContingencyTable& t) {
    if (t.total() <= 0) throw InputError("mutual information of an empty table");
    const auto n = static_cast<double>(t.total());
    const double log_n = std::log(n);
    double mi = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        const double log_a = std::log(static_cast<double>(t.row_marginals()[i]));
        for (std::size_t j = 0; j < t.cols(); ++j) {
            const auto nij = t(i, j);
            if (nij == 0) continue;
            const auto c = static_cast<double>(nij);
            mi += (c / n) * (std::log(c) + log_n - log_a -
                             std::log(static_cast<double>(t.col_marginals()[j])));
        }
    }
    return std::max(mi, 0.0);
}

double nmi(const ContingencyTable& t) {
    const double hu = entropy(t.row_marginals(), t.total());
    const double hv = entropy(t.col_marginals(), t.total());
    if (hu == 0.0 && hv == 0.0) return 1.0;
    return std::clamp(mutual_information(t) / (0.5 * (hu + hv)), 0.0, 1.0);
}

double expected_mutual_information(const ContingencyTable& t, std::size_t threads) {
    const std::int64_t total = t.total();
    if (total <= 0) throw InputError("expected mutual information of an empty table");
    const LogFactorial lf(static_cast<std::size_t>(total));
    const auto n = static_cast<double>(total);
    const double log_n = std::log(n);
    const auto& a = t.row_marginals();
    const auto& b = t.col_marginals();

    std::vector<double> per_row(t.rows(), 0.0);
    parallel_for(t.rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::int64_t ai = a[i];
            if (ai == 0) continue;
            double row_sum = 0.0;
            for (std::size_t j = 0; j < t.cols(); ++j) {
                const std::int64_t bj = b[j];
                if (bj == 0) continue;
                const double log_ab = std::log(static_cast<double>(ai)) + std::log(static_cast<double>(bj));
                // Terms of ln P(n_ij = c) that do not depend on c.
                const double fixed = lf(ai) + lf(bj) + lf(total - ai) + lf(total - bj) - lf(total);
                const std::int64_t lo = std::max<std::int64_t>(1, ai + bj - total);
                const std::int64_t hi = std::min(ai, bj);
                for (std::int64_t c = lo; c <= hi; ++c) {
                    const auto cd = static_cast<double>(c);
                    const double log_p =
                        fixed - lf(c) - lf(ai - c) - lf(bj - c) - lf(total - ai - bj + c);
                    row_sum += (cd / n) * (log_n + std::log(cd) - log_ab) * std::exp(log_p);
                }
            }
            per_row[i] = row_sum;
        }
    });
    double emi = 0.0;
    for (double v : per_row) emi += v;
    return emi;
}

double ami(const ContingencyTable& t, std::size_t threads) {
    const double hu = entropy(t.row_marginals(), t.total());
    const double hv = entropy(t.col_marginals(), t.total());
    const double mi = mutual_information(t);
    const double emi = expected_mutual_information(t, threads);
    const double avg = 0.5 * (hu + hv);
    const double denom = avg - emi;
    constexpr double eps = 1e-12;
    if (std::abs(denom) < eps)
        return (std::abs(mi - avg) < eps && std::abs(emi - avg) < eps) ? 1.0 : 0.0;
    return (mi - emi) / denom;
}

PairCounts pair_counts(const ContingencyTable& t) {
    PairCounts pc;
    pc.pairs = choose2(t.total());
    for (auto c : t.counts()) pc.same_both += choose2(c);
    for (auto m : t.row_marginals()) pc.same_rows += choose2(m);
    for (auto m : t.col_marginals()) pc.same_cols += choose2(m);
    return pc;
}

double rand_index(const ContingencyTable& t) {
    if (t.total() < 2) throw InputError("Rand index needs at least two instances");
    const PairCounts pc = pair_counts(t);
    const double tn = pc.pairs - pc.same_rows - pc.same_cols + pc.same_both;
    return (pc.same_both + tn) / pc.pairs;
}

double ari(const ContingencyTable& t) {
    if (t.total() < 2) throw InputError("adjusted Rand index needs at least two instances");
    const PairCounts pc = pair_counts(t);
    const double expected = pc.same_rows * pc.same_cols / pc.pairs;
    const double max_index = 0.5 * (pc.same_rows + pc.same_cols);
    const double denom = max_index - expected;
    if (denom == 0.0)
        return (pc.same_rows == pc.same_cols && pc.same_both == pc.same_rows) ? 1.0 : 0.0;
    return (pc.same_both - expected) / denom;
}

}  // namespace kmeval
