#include "kmeval/assign.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "kmeval/errors.hpp"

namespace kmeval {

namespace {

// Rows <= cols. Returns, for every row, its matched column.
std::vector<std::size_t> solve_wide(const MatrixRef& a) {
    const auto n = static_cast<std::size_t>(a.rows());
    const auto m = static_cast<std::size_t>(a.cols());
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based with a virtual column 0 holding the row being inserted.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                                   u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> row_to_col(n, kUnassigned);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

Matrix negated_counts(const ContingencyTable& t) {
    Matrix cost(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                -static_cast<double>(t(i, j));
    return cost;
}

std::int64_t matched_count(const ContingencyTable& t, const ClassMap& map) {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < map.size(); ++i) s += t(i, map[i]);
    return s;
}

}  // namespace

LinearAssignment hungarian(const MatrixRef& cost) {
    if (cost.rows() == 0 || cost.cols() == 0) throw UsageError("assignment cost matrix is empty");
    if (cost.hasNaN()) throw NumericError("NaN in assignment cost matrix");
    if (!cost.allFinite()) throw NumericError("non-finite assignment cost");

    LinearAssignment out;
    if (cost.rows() <= cost.cols()) {
        out.row_to_col = solve_wide(cost);
    } else {
        const Matrix t = cost.transpose();
        const auto col_to_row = solve_wide(t);
        out.row_to_col.assign(static_cast<std::size_t>(cost.rows()), kUnassigned);
        for (std::size_t j = 0; j < col_to_row.size(); ++j) out.row_to_col[col_to_row[j]] = j;
    }
    for (std::size_t i = 0; i < out.row_to_col.size(); ++i)
        if (out.row_to_col[i] != kUnassigned)
            out.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.row_to_col[i]));
    return out;
}

ClassMapResult optimal_class_map(const ContingencyTable& table) {
    if (table.rows() != table.cols())
        throw UsageError("optimal_class_map needs a square table, got " + std::to_string(table.rows()) +
                         "x" + std::to_string(table.cols()));
    ClassMapResult r;
    r.map.assignment = hungarian(negated_counts(table)).row_to_col;
    r.matched = matched_count(table, r.map);
    return r;
}

ClassMapResult overcluster_map(const ContingencyTable& table) {
    if (table.rows() < table.cols())
        throw UsageError("overcluster_map needs at least as many clusters as classes");
    ClassMapResult r;
    r.map.assignment = hungarian(negated_counts(table)).row_to_col;
    for (std::size_t i = 0; i < table.rows(); ++i) {
        if (r.map.assignment[i] != kUnassigned) continue;
        std::size_t best = 0;
        for (std::size_t j = 1; j < table.cols(); ++j)
            if (table(i, j) > table(i, best)) best = j;
        r.map.assignment[i] = best;
    }
    r.matched = matched_count(table, r.map);
    return r;
}

ClassMapResult undercluster_map(const ContingencyTable& table) {
    if (table.rows() >= table.cols())
        throw UsageError("undercluster_map needs fewer clusters than classes");
    ClassMapResult r;
    r.map.assignment = hungarian(negated_counts(table)).row_to_col;
    r.matched = matched_count(table, r.map);
    return r;
}

ClassMapResult best_class_map(const ContingencyTable& table) {
    if (table.rows() == table.cols()) return optimal_class_map(table);
    if (table.rows() > table.cols()) return overcluster_map(table);
    return undercluster_map(table);
}

double accuracy(const ContingencyTable& table, const ClassMap& map) {
    if (map.size() != table.rows())
        throw InputError("class map covers " + std::to_string(map.size()) + " clusters, table has " +
                         std::to_string(table.rows()));
    if (table.total() == 0) throw InputError("accuracy of an empty table");
    std::int64_t hit = 0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (map[i] >= table.cols())
            throw InputError("class map sends cluster " + std::to_string(i) + " to class " +
                             std::to_string(map[i]) + ", out of range");
        hit += table(i, map[i]);
    }
    return static_cast<double>(hit) / static_cast<double>(table.total());
}

void write_class_map(const ClassMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "cluster,class\n";
    for (std::size_t i = 0; i < map.size(); ++i) out << i << ',' << map[i] << '\n';
}

}  // namespace kmeval
