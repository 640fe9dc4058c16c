#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "kmeval/core.hpp"

namespace kmeval {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

struct LinearAssignment {
    std::vector<std::size_t> row_to_col;  // kUnassigned for rows left out when R > C
    double cost = 0.0;
};

/// Minimum-cost one-to-one matching of min(R, C) row/column pairs.
/// Shortest augmenting paths with dual potentials, O(min(R,C)^2 max(R,C)).
/// Columns are scanned in index order and only strict improvements are
/// taken, so ties resolve toward lower indices.
LinearAssignment hungarian(const MatrixRef& cost);

struct ClassMapResult {
    ClassMap map;
    std::int64_t matched = 0;
};

/// R == C: the permutation maximizing matched counts.
ClassMapResult optimal_class_map(const ContingencyTable& table);

/// R >= C: one cluster per class by optimal matching, then every leftover
/// cluster goes to its majority class.
ClassMapResult overcluster_map(const ContingencyTable& table);

/// R < C: optimal injective map of clusters into classes.
ClassMapResult undercluster_map(const ContingencyTable& table);

/// Dispatches to one of the three maps above by table shape.
ClassMapResult best_class_map(const ContingencyTable& table);

/// Fraction of instances whose cluster maps to their class.
double accuracy(const ContingencyTable& table, const ClassMap& map);

/// Two-column CSV "cluster,class".
void write_class_map(const ClassMap& map, const std::filesystem::path& path);

}  // namespace kmeval
