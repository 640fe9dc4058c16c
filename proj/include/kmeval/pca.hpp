#pragma once

#include <cstddef>

#include "kmeval/core.hpp"

namespace kmeval {

/// Truncated principal subspace maintained over a stream of batches.
struct PcaModel {
    std::size_t n_features = 0;
    std::size_t n_components = 0;
    Vector mean;             // n_features
    Matrix components;       // n_components x n_features, orthonormal rows
    Vector singular_values;  // n_components, non-increasing
    std::size_t n_samples_seen = 0;

    PcaModel() = default;
    PcaModel(std::size_t n_features, std::size_t n_components);

    bool fitted() const { return n_samples_seen > 0; }
};

inline constexpr std::size_t kDefaultPcaDim = 256;

/// max(4096, 2 * n_features).
std::size_t pca_batch_size(std::size_t n_features);

/// One incremental update. The previous basis, scaled by its singular
/// values, is stacked on top of the batch (centered on the batch mean) and
/// a mean-correction row; the truncated SVD of that stack is the new
/// basis. Each component is sign-flipped so that its largest-magnitude
/// entry is non-negative.
void pca_partial_fit(PcaModel& model, const MatrixRef& batch);

/// Single pass over `source`, regrouping chunks into batches of
/// pca_batch_size(n_features) rows. A short final batch is fitted as is.
PcaModel pca_fit_stream(FeatureSource& source, std::size_t n_components);

/// (batch - mean) * components^T. No whitening.
Matrix pca_transform(const PcaModel& model, const MatrixRef& batch);

/// Streams `source` through pca_transform and returns the stacked result.
Matrix pca_transform_stream(const PcaModel& model, FeatureSource& source);

}  // namespace kmeval
