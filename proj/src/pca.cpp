#include "kmeval/pca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "kmeval/errors.hpp"

namespace kmeval {

namespace {

void check_columns(const PcaModel& model, Eigen::Index cols) {
    if (static_cast<std::size_t>(cols) != model.n_features)
        throw InputError("PCA dimension mismatch: model has " + std::to_string(model.n_features) +
                         " features, batch has " + std::to_string(cols));
}

// Largest-|x| entry of every row made non-negative; first index wins ties.
void fix_signs(Matrix& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        Eigen::Index arg = 0;
        rows.row(r).cwiseAbs().maxCoeff(&arg);
        if (rows(r, arg) < 0) rows.row(r) *= -1.0;
    }
}

}  // namespace

PcaModel::PcaModel(std::size_t n_features_, std::size_t n_components_)
    : n_features(n_features_), n_components(n_components_) {
    if (n_features == 0) throw UsageError("PCA needs at least one feature");
    if (n_components == 0 || n_components > n_features)
        throw UsageError("PCA dimension " + std::to_string(n_components) + " must be in [1, " +
                         std::to_string(n_features) + "]");
    mean = Vector::Zero(static_cast<Eigen::Index>(n_features));
}

std::size_t pca_batch_size(std::size_t n_features) {
    return std::max<std::size_t>(4096, 2 * n_features);
}

void pca_partial_fit(PcaModel& model, const MatrixRef& batch) {
    check_columns(model, batch.cols());
    const auto rows = static_cast<std::size_t>(batch.rows());
    if (rows == 0) return;
    const auto d = static_cast<Eigen::Index>(model.n_components);
    const auto nf = static_cast<Eigen::Index>(model.n_features);
    if (!model.fitted() && rows < model.n_components)
        throw InputError("first PCA batch has " + std::to_string(rows) + " rows, fewer than " +
                         std::to_string(model.n_components) + " components");

    const std::size_t seen = model.n_samples_seen;
    const std::size_t total = seen + rows;
    const RowVector batch_mean = batch.colwise().mean();

    Matrix stack;
    if (seen == 0) {
        stack = batch.rowwise() - batch_mean;
        model.mean = batch_mean.transpose();
    } else {
        stack.resize(d + batch.rows() + 1, nf);
        stack.topRows(d) = model.singular_values.asDiagonal() * model.components;
        stack.middleRows(d, batch.rows()) = batch.rowwise() - batch_mean;
        const double scale = std::sqrt(static_cast<double>(seen) * static_cast<double>(rows) /
                                       static_cast<double>(total));
        stack.bottomRows(1) = scale * (model.mean.transpose() - batch_mean);
        const RowVector batch_sum = batch.colwise().sum();
        model.mean = ((static_cast<double>(seen) * model.mean.transpose() + batch_sum) /
                      static_cast<double>(total))
                         .transpose();
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(stack, Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericError("SVD failed during PCA update");
    Matrix components = svd.matrixV().leftCols(d).transpose();
    fix_signs(components);
    model.components = std::move(components);
    model.singular_values = svd.singularValues().head(d);
    model.n_samples_seen = total;

    if (!model.components.allFinite() || !model.mean.allFinite())
        throw NumericError("non-finite PCA state after update");
}

PcaModel pca_fit_stream(FeatureSource& source, std::size_t n_components) {
    PcaModel model(source.n_features(), n_components);
    if (source.n_samples() < n_components)
        throw InputError("PCA needs at least " + std::to_string(n_components) + " samples, got " +
                         std::to_string(source.n_samples()));
    const auto batch_rows = static_cast<Eigen::Index>(pca_batch_size(source.n_features()));
    Matrix batch(batch_rows, static_cast<Eigen::Index>(source.n_features()));
    Eigen::Index filled = 0;
    Matrix chunk;
    source.rewind();
    while (source.next(chunk)) {
        Eigen::Index offset = 0;
        while (offset < chunk.rows()) {
            const Eigen::Index take = std::min(chunk.rows() - offset, batch_rows - filled);
            batch.middleRows(filled, take) = chunk.middleRows(offset, take);
            filled += take;
            offset += take;
            if (filled == batch_rows) {
                pca_partial_fit(model, batch);
                filled = 0;
            }
        }
    }
    if (filled > 0) pca_partial_fit(model, batch.topRows(filled));
    source.rewind();
    return model;
}

Matrix pca_transform(const PcaModel& model, const MatrixRef& batch) {
    check_columns(model, batch.cols());
    if (!model.fitted()) throw UsageError("PCA model has not been fitted");
    // Row-at-a-time products keep every output row independent of how the
    // input was chunked.
    Matrix out(batch.rows(), static_cast<Eigen::Index>(model.n_components));
    Vector centered(batch.cols());
    Vector projected(out.cols());
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        centered = batch.row(r).transpose() - model.mean;
        projected.noalias() = model.components * centered;
        out.row(r) = projected.transpose();
    }
    return out;
}

Matrix pca_transform_stream(const PcaModel& model, FeatureSource& source) {
    Matrix out(static_cast<Eigen::Index>(source.n_samples()),
               static_cast<Eigen::Index>(model.n_components));
    Matrix chunk;
    Eigen::Index row = 0;
    source.rewind();
    while (source.next(chunk)) {
        out.middleRows(row, chunk.rows()) = pca_transform(model, chunk);
        row += chunk.rows();
    }
    source.rewind();
    return out;
}

}  // namespace kmeval
