#include "kmeval/core.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "kmeval/errors.hpp"

namespace kmeval {

const char* dtype_name(DType dtype) {
    return dtype == DType::float32 ? "float32" : "float64";
}

Partition::Partition(std::vector<std::size_t> labels, std::size_t n_groups)
    : labels_(std::move(labels)) {
    if (labels_.empty()) throw InputError("partition must contain at least one instance");
    const std::size_t needed = *std::max_element(labels_.begin(), labels_.end()) + 1;
    if (n_groups == 0) n_groups = needed;
    if (n_groups < needed)
        throw InputError("partition label " + std::to_string(needed - 1) + " out of range for " +
                         std::to_string(n_groups) + " groups");
    n_groups_ = n_groups;
}

ContingencyTable::ContingencyTable(std::size_t rows, std::size_t cols,
                                   std::vector<std::int64_t> counts)
    : rows_(rows), cols_(cols), counts_(std::move(counts)), row_marginals_(rows, 0),
      col_marginals_(cols, 0) {
    if (counts_.size() != rows * cols) throw InputError("contingency counts do not match shape");
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            const auto c = counts_[i * cols_ + j];
            if (c < 0) throw InputError("negative contingency count");
            row_marginals_[i] += c;
            col_marginals_[j] += c;
            total_ += c;
        }
    }
}

ContingencyTable ContingencyTable::transposed() const {
    std::vector<std::int64_t> t(counts_.size());
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t[j * rows_ + i] = counts_[i * cols_ + j];
    return ContingencyTable(cols_, rows_, std::move(t));
}

ContingencyTable build_contingency(const Partition& pred, const Partition& truth) {
    if (pred.size() != truth.size())
        throw InputError("partition length mismatch: " + std::to_string(pred.size()) + " vs " +
                         std::to_string(truth.size()));
    const std::size_t cols = truth.n_groups();
    std::vector<std::int64_t> counts(pred.n_groups() * cols, 0);
    for (std::size_t n = 0; n < pred.size(); ++n) ++counts[pred[n] * cols + truth[n]];
    return ContingencyTable(pred.n_groups(), cols, std::move(counts));
}

std::pair<Partition, Partition> restrict_to_classes(const Partition& pred, const Partition& truth,
                                                    const std::set<std::size_t>& keep) {
    if (pred.size() != truth.size()) throw InputError("partition length mismatch");
    if (keep.empty()) throw InputError("class keep-set is empty");
    std::vector<std::size_t> dense(truth.n_groups(), truth.n_groups());
    std::size_t next = 0;
    for (std::size_t c : keep) {
        if (c >= truth.n_groups())
            throw InputError("keep class " + std::to_string(c) + " not present in truth partition");
        dense[c] = next++;
    }
    std::vector<std::size_t> p, t;
    for (std::size_t n = 0; n < truth.size(); ++n) {
        if (dense[truth[n]] == truth.n_groups()) continue;
        p.push_back(pred[n]);
        t.push_back(dense[truth[n]]);
    }
    if (t.empty()) throw InputError("no instances left after restricting to the keep-set");
    return {Partition(std::move(p), pred.n_groups()), Partition(std::move(t), keep.size())};
}

FeatureSource::FeatureSource(std::size_t n_samples, std::size_t n_features, DType dtype,
                             std::size_t chunk_rows)
    : n_samples_(n_samples), n_features_(n_features), dtype_(dtype), chunk_rows_(chunk_rows) {
    if (chunk_rows_ == 0) throw UsageError("chunk_rows must be positive");
}

bool FeatureSource::next(Matrix& chunk) {
    if (cursor_ >= n_samples_) {
        chunk.resize(0, static_cast<Eigen::Index>(n_features_));
        return false;
    }
    const std::size_t count = std::min(chunk_rows_, n_samples_ - cursor_);
    read_rows(cursor_, count, chunk);
    if (!chunk.allFinite()) {
        for (Eigen::Index r = 0; r < chunk.rows(); ++r)
            if (!chunk.row(r).allFinite())
                throw NumericError("non-finite feature value in row " +
                                   std::to_string(cursor_ + static_cast<std::size_t>(r)));
    }
    cursor_ += count;
    return true;
}

void FeatureSource::rewind() { cursor_ = 0; }

MatrixSource::MatrixSource(Matrix data, std::size_t chunk_rows)
    : FeatureSource(static_cast<std::size_t>(data.rows()), static_cast<std::size_t>(data.cols()),
                    DType::float64, chunk_rows),
      data_(std::move(data)) {}

void MatrixSource::read_rows(std::size_t first, std::size_t count, Matrix& out) {
    out = data_.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    threads = std::clamp<std::size_t>(threads, 1, n);
    if (threads == 1) {
        body(0, n);
        return;
    }
    const std::size_t step = (n + threads - 1) / threads;
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0, begin = 0; begin < n; ++t, begin += step) {
            pool.emplace_back([&body, &err = errors[t], begin, end = std::min(n, begin + step)] {
                try {
                    body(begin, end);
                } catch (...) {
                    err = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace kmeval
