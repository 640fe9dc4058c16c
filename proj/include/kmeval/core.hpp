#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace kmeval {

// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using MatrixRef = Eigen::Ref<const Matrix>;

enum class DType { float32, float64 };

const char* dtype_name(DType dtype);

/// A labelling of N instances into n_groups dense groups.
class Partition {
public:
    Partition() = default;
    /// n_groups defaults to max(label) + 1; a larger value admits empty groups.
    explicit Partition(std::vector<std::size_t> labels, std::size_t n_groups = 0);

    std::size_t size() const { return labels_.size(); }
    std::size_t n_groups() const { return n_groups_; }
    std::size_t operator[](std::size_t i) const { return labels_[i]; }
    const std::vector<std::size_t>& labels() const { return labels_; }

    friend bool operator==(const Partition&, const Partition&) = default;

private:
    std::vector<std::size_t> labels_;
    std::size_t n_groups_ = 0;
};

/// Dense R x C co-occurrence counts. Rows are predicted clusters, columns
/// reference classes.
class ContingencyTable {
public:
    ContingencyTable() = default;
    ContingencyTable(std::size_t rows, std::size_t cols, std::vector<std::int64_t> counts);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::int64_t operator()(std::size_t i, std::size_t j) const { return counts_[i * cols_ + j]; }
    const std::vector<std::int64_t>& counts() const { return counts_; }
    const std::vector<std::int64_t>& row_marginals() const { return row_marginals_; }
    const std::vector<std::int64_t>& col_marginals() const { return col_marginals_; }
    std::int64_t total() const { return total_; }

    ContingencyTable transposed() const;

    friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::int64_t> counts_;
    std::vector<std::int64_t> row_marginals_;
    std::vector<std::int64_t> col_marginals_;
    std::int64_t total_ = 0;
};

/// Cluster index -> class index, one entry per cluster.
struct ClassMap {
    std::vector<std::size_t> assignment;

    std::size_t size() const { return assignment.size(); }
    std::size_t operator[](std::size_t cluster) const { return assignment[cluster]; }
    friend bool operator==(const ClassMap&, const ClassMap&) = default;
};

ContingencyTable build_contingency(const Partition& pred, const Partition& truth);

/// Keeps instances whose truth class is in `keep`. Truth classes are
/// re-indexed densely in ascending order; predicted labels are untouched.
std::pair<Partition, Partition> restrict_to_classes(const Partition& pred, const Partition& truth,
                                                    const std::set<std::size_t>& keep);

/// Streamable N x D feature matrix. Chunks are promoted to float64.
class FeatureSource {
public:
    virtual ~FeatureSource() = default;

    std::size_t n_samples() const { return n_samples_; }
    std::size_t n_features() const { return n_features_; }
    DType dtype() const { return dtype_; }
    std::size_t chunk_rows() const { return chunk_rows_; }

    /// Fills `chunk` with the next block of at most chunk_rows() rows.
    /// Returns false (leaving `chunk` empty) once the pass is exhausted.
    /// Throws NumericError on NaN/Inf.
    bool next(Matrix& chunk);
    /// Restarts the pass from the first row.
    void rewind();

protected:
    FeatureSource(std::size_t n_samples, std::size_t n_features, DType dtype, std::size_t chunk_rows);

    virtual void read_rows(std::size_t first, std::size_t count, Matrix& out) = 0;

private:
    std::size_t n_samples_;
    std::size_t n_features_;
    DType dtype_;
    std::size_t chunk_rows_;
    std::size_t cursor_ = 0;
};

inline constexpr std::size_t kDefaultChunkRows = 8192;

/// In-memory source; copies the matrix.
class MatrixSource final : public FeatureSource {
public:
    explicit MatrixSource(Matrix data, std::size_t chunk_rows = kDefaultChunkRows);
    const Matrix& data() const { return data_; }

protected:
    void read_rows(std::size_t first, std::size_t count, Matrix& out) override;

private:
    Matrix data_;
};

/// Splits [0, n) into at most `threads` contiguous ranges and runs them
/// concurrently. Each index is visited by exactly one invocation, so
/// per-index outputs do not depend on the thread count.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace kmeval
