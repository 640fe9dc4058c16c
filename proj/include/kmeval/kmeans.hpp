#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "kmeval/core.hpp"

namespace kmeval {

struct KMeansModel {
    std::size_t k = 0;
    std::size_t d = 0;
    Matrix centers;                            // k x d
    std::vector<std::int64_t> per_center_counts;  // points absorbed per center
    std::uint64_t rng_seed = 0;
    std::size_t epochs_trained = 0;
    std::size_t batch_size = 0;
};

struct KMeansOptions {
    std::size_t k = 1000;
    std::size_t epochs = 60;
    std::size_t batch_size = 1024;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct Assignment {
    std::vector<std::size_t> labels;
    std::vector<double> sq_distances;
};

/// Seeded generator used for every random decision during fitting.
/// Sampling helpers avoid std:: distributions so draws are identical on
/// every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [0, n).
    std::size_t below(std::size_t n);
    /// Independent child stream.
    Rng split();
    template <typename It>
    void shuffle(It first, It last) {
        for (auto n = static_cast<std::size_t>(last - first); n > 1; --n)
            std::swap(first[n - 1], first[below(n)]);
    }

private:
    std::mt19937_64 engine_;
};

/// k-means++ seeding: the first center uniformly, every later one by
/// D^2-weighted sampling. Each step draws 2 + floor(ln k) weighted
/// candidates and keeps the one that most reduces the potential.
Matrix kmeanspp_init(const MatrixRef& sample, std::size_t k, Rng& rng);

/// Nearest center by squared Euclidean distance, ties to the lowest index.
Assignment assign_points(const MatrixRef& centers, const MatrixRef& batch, std::size_t threads = 1);

/// Assigns the batch against the current centers, then moves each
/// point's center toward it with rate 1/count, in point order.
void minibatch_step(KMeansModel& model, const MatrixRef& batch, std::size_t threads = 1);

KMeansModel kmeans_fit(const MatrixRef& data, const KMeansOptions& options);

Partition kmeans_predict(const KMeansModel& model, const MatrixRef& batch, std::size_t threads = 1);

double inertia(const KMeansModel& model, const MatrixRef& data, std::size_t threads = 1);

}  // namespace kmeval
