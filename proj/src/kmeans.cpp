#include "kmeval/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "kmeval/errors.hpp"

namespace kmeval {

namespace {

double squared_distance(const double* a, const double* b, Eigen::Index d) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

const double* row_ptr(const MatrixRef& m, std::size_t r) {
    return m.data() + static_cast<Eigen::Index>(r) * m.outerStride();
}

void check_dim(Eigen::Index expected, Eigen::Index got) {
    if (expected != got)
        throw InputError("k-means dimension mismatch: expected " + std::to_string(expected) +
                         " columns, got " + std::to_string(got));
}

// Moves centers toward their assigned points, in point order.
void apply_updates(KMeansModel& model, const MatrixRef& batch, const Assignment& assignment) {
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        const std::size_t c = assignment.labels[static_cast<std::size_t>(r)];
        const auto ci = static_cast<Eigen::Index>(c);
        const std::int64_t count = ++model.per_center_counts[c];
        if (count == 1) {
            model.centers.row(ci) = batch.row(r);
        } else {
            const double eta = 1.0 / static_cast<double>(count);
            model.centers.row(ci) = (1.0 - eta) * model.centers.row(ci) + eta * batch.row(r);
        }
    }
}

struct Offender {
    double distance;
    std::size_t index;
};

// Min-heap ordering: the weakest offender (smallest distance, then the
// larger index) sits on top and is evicted first.
struct WeakerOffender {
    bool operator()(const Offender& a, const Offender& b) const {
        if (a.distance != b.distance) return a.distance > b.distance;
        return a.index < b.index;
    }
};

}  // namespace

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t n) {
    if (n == 0) throw UsageError("Rng::below(0)");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

Rng Rng::split() { return Rng(engine_()); }

Matrix kmeanspp_init(const MatrixRef& sample, std::size_t k, Rng& rng) {
    const auto m = static_cast<std::size_t>(sample.rows());
    if (k == 0) throw UsageError("k must be at least 1");
    if (m < k)
        throw InputError("k-means++ needs at least k=" + std::to_string(k) + " points, got " +
                         std::to_string(m));
    const Eigen::Index d = sample.cols();
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));

    Matrix centers(static_cast<Eigen::Index>(k), d);
    std::vector<bool> chosen(m, false);
    std::vector<double> closest(m);
    std::vector<double> cumulative(m);
    std::vector<double> candidate_closest(m), best_closest(m);

    auto take = [&](std::size_t c, std::size_t idx) {
        centers.row(static_cast<Eigen::Index>(c)) = sample.row(static_cast<Eigen::Index>(idx));
        chosen[idx] = true;
    };

    const std::size_t first = rng.below(m);
    take(0, first);
    for (std::size_t i = 0; i < m; ++i)
        closest[i] = squared_distance(row_ptr(sample, i), row_ptr(sample, first), d);

    for (std::size_t c = 1; c < k; ++c) {
        double running = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            running += chosen[i] ? 0.0 : closest[i];
            cumulative[i] = running;
        }
        if (running <= 0.0) {
            // Remaining points coincide with chosen centers; fall back to a
            // uniform pick among unchosen rows so the k rows stay distinct.
            std::size_t pick = rng.below(m - c);
            std::size_t idx = 0;
            for (;; ++idx) {
                if (chosen[idx]) continue;
                if (pick-- == 0) break;
            }
            take(c, idx);
            for (std::size_t i = 0; i < m; ++i) closest[i] = 0.0;
            continue;
        }
        std::size_t best = m;
        double best_potential = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < trials; ++t) {
            const double r = rng.uniform() * running;
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
            auto idx = static_cast<std::size_t>(it - cumulative.begin());
            if (idx >= m) idx = m - 1;
            while (chosen[idx] || closest[idx] <= 0.0) idx = (idx + 1) % m;
            const double* cand = row_ptr(sample, idx);
            double potential = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double dist = squared_distance(row_ptr(sample, i), cand, d);
                candidate_closest[i] = std::min(closest[i], dist);
                potential += candidate_closest[i];
            }
            if (potential < best_potential) {
                best_potential = potential;
                best = idx;
                best_closest.swap(candidate_closest);
            }
        }
        take(c, best);
        closest.swap(best_closest);
    }
    return centers;
}

Assignment assign_points(const MatrixRef& centers, const MatrixRef& batch, std::size_t threads) {
    check_dim(centers.cols(), batch.cols());
    if (centers.rows() == 0) throw UsageError("no centers to assign to");
    const Eigen::Index d = batch.cols();
    const Eigen::Index k = centers.rows();
    const auto n = static_cast<std::size_t>(batch.rows());
    Assignment out{std::vector<std::size_t>(n), std::vector<double>(n)};

    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            const double* x = row_ptr(batch, p);
            double best = std::numeric_limits<double>::infinity();
            Eigen::Index arg = 0;
            for (Eigen::Index c = 0; c < k; ++c) {
                const double* y = row_ptr(centers, static_cast<std::size_t>(c));
                double s = 0.0;
                Eigen::Index j = 0;
                // Partial sums only grow, so a center already past the best
                // can be abandoned without changing the result.
                for (; j + 8 <= d; j += 8) {
                    for (Eigen::Index t = j; t < j + 8; ++t) {
                        const double diff = x[t] - y[t];
                        s += diff * diff;
                    }
                    if (s > best) break;
                }
                if (s > best) continue;
                for (; j < d; ++j) {
                    const double diff = x[j] - y[j];
                    s += diff * diff;
                }
                if (s < best) {
                    best = s;
                    arg = c;
                }
            }
            out.labels[p] = static_cast<std::size_t>(arg);
            out.sq_distances[p] = best;
        }
    });
    return out;
}

void minibatch_step(KMeansModel& model, const MatrixRef& batch, std::size_t threads) {
    check_dim(static_cast<Eigen::Index>(model.d), batch.cols());
    if (batch.rows() == 0) throw UsageError("mini-batch is empty");
    const Assignment assignment = assign_points(model.centers, batch, threads);
    apply_updates(model, batch, assignment);
}

KMeansModel kmeans_fit(const MatrixRef& data, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(data.rows());
    if (options.k == 0) throw UsageError("k must be at least 1");
    if (options.batch_size == 0) throw UsageError("k-means batch size must be positive");
    if (n < options.k)
        throw InputError("k-means needs at least k=" + std::to_string(options.k) + " points, got " +
                         std::to_string(n));

    Rng rng(options.seed);
    Rng init_rng = rng.split();
    Rng shuffle_rng = rng.split();

    // Initialization sample: min(N, 10k) rows without replacement.
    const std::size_t m = std::min(n, 10 * options.k);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) std::swap(order[i], order[i + init_rng.below(n - i)]);
    Matrix sample(static_cast<Eigen::Index>(m), data.cols());
    for (std::size_t i = 0; i < m; ++i)
        sample.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(order[i]));

    KMeansModel model;
    model.k = options.k;
    model.d = static_cast<std::size_t>(data.cols());
    model.centers = kmeanspp_init(sample, options.k, init_rng);
    model.per_center_counts.assign(options.k, 0);
    model.rng_seed = options.seed;
    model.batch_size = options.batch_size;

    std::iota(order.begin(), order.end(), std::size_t{0});
    Matrix batch;
    std::vector<std::size_t> hits(options.k);
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        shuffle_rng.shuffle(order.begin(), order.end());
        std::fill(hits.begin(), hits.end(), 0);
        std::priority_queue<Offender, std::vector<Offender>, WeakerOffender> worst;

        for (std::size_t start = 0; start < n; start += options.batch_size) {
            const std::size_t rows = std::min(options.batch_size, n - start);
            batch.resize(static_cast<Eigen::Index>(rows), data.cols());
            for (std::size_t r = 0; r < rows; ++r)
                batch.row(static_cast<Eigen::Index>(r)) =
                    data.row(static_cast<Eigen::Index>(order[start + r]));
            const Assignment a = assign_points(model.centers, batch, options.threads);
            for (std::size_t r = 0; r < rows; ++r) {
                ++hits[a.labels[r]];
                const Offender o{a.sq_distances[r], order[start + r]};
                if (worst.size() < options.k) {
                    worst.push(o);
                } else if (WeakerOffender{}(worst.top(), o)) {
                    worst.pop();
                    worst.push(o);
                }
            }
            apply_updates(model, batch, a);
        }

        // Re-seed centers that received nothing this epoch at the points
        // that were worst served, farthest first.
        std::vector<Offender> ranked;
        ranked.reserve(worst.size());
        while (!worst.empty()) {
            ranked.push_back(worst.top());
            worst.pop();
        }
        std::reverse(ranked.begin(), ranked.end());
        std::size_t next = 0;
        for (std::size_t c = 0; c < options.k && next < ranked.size(); ++c) {
            if (hits[c] != 0) continue;
            model.centers.row(static_cast<Eigen::Index>(c)) =
                data.row(static_cast<Eigen::Index>(ranked[next++].index));
        }
        ++model.epochs_trained;
    }
    if (!model.centers.allFinite()) throw NumericError("non-finite k-means centers");
    return model;
}

Partition kmeans_predict(const KMeansModel& model, const MatrixRef& batch, std::size_t threads) {
    check_dim(static_cast<Eigen::Index>(model.d), batch.cols());
    Assignment a = assign_points(model.centers, batch, threads);
    return Partition(std::move(a.labels), model.k);
}

double inertia(const KMeansModel& model, const MatrixRef& data, std::size_t threads) {
    check_dim(static_cast<Eigen::Index>(model.d), data.cols());
    const Assignment a = assign_points(model.centers, data, threads);
    double total = 0.0;
    for (double v : a.sq_distances) total += v;
    return total;
}

}  // namespace kmeval
