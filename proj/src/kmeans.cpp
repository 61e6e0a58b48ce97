#include "fillside/cluster.hpp"
#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fillside::cluster {

namespace {

double dist2_to_centroid(const PointMatrix& pts, std::size_t i, const double* c) {
    const double* a = pts.x.data() + i * pts.dim;
    double s = 0;
    for (std::size_t k = 0; k < pts.dim; ++k) {
        const double d = a[k] - c[k];
        s += d * d;
    }
    return s;
}

// Standard D^2 seeding.
std::vector<double> kmeanspp_init(const PointMatrix& pts, std::size_t k, stats::Rng& rng) {
    std::vector<double> centroids;
    centroids.reserve(k * pts.dim);
    const std::size_t first = rng.uniform_int(pts.n);
    const auto row0 = pts.row(first);
    centroids.insert(centroids.end(), row0.begin(), row0.end());

    std::vector<double> d2(pts.n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        const double* last = centroids.data() + (c - 1) * pts.dim;
        double total = 0;
        for (std::size_t i = 0; i < pts.n; ++i) {
            d2[i] = std::min(d2[i], dist2_to_centroid(pts, i, last));
            total += d2[i];
        }
        std::size_t chosen = 0;
        if (total > 0) {
            const double target = rng.uniform01() * total;
            double acc = 0;
            for (std::size_t i = 0; i < pts.n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = rng.uniform_int(pts.n);
        }
        const auto row = pts.row(chosen);
        centroids.insert(centroids.end(), row.begin(), row.end());
    }
    return centroids;
}

struct LloydRun {
    std::vector<double> centroids;
    std::vector<int> labels;
    double inertia = 0;
    std::uint64_t repairs = 0;
};

LloydRun lloyd(const PointMatrix& pts, std::size_t k, std::vector<double> centroids,
               std::size_t max_iter) {
    const std::size_t dim = pts.dim;
    std::vector<int> labels(pts.n, -1);
    LloydRun run;

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(pts.n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = dist2_to_centroid(pts, i, centroids.data() + c * dim);
                if (d < best_d) { // strict: ties keep the lowest centroid index
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            if (labels[i] != best) {
                labels[i] = best;
                changed = true;
            }
        }

        // Fixed-block partial sums combined in block order keep the update
        // bit-identical across thread counts.
        const std::size_t n_blocks = (pts.n + stats::kSumBlock - 1) / stats::kSumBlock;
        std::vector<double> block_sums(n_blocks * k * dim, 0.0);
        std::vector<std::uint64_t> block_counts(n_blocks * k, 0);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t bb = 0; bb < static_cast<std::ptrdiff_t>(n_blocks); ++bb) {
            const auto b = static_cast<std::size_t>(bb);
            const std::size_t lo = b * stats::kSumBlock;
            const std::size_t hi = std::min(lo + stats::kSumBlock, pts.n);
            double* sums = block_sums.data() + b * k * dim;
            std::uint64_t* counts = block_counts.data() + b * k;
            for (std::size_t i = lo; i < hi; ++i) {
                const auto c = static_cast<std::size_t>(labels[i]);
                const double* row = pts.x.data() + i * dim;
                for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += row[d];
                ++counts[c];
            }
        }
        std::vector<double> sums(k * dim, 0.0);
        std::vector<std::uint64_t> counts(k, 0);
        for (std::size_t b = 0; b < n_blocks; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                counts[c] += block_counts[b * k + c];
                for (std::size_t d = 0; d < dim; ++d)
                    sums[c * dim + d] += block_sums[(b * k + c) * dim + d];
            }
        }

        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                for (std::size_t d = 0; d < dim; ++d)
                    centroids[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
                continue;
            }
            // Empty cluster: re-seed at the point farthest from its centroid
            // (lowest index on ties).
            ++run.repairs;
            std::size_t far = 0;
            double far_d = -1;
            for (std::size_t i = 0; i < pts.n; ++i) {
                const double d = dist2_to_centroid(
                    pts, i, centroids.data() + static_cast<std::size_t>(labels[i]) * dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            const auto row = pts.row(far);
            std::copy(row.begin(), row.end(), centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
            changed = true;
        }

        if (!changed) break;
    }

    run.inertia = stats::block_sum(pts.n, [&](std::size_t i) {
        return dist2_to_centroid(pts, i, centroids.data() + static_cast<std::size_t>(labels[i]) * dim);
    });
    run.centroids = std::move(centroids);
    run.labels = std::move(labels);
    return run;
}

} // namespace

KmeansResult kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter, std::size_t restarts) {
    if (k < 2) throw std::invalid_argument("kmeans: k must be >= 2");
    if (points.n < k) throw std::invalid_argument("kmeans: n must be >= k");
    if (restarts < 1) restarts = 1;

    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        stats::Rng rng = stats::Rng::derive(seed, r);
        LloydRun run = lloyd(points, k, kmeanspp_init(points, k, rng), max_iter);
        if (run.inertia < best.inertia) {
            best.k = k;
            best.centroids = std::move(run.centroids);
            best.labels = std::move(run.labels);
            best.inertia = run.inertia;
            best.seed = seed;
            best.empty_cluster_repairs = run.repairs;
        }
    }
    return best;
}

} // namespace fillside::cluster
