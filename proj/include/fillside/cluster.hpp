#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fillside::cluster {

inline constexpr int kNoise = -1;

struct PointMatrix {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> x; // row-major

    std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
    double dist2(std::size_t i, std::size_t j) const {
        const double* a = x.data() + i * dim;
        const double* b = x.data() + j * dim;
        double s = 0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = a[k] - b[k];
            s += d * d;
        }
        return s;
    }

    template <std::size_t D>
    static PointMatrix from_rows(const std::vector<std::array<double, D>>& rows) {
        PointMatrix m;
        m.n = rows.size();
        m.dim = D;
        m.x.reserve(m.n * D);
        for (const auto& r : rows) m.x.insert(m.x.end(), r.begin(), r.end());
        return m;
    }
};

// --------------------------------------------------------------------------
// DBSCAN
// --------------------------------------------------------------------------

struct DbscanConfig {
    double epsilon = 0;   // radius in scaled-feature space, inclusive (d <= eps)
    std::size_t min_pts = 2; // neighborhood count, counting the point itself

    void validate() const;
};

struct ClusterOutcome {
    std::vector<int> labels; // cluster id or kNoise
    std::size_t n_clusters = 0;
    double noise_fraction = 0;
    DbscanConfig config;
    std::string source = "dbscan";
};

// AUTO picks grid acceleration only where cell occupancy says it pays; GRID
// and BRUTE force one path (they agree exactly and are cross-tested).
enum class NeighborMode : std::uint8_t { AUTO, GRID, BRUTE };

// Classical density-reachability semantics. Clusters are the connected
// components of the core-point adjacency graph, numbered by their smallest
// core-point input index; border points join the lowest-numbered adjacent
// cluster.
ClusterOutcome dbscan(const PointMatrix& points, const DbscanConfig& config,
                      NeighborMode mode = NeighborMode::AUTO);

std::vector<ClusterOutcome> dbscan_grid(const PointMatrix& points,
                                        const std::vector<double>& eps_list,
                                        const std::vector<std::size_t>& min_pts_list,
                                        NeighborMode mode = NeighborMode::AUTO);

// The published sensitivity grid and the fifteen-pair preset (central five
// epsilon values x three minPts).
std::vector<double> default_epsilon_grid();
std::vector<std::size_t> default_min_pts_grid();
std::vector<double> fifteen_pair_epsilon_grid();

// k-distance elbow helper for suggesting an epsilon on new data.
double suggest_epsilon(const PointMatrix& points, std::size_t k);

// --------------------------------------------------------------------------
// Pre-registered protocol evaluation
// --------------------------------------------------------------------------

enum class Stage : std::uint8_t { DBSCAN_ACCEPTED, HDBSCAN_REJECTED, KMEANS_FALLBACK };
const char* to_string(Stage s);

struct OutcomeEvaluation {
    std::size_t index = 0;
    std::vector<std::string> rejection_reasons; // "cluster_cap", "noise"
    bool unimodal = false;
    bool accepted = false; // 2..cap clusters, noise within threshold
};

struct ProtocolVerdict {
    Stage stage_reached = Stage::KMEANS_FALLBACK;
    std::vector<OutcomeEvaluation> evaluations;
    std::vector<int> final_labeling; // empty when falling back
    bool all_agree_on_n_clusters = false;
};

// Evaluates a stage's outcome set. For imported labelings pass
// source="hdbscan": full rejection then reports HDBSCAN_REJECTED, and an
// accepted labeling reports DBSCAN_ACCEPTED (density-stage acceptance).
ProtocolVerdict evaluate_protocol(const std::vector<ClusterOutcome>& outcomes,
                                  std::size_t cluster_cap = 20, double noise_threshold = 0.5,
                                  const std::string& source = "dbscan");

// --------------------------------------------------------------------------
// k-means fallback
// --------------------------------------------------------------------------

struct KmeansResult {
    std::size_t k = 0;
    std::vector<double> centroids; // k x dim row-major
    std::vector<int> labels;
    double inertia = 0;
    double silhouette = 0; // filled by select_k
    std::uint64_t seed = 0;
    std::uint64_t empty_cluster_repairs = 0;
};

// Lloyd iterations from k-means++ seeding until assignment fixpoint or
// max_iter; best of restarts by inertia. Deterministic given seed and
// invariant to thread count (fixed-block reductions).
KmeansResult kmeans(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 100, std::size_t restarts = 10);

// Mean silhouette over all points; exact up to `exact_bound` points, above
// that computed on a fixed-seed uniform subsample of that size.
inline constexpr std::size_t kSilhouetteExactBound = 5000;
double silhouette(const PointMatrix& points, const std::vector<int>& labels,
                  std::uint64_t subsample_seed = 1,
                  std::size_t exact_bound = kSilhouetteExactBound);

struct SelectKResult {
    std::size_t best_k = 0;
    std::map<std::size_t, double> silhouettes;
    KmeansResult best; // re-run at best_k
};

SelectKResult select_k(const PointMatrix& points, const std::vector<std::size_t>& k_range,
                       std::uint64_t seed);

} // namespace fillside::cluster
