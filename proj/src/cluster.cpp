#include "fillside/cluster.hpp"

#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace fillside::cluster {

void DbscanConfig::validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be > 0");
    if (min_pts < 2) throw std::invalid_argument("min_pts must be >= 2");
}

namespace {

// Uniform grid with cell size epsilon; all neighbors within epsilon live in
// the 3^dim adjacent cells.
class NeighborGrid {
public:
    NeighborGrid(const PointMatrix& pts, double eps) : pts_(pts), eps_(eps), eps2_(eps * eps) {
        cells_.reserve(pts.n);
        for (std::size_t i = 0; i < pts.n; ++i) cells_[key(i)].push_back(i);
    }

    // When epsilon is comparable to the data extent the cloud sits in a few
    // dense cells and the cell walk only adds overhead over a direct scan.
    bool degenerate() const {
        return pts_.n < 4096 || cells_.size() < 8 || pts_.n / cells_.size() > 32;
    }

    // Neighbor ids in ascending index order (includes the query point).
    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        const auto base = cell_coords(i);
        std::vector<std::int64_t> coords(base);
        walk(0, base, coords, i, out);
        // Colliding cell keys merge buckets; visiting two colliding adjacent
        // cells would re-yield their points, so dedupe after sorting.
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    std::vector<std::int64_t> cell_coords(std::size_t i) const {
        const auto row = pts_.row(i);
        std::vector<std::int64_t> c(pts_.dim);
        for (std::size_t k = 0; k < pts_.dim; ++k)
            c[k] = static_cast<std::int64_t>(std::floor(row[k] / eps_));
        return c;
    }

    std::uint64_t hash_coords(const std::vector<std::int64_t>& c) const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto v : c) {
            // Finalizer-style mixing per coordinate; plain FNV over whole
            // words collides heavily on small integer lattices.
            std::uint64_t z = static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            z ^= z >> 31;
            h = (h ^ z) * 1099511628211ull;
        }
        return h;
    }

    std::uint64_t key(std::size_t i) const { return hash_coords(cell_coords(i)); }

    void walk(std::size_t k, const std::vector<std::int64_t>& base, std::vector<std::int64_t>& coords,
              std::size_t query, std::vector<std::size_t>& out) const {
        if (k == base.size()) {
            auto it = cells_.find(hash_coords(coords));
            if (it == cells_.end()) return;
            for (std::size_t j : it->second)
                if (pts_.dist2(query, j) <= eps2_) out.push_back(j);
            return;
        }
        for (std::int64_t d = -1; d <= 1; ++d) {
            coords[k] = base[k] + d;
            walk(k + 1, base, coords, query, out);
        }
        coords[k] = base[k];
    }

    const PointMatrix& pts_;
    double eps_;
    double eps2_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

std::vector<std::size_t> brute_neighbors(const PointMatrix& pts, std::size_t i, double eps2) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < pts.n; ++j)
        if (pts.dist2(i, j) <= eps2) out.push_back(j);
    return out;
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
    std::size_t find(std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b) parent[b] = a; // keep the smaller index as root
        else parent[a] = b;
    }
};

} // namespace

ClusterOutcome dbscan(const PointMatrix& points, const DbscanConfig& config, NeighborMode mode) {
    config.validate();
    if (points.n == 0) throw std::invalid_argument("dbscan on empty point set");
    const double eps2 = config.epsilon * config.epsilon;

    std::vector<std::vector<std::size_t>> nbrs(points.n);
    bool use_grid = mode != NeighborMode::BRUTE;
    if (use_grid) {
        NeighborGrid grid(points, config.epsilon);
        if (mode == NeighborMode::AUTO && grid.degenerate()) {
            use_grid = false; // direct scan is cheaper; results are identical
        } else {
#pragma omp parallel for schedule(dynamic, 64)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.n); ++i)
                nbrs[static_cast<std::size_t>(i)] = grid.neighbors(static_cast<std::size_t>(i));
        }
    }
    if (!use_grid) {
#pragma omp parallel for schedule(dynamic, 64)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.n); ++i)
            nbrs[static_cast<std::size_t>(i)] = brute_neighbors(points, static_cast<std::size_t>(i), eps2);
    }

    std::vector<char> core(points.n, 0);
    for (std::size_t i = 0; i < points.n; ++i) core[i] = nbrs[i].size() >= config.min_pts;

    // Clusters = connected components of the core-core adjacency graph.
    UnionFind uf(points.n);
    for (std::size_t i = 0; i < points.n; ++i) {
        if (!core[i]) continue;
        for (std::size_t j : nbrs[i])
            if (j > i && core[j]) uf.unite(i, j);
    }

    // Number clusters by smallest core-point input index.
    std::vector<int> labels(points.n, kNoise);
    std::unordered_map<std::size_t, int> root_to_id;
    int next_id = 0;
    for (std::size_t i = 0; i < points.n; ++i) {
        if (!core[i]) continue;
        const std::size_t root = uf.find(i);
        auto it = root_to_id.find(root);
        if (it == root_to_id.end()) it = root_to_id.emplace(root, next_id++).first;
        labels[i] = it->second;
    }

    // Border points join the lowest-numbered adjacent cluster.
    for (std::size_t i = 0; i < points.n; ++i) {
        if (core[i]) continue;
        int best = kNoise;
        for (std::size_t j : nbrs[i]) {
            if (!core[j]) continue;
            if (best == kNoise || labels[j] < best) best = labels[j];
        }
        labels[i] = best;
    }

    ClusterOutcome out;
    out.labels = std::move(labels);
    out.n_clusters = static_cast<std::size_t>(next_id);
    out.noise_fraction =
        static_cast<double>(std::count(out.labels.begin(), out.labels.end(), kNoise)) /
        static_cast<double>(points.n);
    out.config = config;
    return out;
}

std::vector<ClusterOutcome> dbscan_grid(const PointMatrix& points, const std::vector<double>& eps_list,
                                        const std::vector<std::size_t>& min_pts_list,
                                        NeighborMode mode) {
    if (eps_list.empty() || min_pts_list.empty())
        throw std::invalid_argument("dbscan_grid needs non-empty grids");
    std::vector<ClusterOutcome> out;
    out.reserve(eps_list.size() * min_pts_list.size());
    for (double eps : eps_list)
        for (std::size_t mp : min_pts_list) out.push_back(dbscan(points, {eps, mp}, mode));
    return out;
}

std::vector<double> default_epsilon_grid() {
    return {1.15, 1.49, 1.83, 2.17, 2.29254, 2.51, 2.85, 3.19, 3.44};
}
std::vector<std::size_t> default_min_pts_grid() { return {10, 20, 30}; }
std::vector<double> fifteen_pair_epsilon_grid() { return {1.83, 2.17, 2.29254, 2.51, 2.85}; }

double suggest_epsilon(const PointMatrix& points, std::size_t k) {
    if (points.n < k + 1) throw std::invalid_argument("suggest_epsilon: too few points");
    std::vector<double> kdist(points.n);
#pragma omp parallel for schedule(dynamic, 32)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(points.n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::vector<double> d;
        d.reserve(points.n - 1);
        for (std::size_t j = 0; j < points.n; ++j)
            if (j != i) d.push_back(points.dist2(i, j));
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
        kdist[i] = std::sqrt(d[k - 1]);
    }
    std::sort(kdist.begin(), kdist.end());
    // Max curvature on the sorted k-distance curve.
    std::size_t elbow = points.n / 2;
    double best = -1;
    for (std::size_t i = 1; i + 1 < kdist.size(); ++i) {
        const double curv = kdist[i + 1] - 2 * kdist[i] + kdist[i - 1];
        if (curv > best) {
            best = curv;
            elbow = i;
        }
    }
    return kdist[elbow];
}

const char* to_string(Stage s) {
    switch (s) {
        case Stage::DBSCAN_ACCEPTED: return "DBSCAN_ACCEPTED";
        case Stage::HDBSCAN_REJECTED: return "HDBSCAN_REJECTED";
        case Stage::KMEANS_FALLBACK: return "KMEANS_FALLBACK";
    }
    return "KMEANS_FALLBACK";
}

ProtocolVerdict evaluate_protocol(const std::vector<ClusterOutcome>& outcomes,
                                  std::size_t cluster_cap, double noise_threshold,
                                  const std::string& source) {
    if (outcomes.empty()) throw std::invalid_argument("evaluate_protocol on empty outcome list");
    ProtocolVerdict v;
    v.evaluations.reserve(outcomes.size());
    std::size_t first_accepted = outcomes.size();
    bool agree = true;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        OutcomeEvaluation e;
        e.index = i;
        if (o.n_clusters > cluster_cap) e.rejection_reasons.push_back("cluster_cap");
        if (o.noise_fraction > noise_threshold) e.rejection_reasons.push_back("noise");
        e.unimodal = o.n_clusters <= 1;
        e.accepted = e.rejection_reasons.empty() && !e.unimodal;
        if (e.accepted && first_accepted == outcomes.size()) first_accepted = i;
        if (o.n_clusters != outcomes.front().n_clusters) agree = false;
        v.evaluations.push_back(std::move(e));
    }
    v.all_agree_on_n_clusters = agree;
    if (first_accepted < outcomes.size()) {
        v.stage_reached = Stage::DBSCAN_ACCEPTED;
        v.final_labeling = outcomes[first_accepted].labels;
    } else {
        v.stage_reached = source == "hdbscan" ? Stage::HDBSCAN_REJECTED : Stage::KMEANS_FALLBACK;
    }
    return v;
}

// --------------------------------------------------------------------------
// Silhouette
// --------------------------------------------------------------------------

namespace {

double silhouette_exact(const PointMatrix& points, const std::vector<int>& labels) {
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    const std::size_t n_clusters = static_cast<std::size_t>(max_label + 1);
    if (n_clusters < 2) throw std::invalid_argument("silhouette undefined for < 2 clusters");

    std::vector<std::size_t> cluster_size(n_clusters, 0);
    for (int l : labels)
        if (l >= 0) ++cluster_size[static_cast<std::size_t>(l)];

    std::vector<double> svals(points.n, 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(points.n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        if (labels[i] < 0) continue; // noise excluded
        std::vector<double> sum_d(n_clusters, 0.0);
        for (std::size_t j = 0; j < points.n; ++j) {
            if (j == i || labels[j] < 0) continue;
            sum_d[static_cast<std::size_t>(labels[j])] += std::sqrt(points.dist2(i, j));
        }
        const auto own = static_cast<std::size_t>(labels[i]);
        if (cluster_size[own] <= 1) {
            svals[i] = 0.0;
            continue;
        }
        const double a = sum_d[own] / static_cast<double>(cluster_size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (c == own || cluster_size[c] == 0) continue;
            b = std::min(b, sum_d[c] / static_cast<double>(cluster_size[c]));
        }
        svals[i] = (b - a) / std::max(a, b);
    }

    std::size_t counted = 0;
    for (int l : labels)
        if (l >= 0) ++counted;
    if (counted == 0) throw std::invalid_argument("silhouette: all points are noise");
    const double total = stats::block_sum(points.n, [&](std::size_t i) { return svals[i]; });
    return total / static_cast<double>(counted);
}

} // namespace

double silhouette(const PointMatrix& points, const std::vector<int>& labels,
                  std::uint64_t subsample_seed, std::size_t exact_bound) {
    if (points.n != labels.size()) throw std::invalid_argument("labels/points size mismatch");
    if (points.n <= exact_bound) return silhouette_exact(points, labels);

    // Fixed-seed uniform subsample without replacement, in index order.
    stats::Rng rng(subsample_seed);
    std::vector<std::size_t> idx(points.n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t i = points.n - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    idx.resize(exact_bound);
    std::sort(idx.begin(), idx.end());

    PointMatrix sub;
    sub.n = idx.size();
    sub.dim = points.dim;
    sub.x.reserve(sub.n * sub.dim);
    std::vector<int> sub_labels(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = points.row(idx[i]);
        sub.x.insert(sub.x.end(), row.begin(), row.end());
        sub_labels[i] = labels[idx[i]];
    }
    return silhouette_exact(sub, sub_labels);
}

SelectKResult select_k(const PointMatrix& points, const std::vector<std::size_t>& k_range,
                       std::uint64_t seed) {
    if (k_range.empty()) throw std::invalid_argument("select_k: empty k range");
    std::vector<std::size_t> ks = k_range;
    std::sort(ks.begin(), ks.end()); // ascending, so ties resolve to the smaller k
    SelectKResult out;
    double best_sil = -2;
    for (std::size_t k : ks) {
        if (k < 2 || k > points.n - 1) throw std::invalid_argument("select_k: k outside [2, n-1]");
        KmeansResult r = kmeans(points, k, seed);
        r.silhouette = silhouette(points, r.labels, seed);
        out.silhouettes[k] = r.silhouette;
        if (r.silhouette > best_sil) { // ties keep the smaller k (range is ascending)
            best_sil = r.silhouette;
            out.best_k = k;
            out.best = std::move(r);
        }
    }
    return out;
}

} // namespace fillside::cluster
