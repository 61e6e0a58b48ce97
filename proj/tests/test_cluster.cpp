#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fillside/cluster.hpp"
#include "fillside/reference.hpp"
#include "fillside/stats.hpp"
#include "fillside/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace fillside;
using cluster::PointMatrix;

namespace {

PointMatrix random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double spread = 3.0) {
    stats::Rng rng(seed);
    PointMatrix m;
    m.n = n;
    m.dim = dim;
    m.x.resize(n * dim);
    for (auto& v : m.x) v = rng.normal() * spread;
    return m;
}

// Gaussian blob with active variance only in the first `active` dimensions.
PointMatrix gaussian_blob(std::size_t n, std::size_t dim, std::size_t active, double sigma,
                          std::uint64_t seed) {
    stats::Rng rng(seed);
    PointMatrix m;
    m.n = n;
    m.dim = dim;
    m.x.assign(n * dim, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < active; ++d) m.x[i * dim + d] = sigma * rng.normal();
    return m;
}

bool labels_equivalent(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    std::map<int, int> fwd, bwd;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] == cluster::kNoise) != (b[i] == cluster::kNoise)) return false;
        if (a[i] == cluster::kNoise) continue;
        auto f = fwd.emplace(a[i], b[i]);
        auto g = bwd.emplace(b[i], a[i]);
        if (!f.second && f.first->second != b[i]) return false;
        if (!g.second && g.first->second != a[i]) return false;
    }
    return true;
}

} // namespace

TEST_CASE("dbscan matches the O(n^2) brute-force oracle on 20 random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 50 + seed * 12;
        const auto pts = random_points(n, 3, seed);
        const double eps = 0.8 + 0.15 * static_cast<double>(seed % 5);
        const std::size_t min_pts = 2 + seed % 6;
        const auto fast = cluster::dbscan(pts, {eps, min_pts});
        const auto brute = ref::dbscan_brute(pts, eps, min_pts);
        CHECK(labels_equivalent(fast.labels, brute));
    }
}

TEST_CASE("grid and brute-force neighbor search agree exactly") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const auto pts = random_points(200, 4, seed);
        const auto a = cluster::dbscan(pts, {1.2, 5}, cluster::NeighborMode::GRID);
        const auto b = cluster::dbscan(pts, {1.2, 5}, cluster::NeighborMode::BRUTE);
        CHECK(a.labels == b.labels);
    }
}

TEST_CASE("one isotropic gaussian blob is a single dense cluster") {
    const auto pts = gaussian_blob(2000, 2, 2, 1.0, 7);
    const auto out = cluster::dbscan(pts, {1.0, 10});
    CHECK(out.n_clusters == 1);
    CHECK(out.noise_fraction < 0.05);
}

TEST_CASE("two blobs 20 sigma apart separate into two clusters") {
    auto blobs = synth::make_blobs({{0, 0, 0, 0, 0, 0}, {20, 0, 0, 0, 0, 0}}, {400, 400}, 1.0, 8);
    const auto out = cluster::dbscan(blobs.points, {1.5, 10});
    CHECK(out.n_clusters == 2);
}

TEST_CASE("epsilon limit cases") {
    const auto pts = random_points(100, 3, 5);
    const auto all_one = cluster::dbscan(pts, {1e9, 2});
    CHECK(all_one.n_clusters == 1);
    CHECK(all_one.noise_fraction == 0.0);
    const auto all_noise = cluster::dbscan(pts, {1e-12, 2});
    CHECK(all_noise.n_clusters == 0);
    CHECK(all_noise.noise_fraction == 1.0);
}

TEST_CASE("labels are permutation-invariant up to renaming") {
    const auto pts = random_points(150, 3, 42);
    const auto base = cluster::dbscan(pts, {1.0, 4});

    stats::Rng rng(43);
    std::vector<std::size_t> perm(pts.n);
    for (std::size_t i = 0; i < pts.n; ++i) perm[i] = i;
    for (std::size_t i = pts.n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

    PointMatrix shuffled;
    shuffled.n = pts.n;
    shuffled.dim = pts.dim;
    shuffled.x.resize(pts.x.size());
    for (std::size_t i = 0; i < pts.n; ++i)
        for (std::size_t d = 0; d < pts.dim; ++d)
            shuffled.x[i * pts.dim + d] = pts.x[perm[i] * pts.dim + d];
    const auto out = cluster::dbscan(shuffled, {1.0, 4});

    std::vector<int> unshuffled(pts.n);
    for (std::size_t i = 0; i < pts.n; ++i) unshuffled[perm[i]] = out.labels[i];
    CHECK(labels_equivalent(base.labels, unshuffled));
}

TEST_CASE("every point is noise or in exactly one cluster") {
    const auto pts = random_points(300, 4, 77);
    const auto out = cluster::dbscan(pts, {1.1, 4});
    for (int l : out.labels) {
        CHECK(l >= cluster::kNoise);
        CHECK(l < static_cast<int>(out.n_clusters));
    }
    const auto noise = std::count(out.labels.begin(), out.labels.end(), cluster::kNoise);
    CHECK(out.noise_fraction ==
          doctest::Approx(static_cast<double>(noise) / static_cast<double>(pts.n)));
}

TEST_CASE("protocol: cluster cap and noise rejections, fallback and acceptance") {
    cluster::ClusterOutcome too_many;
    too_many.n_clusters = 49;
    too_many.noise_fraction = 0.1;
    too_many.labels = {0};
    cluster::ClusterOutcome noisy;
    noisy.n_clusters = 3;
    noisy.noise_fraction = 0.81;
    noisy.labels = {0};
    cluster::ClusterOutcome fine;
    fine.n_clusters = 5;
    fine.noise_fraction = 0.10;
    fine.labels = {0, 1, 2, 3, 4};
    cluster::ClusterOutcome unimodal;
    unimodal.n_clusters = 1;
    unimodal.noise_fraction = 0.0;
    unimodal.labels = {0};

    const auto v1 = cluster::evaluate_protocol({too_many, noisy}, 20, 0.5);
    CHECK(v1.stage_reached == cluster::Stage::KMEANS_FALLBACK);
    CHECK(v1.evaluations[0].rejection_reasons == std::vector<std::string>{"cluster_cap"});
    CHECK(v1.evaluations[1].rejection_reasons == std::vector<std::string>{"noise"});

    const auto v2 = cluster::evaluate_protocol({unimodal, fine}, 20, 0.5);
    CHECK(v2.stage_reached == cluster::Stage::DBSCAN_ACCEPTED);
    CHECK(v2.final_labeling == fine.labels);

    const auto v3 = cluster::evaluate_protocol({unimodal, unimodal}, 20, 0.5);
    CHECK(v3.stage_reached == cluster::Stage::KMEANS_FALLBACK);
    CHECK(v3.all_agree_on_n_clusters);

    const auto v4 = cluster::evaluate_protocol({too_many, noisy}, 20, 0.5, "hdbscan");
    CHECK(v4.stage_reached == cluster::Stage::HDBSCAN_REJECTED);
}

TEST_CASE("protocol verdict is pure") {
    cluster::ClusterOutcome o;
    o.n_clusters = 5;
    o.noise_fraction = 0.2;
    o.labels = {0, 1, 2, 3, 4};
    const auto a = cluster::evaluate_protocol({o});
    const auto b = cluster::evaluate_protocol({o});
    CHECK(a.stage_reached == b.stage_reached);
    CHECK(a.final_labeling == b.final_labeling);
}

TEST_CASE("kmeans recovers three well-separated planted centroids") {
    auto blobs = synth::make_blobs(
        {{0, 0, 0, 0, 0, 0}, {10, 10, 0, 0, 0, 0}, {0, 0, 10, 10, 0, 0}}, {300, 300, 300}, 0.5, 9);
    const auto r = cluster::kmeans(blobs.points, 3, 1);
    REQUIRE(r.centroids.size() == 18);
    const std::vector<std::array<double, 6>> planted = {
        {0, 0, 0, 0, 0, 0}, {10, 10, 0, 0, 0, 0}, {0, 0, 10, 10, 0, 0}};
    for (const auto& p : planted) {
        double best = 1e18;
        for (std::size_t c = 0; c < 3; ++c) {
            double d = 0;
            for (std::size_t k = 0; k < 6; ++k) {
                const double diff = r.centroids[c * 6 + k] - p[k];
                d += diff * diff;
            }
            best = std::min(best, std::sqrt(d));
        }
        CHECK(best < 0.1);
    }
}

TEST_CASE("k equal to n gives zero inertia") {
    const auto pts = random_points(12, 3, 15);
    const auto r = cluster::kmeans(pts, 12, 1);
    CHECK(r.inertia == doctest::Approx(0.0));
}

TEST_CASE("duplicating every point leaves the recovered centroids unchanged") {
    auto blobs =
        synth::make_blobs({{0, 0, 0, 0, 0, 0}, {12, 12, 12, 0, 0, 0}}, {200, 200}, 0.5, 10);
    PointMatrix doubled;
    doubled.n = blobs.points.n * 2;
    doubled.dim = 6;
    doubled.x = blobs.points.x;
    doubled.x.insert(doubled.x.end(), blobs.points.x.begin(), blobs.points.x.end());

    const auto a = cluster::kmeans(blobs.points, 2, 3);
    const auto b = cluster::kmeans(doubled, 2, 3);
    // Compare centroid sets, sorted by first coordinate.
    std::vector<std::vector<double>> ca = {{a.centroids.begin(), a.centroids.begin() + 6},
                                           {a.centroids.begin() + 6, a.centroids.end()}};
    std::vector<std::vector<double>> cb = {{b.centroids.begin(), b.centroids.begin() + 6},
                                           {b.centroids.begin() + 6, b.centroids.end()}};
    std::sort(ca.begin(), ca.end());
    std::sort(cb.begin(), cb.end());
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < 6; ++k)
            CHECK(ca[c][k] == doctest::Approx(cb[c][k]).epsilon(1e-6));
}

TEST_CASE("kmeans inertia is non-increasing across Lloyd iterations") {
    const auto pts = random_points(400, 4, 33);
    double prev = 1e300;
    for (std::size_t iters = 1; iters <= 6; ++iters) {
        const auto r = cluster::kmeans(pts, 5, 2, iters, 1);
        CHECK(r.inertia <= prev + 1e-9);
        prev = r.inertia;
    }
}

TEST_CASE("kmeans is deterministic given seed and invariant to thread count") {
    const auto pts = random_points(2000, 6, 55);
    const auto a = cluster::kmeans(pts, 4, 7);
    const auto b = cluster::kmeans(pts, 4, 7);
    CHECK(a.labels == b.labels);
    CHECK(a.centroids == b.centroids);
    CHECK(a.inertia == b.inertia);
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto serial = cluster::kmeans(pts, 4, 7);
    omp_set_num_threads(saved);
    CHECK(serial.labels == a.labels);
    CHECK(serial.centroids == a.centroids); // bit-identical, not approximately
    CHECK(serial.inertia == a.inertia);
#endif
}

TEST_CASE("silhouette equals the brute-force definition within 1e-9") {
    for (std::uint64_t seed = 60; seed < 63; ++seed) {
        auto blobs = synth::make_blobs({{0, 0, 0, 0, 0, 0}, {4, 4, 4, 4, 4, 4}}, {150, 150}, 1.5,
                                       seed);
        const double fast = cluster::silhouette(blobs.points, blobs.labels);
        const double brute = ref::silhouette_brute(blobs.points, blobs.labels);
        CHECK(std::abs(fast - brute) < 1e-9);
        CHECK(fast >= -1.0);
        CHECK(fast <= 1.0);
    }
}

TEST_CASE("silhouette rejects a single cluster") {
    const auto pts = random_points(50, 3, 70);
    std::vector<int> labels(50, 0);
    CHECK_THROWS_AS(cluster::silhouette(pts, labels), std::invalid_argument);
}

TEST_CASE("silhouette subsampling stays close to exact on large inputs") {
    auto blobs = synth::make_blobs({{0, 0, 0, 0, 0, 0}, {8, 8, 8, 8, 8, 8}}, {4000, 4000}, 1.0, 71);
    const double exact = cluster::silhouette(blobs.points, blobs.labels, 1, 10000);
    const double sampled = cluster::silhouette(blobs.points, blobs.labels, 1, 2000);
    CHECK(std::abs(exact - sampled) < 0.05);
}

TEST_CASE("select_k finds k=4 on planted 4-blob data") {
    auto blobs = synth::make_blobs({{0, 0, 0, 0, 0, 0},
                                    {10, 0, 0, 0, 0, 0},
                                    {0, 10, 0, 0, 0, 0},
                                    {10, 10, 0, 0, 0, 0}},
                                   {200, 200, 200, 200}, 0.8, 12);
    const auto sel = cluster::select_k(blobs.points, {3, 4, 5, 6, 7}, 99);
    CHECK(sel.best_k == 4);
    CHECK(sel.silhouettes.at(4) > 0.5);
}

TEST_CASE("suggest_epsilon returns a usable radius for a blob") {
    const auto pts = gaussian_blob(500, 6, 6, 1.0, 80);
    const double eps = cluster::suggest_epsilon(pts, 10);
    CHECK(eps > 0);
    const auto out = cluster::dbscan(pts, {eps * 1.5, 10});
    CHECK(out.n_clusters >= 1);
}
