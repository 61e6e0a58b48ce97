// Compares the OpenMP kernels against their serial reference
// implementations on synthetic workloads of increasing size.

#include "fillside/cluster.hpp"
#include "fillside/features.hpp"
#include "fillside/reference.hpp"
#include "fillside/stats.hpp"
#include "fillside/synth.hpp"

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double time_ms(F&& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void row(const char* name, std::size_t n, double serial_ms, double parallel_ms) {
    std::printf("%-28s n=%-8zu serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx\n", name, n,
                serial_ms, parallel_ms, serial_ms / parallel_ms);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif

    // DBSCAN: grid-accelerated parallel kernel vs O(n^2) serial reference.
    // Spread-out data exercises the grid; the tight blob exercises the
    // degenerate-occupancy fallback (parallel direct scan).
    for (std::size_t n : {2000u, 6000u}) {
        fillside::stats::Rng rng(7);
        fillside::cluster::PointMatrix pts;
        pts.n = n;
        pts.dim = 6;
        pts.x.resize(n * 6);
        for (auto& v : pts.x) v = rng.uniform(0.0, 30.0);
        std::vector<int> labels_par, labels_ser;
        const double par =
            time_ms([&] { labels_par = fillside::cluster::dbscan(pts, {2.0, 5}).labels; });
        const double ser = time_ms([&] { labels_ser = fillside::ref::dbscan_brute(pts, 2.0, 5); });
        row("dbscan (spread, grid)", n, ser, par);
        if (labels_par != labels_ser) std::printf("  MISMATCH: dbscan labels differ\n");
    }
    {
        auto blobs = fillside::synth::make_blobs({{0, 0, 0, 0, 0, 0}}, {4000}, 0.6, 7);
        std::vector<int> labels_par, labels_ser;
        const double par =
            time_ms([&] { labels_par = fillside::cluster::dbscan(blobs.points, {1.5, 10}).labels; });
        const double ser =
            time_ms([&] { labels_ser = fillside::ref::dbscan_brute(blobs.points, 1.5, 10); });
        row("dbscan (blob, fallback)", blobs.points.n, ser, par);
        if (labels_par != labels_ser) std::printf("  MISMATCH: dbscan labels differ\n");
    }

    // Silhouette: blocked parallel kernel vs serial definition.
    {
        auto blobs = fillside::synth::make_blobs(
            {{0, 0, 0, 0, 0, 0}, {6, 6, 6, 6, 6, 6}, {-6, 6, -6, 6, -6, 6}}, {1200, 1200, 1200},
            1.0, 11);
        double s_par = 0, s_ser = 0;
        const double par =
            time_ms([&] { s_par = fillside::cluster::silhouette(blobs.points, blobs.labels); });
        const double ser =
            time_ms([&] { s_ser = fillside::ref::silhouette_brute(blobs.points, blobs.labels); });
        row("silhouette", blobs.points.n, ser, par);
        if (std::abs(s_par - s_ser) > 1e-9) std::printf("  MISMATCH: silhouette differs\n");
    }

    // k-means on planted blobs (parallel assignment + blocked reduction).
    {
        auto blobs = fillside::synth::make_blobs(
            {{0, 0, 0, 0, 0, 0}, {8, 0, 8, 0, 8, 0}, {0, 8, 0, 8, 0, 8}, {8, 8, 8, 8, 8, 8}},
            {20000, 20000, 20000, 20000}, 1.0, 13);
        const double par = time_ms([&] { fillside::cluster::kmeans(blobs.points, 4, 1, 50, 3); });
        std::printf("%-28s n=%-8zu parallel %9.2f ms\n", "kmeans (4 blobs)", blobs.points.n, par);
    }

    // Aggregation: OpenMP partition-merge vs sequential loop, at a
    // realistic fills-per-address ratio.
    {
        fillside::stats::Rng rng(9);
        std::vector<fillside::FillRecord> fills;
        fills.reserve(400000);
        for (std::size_t i = 0; i < 400000; ++i) {
            fillside::FillRecord r;
            r.block_number = i / 8;
            r.log_index = static_cast<std::uint32_t>(i % 8);
            r.tx_hash = "0x" + std::to_string(i);
            r.maker = "0xa" + std::to_string(rng.uniform_int(5000));
            r.taker = "0xb" + std::to_string(rng.uniform_int(5000));
            r.market_token = std::to_string(rng.uniform_int(2000));
            r.side = rng.uniform01() < 0.5 ? fillside::Side::BUY : fillside::Side::SELL;
            r.price = 500000;
            r.notional = static_cast<fillside::Usdc>(1 + rng.uniform_int(100000000));
            r.timestamp = 1766275200 + static_cast<std::int64_t>(rng.uniform_int(604800));
            fills.push_back(std::move(r));
        }
        fillside::features::AggregateMap a, b;
        const double par = time_ms([&] { a = fillside::features::aggregate(fills); });
        const double ser = time_ms([&] { b = fillside::ref::aggregate_sequential(fills); });
        row("aggregate", fills.size(), ser, par);
        if (a.size() != b.size()) std::printf("  MISMATCH: aggregate maps differ\n");
    }

    return 0;
}
