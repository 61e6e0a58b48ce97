#pragma once

// Serial brute-force reference implementations. These are the independent
// oracles for the parallel kernels: kept deliberately naive, written against
// the definitions rather than sharing code with the main paths. Used by the
// test suites and the benchmark target only.

#include "fillside/cluster.hpp"
#include "fillside/features.hpp"
#include "fillside/micropanel.hpp"
#include "fillside/types.hpp"

#include <cstdint>
#include <vector>

namespace fillside::ref {

// O(n^2) DBSCAN with the same semantics as the main kernel: inclusive
// neighborhoods counting the point itself, clusters as core components
// numbered by smallest core index, border points to the lowest adjacent id.
std::vector<int> dbscan_brute(const cluster::PointMatrix& points, double epsilon,
                              std::size_t min_pts);

// Silhouette straight from the definition, serial.
double silhouette_brute(const cluster::PointMatrix& points, const std::vector<int>& labels);

// Plain sequential per-address aggregation loop.
features::AggregateMap aggregate_sequential(const std::vector<FillRecord>& records);

// Spearman rho via explicit ranks and a textbook Pearson on them.
double spearman_brute(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided permutation p-value for Spearman on small samples.
double spearman_perm_pvalue(const std::vector<double>& x, const std::vector<double>& y,
                            std::size_t n_permutations, std::uint64_t seed);

// Gini via the mean-absolute-difference identity.
double gini_brute(const std::vector<double>& values);

// Exact two-sided Mann-Whitney p-value by exhaustive enumeration of
// assignments (feasible for n_a + n_b <= ~16).
double mann_whitney_exact_pvalue(const std::vector<double>& a, const std::vector<double>& b);

// Windowed metric oracles computed by explicit bucketing.
double order_imbalance_brute(const micro::MarketSeries& series, std::int64_t window_seconds);
double two_sidedness_brute(const micro::MarketSeries& series, std::int64_t window_seconds);
double persistence_ratio_brute(const micro::MarketSeries& series, std::int64_t window_seconds);
double vpin_brute(const micro::MarketSeries& series, std::size_t n_buckets);

// Connected components by BFS over an explicit adjacency list.
std::vector<std::vector<std::string>> components_bfs(
    const std::vector<std::pair<std::string, std::string>>& edges);

} // namespace fillside::ref
