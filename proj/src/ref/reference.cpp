#include "fillside/reference.hpp"

#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace fillside::ref {

std::vector<int> dbscan_brute(const cluster::PointMatrix& points, double epsilon,
                              std::size_t min_pts) {
    const std::size_t n = points.n;
    const double eps2 = epsilon * epsilon;

    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (points.dist2(i, j) <= eps2) nbrs[i].push_back(j);

    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) core[i] = nbrs[i].size() >= min_pts;

    // Flood fill over core points only, seeds in input order.
    std::vector<int> labels(n, cluster::kNoise);
    int next = 0;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!core[seed] || labels[seed] != cluster::kNoise) continue;
        const int id = next++;
        std::deque<std::size_t> queue{seed};
        labels[seed] = id;
        while (!queue.empty()) {
            const std::size_t cur = queue.front();
            queue.pop_front();
            for (std::size_t j : nbrs[cur]) {
                if (!core[j] || labels[j] != cluster::kNoise) continue;
                labels[j] = id;
                queue.push_back(j);
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = cluster::kNoise;
        for (std::size_t j : nbrs[i]) {
            if (!core[j]) continue;
            if (best == cluster::kNoise || labels[j] < best) best = labels[j];
        }
        labels[i] = best;
    }
    return labels;
}

double silhouette_brute(const cluster::PointMatrix& points, const std::vector<int>& labels) {
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    const auto k = static_cast<std::size_t>(max_label + 1);
    if (k < 2) throw std::invalid_argument("silhouette needs >= 2 clusters");

    double total = 0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < points.n; ++i) {
        if (labels[i] < 0) continue;
        std::vector<double> sum(k, 0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t j = 0; j < points.n; ++j) {
            if (labels[j] < 0 || j == i) continue;
            sum[static_cast<std::size_t>(labels[j])] += std::sqrt(points.dist2(i, j));
            ++cnt[static_cast<std::size_t>(labels[j])];
        }
        const auto own = static_cast<std::size_t>(labels[i]);
        double s = 0;
        if (cnt[own] > 0) {
            const double a = sum[own] / static_cast<double>(cnt[own]);
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c)
                if (c != own && cnt[c] > 0) b = std::min(b, sum[c] / static_cast<double>(cnt[c]));
            s = (b - a) / std::max(a, b);
        }
        total += s;
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("silhouette: all noise");
    return total / static_cast<double>(counted);
}

features::AggregateMap aggregate_sequential(const std::vector<FillRecord>& records) {
    features::AggregateMap out;
    for (const auto& r : records) {
        auto& taker = out[r.taker];
        if (taker.address.empty()) taker.address = r.taker;
        taker.add(r, r.side);
        auto& maker = out[r.maker];
        if (maker.address.empty()) maker.address = r.maker;
        maker.add(r, opposite(r.side));
    }
    return out;
}

namespace {

std::vector<double> plain_ranks(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        double sum = 0;
        for (std::size_t t = i; t <= j; ++t) sum += static_cast<double>(t + 1);
        const double mean_rank = sum / static_cast<double>(j - i + 1);
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

double spearman_brute(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(plain_ranks(x), plain_ranks(y));
}

double spearman_perm_pvalue(const std::vector<double>& x, const std::vector<double>& y,
                            std::size_t n_permutations, std::uint64_t seed) {
    const double observed = std::abs(spearman_brute(x, y));
    stats::Rng rng(seed);
    std::vector<double> perm = y;
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < n_permutations; ++p) {
        for (std::size_t i = perm.size() - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        if (std::abs(spearman_brute(x, perm)) >= observed - 1e-12) ++at_least;
    }
    return static_cast<double>(at_least + 1) / static_cast<double>(n_permutations + 1);
}

double gini_brute(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n == 0) throw std::invalid_argument("gini of empty sample");
    double abs_diff = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += values[i];
        for (std::size_t j = 0; j < n; ++j) abs_diff += std::abs(values[i] - values[j]);
    }
    if (total <= 0) throw std::invalid_argument("gini needs positive total");
    const double mean = total / static_cast<double>(n);
    // Mean absolute difference identity, with the n^2 (biased) denominator
    // matching the trapezoid Lorenz construction.
    return abs_diff / (2.0 * static_cast<double>(n) * static_cast<double>(n) * mean);
}

double mann_whitney_exact_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    if (n > 20) throw std::invalid_argument("exact Mann-Whitney limited to small samples");
    std::vector<double> all(a);
    all.insert(all.end(), b.begin(), b.end());
    const auto ranks = plain_ranks(all);

    double observed = 0;
    for (std::size_t i = 0; i < n1; ++i) observed += ranks[i];
    observed -= static_cast<double>(n1 * (n1 + 1)) / 2.0;
    const double mean_u = static_cast<double>(n1 * n2) / 2.0;
    const double anchor = std::abs(observed - mean_u);

    // Enumerate every assignment of n1 positions out of n.
    std::vector<std::size_t> pick(n1);
    std::iota(pick.begin(), pick.end(), 0u);
    std::uint64_t total = 0, extreme = 0;
    while (true) {
        double u = 0;
        for (std::size_t i : pick) u += ranks[i];
        u -= static_cast<double>(n1 * (n1 + 1)) / 2.0;
        ++total;
        if (std::abs(u - mean_u) >= anchor - 1e-12) ++extreme;

        // next combination
        std::size_t i = n1;
        while (i > 0) {
            --i;
            if (pick[i] != i + n - n1) {
                ++pick[i];
                for (std::size_t j = i + 1; j < n1; ++j) pick[j] = pick[j - 1] + 1;
                break;
            }
            if (i == 0) {
                return static_cast<double>(extreme) / static_cast<double>(total);
            }
        }
    }
}

// --------------------------------------------------------------------------
// Windowed metric oracles: explicit bucket maps, no streaming tricks.
// --------------------------------------------------------------------------

namespace {

struct Bucketed {
    std::map<std::int64_t, std::vector<micro::SeriesFill>> by_window;
};

Bucketed bucket_fills(const micro::MarketSeries& s, std::int64_t window_seconds) {
    Bucketed out;
    const std::int64_t t0 = s.fills.front().ts;
    for (const auto& f : s.fills) out.by_window[(f.ts - t0) / window_seconds].push_back(f);
    return out;
}

double usd(Usdc v) { return static_cast<double>(v) / kMicro; }

} // namespace

double order_imbalance_brute(const micro::MarketSeries& s, std::int64_t window_seconds) {
    const auto buckets = bucket_fills(s, window_seconds);
    double num = 0, den = 0, net = 0;
    for (const auto& [w, fills] : buckets.by_window) {
        double vb = 0, vs = 0;
        for (const auto& f : fills) (f.taker_side == Side::BUY ? vb : vs) += usd(f.notional);
        if (vb + vs <= 0) continue;
        num += (vb + vs) * std::abs((vb - vs) / (vb + vs));
        den += vb + vs;
        net += vb - vs;
    }
    const double mag = num / den;
    return net > 0 ? mag : (net < 0 ? -mag : 0.0);
}

double two_sidedness_brute(const micro::MarketSeries& s, std::int64_t window_seconds) {
    const auto buckets = bucket_fills(s, window_seconds);
    double num = 0, den = 0;
    for (const auto& [w, fills] : buckets.by_window) {
        double vb = 0, vs = 0;
        for (const auto& f : fills) (f.taker_side == Side::BUY ? vb : vs) += usd(f.notional);
        if (vb + vs <= 0) continue;
        num += (vb + vs) * (1.0 - std::abs(vb - vs) / (vb + vs));
        den += vb + vs;
    }
    return num / den;
}

double persistence_ratio_brute(const micro::MarketSeries& s, std::int64_t window_seconds) {
    const auto buckets = bucket_fills(s, window_seconds);
    const auto lg = [](double p) {
        const double c = std::clamp(p, micro::kLogitClip, 1.0 - micro::kLogitClip);
        return std::log(c / (1.0 - c));
    };
    double num = 0, den = 0;
    for (const auto& [w, fills] : buckets.by_window) {
        if (fills.size() < 2) continue;
        double net = 0, abs_sum = 0;
        for (std::size_t i = 1; i < fills.size(); ++i) {
            const double r = lg(static_cast<double>(fills[i].price) / kMicro) -
                             lg(static_cast<double>(fills[i - 1].price) / kMicro);
            net += r;
            abs_sum += std::abs(r);
        }
        num += std::abs(net);
        den += abs_sum;
    }
    return num / den;
}

double vpin_brute(const micro::MarketSeries& s, std::size_t n_buckets) {
    double total = 0;
    for (const auto& f : s.fills) total += usd(f.notional);
    const double bucket = total / static_cast<double>(n_buckets);

    // Expand fills into (volume, side) slices against explicit bucket edges.
    std::vector<double> buy(n_buckets + 2, 0.0), vol(n_buckets + 2, 0.0);
    double cum = 0;
    for (const auto& f : s.fills) {
        double remaining = usd(f.notional);
        while (remaining > 1e-15) {
            const auto idx = static_cast<std::size_t>(cum / bucket + 1e-12);
            const double room = bucket * static_cast<double>(idx + 1) - cum;
            const double take = std::min(room, remaining);
            if (f.taker_side == Side::BUY) buy[idx] += take;
            vol[idx] += take;
            cum += take;
            remaining -= take;
        }
    }
    double sum = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < buy.size(); ++i) {
        if (vol[i] <= 0) continue;
        const bool full = vol[i] >= bucket - 1e-9;
        if (!full && vol[i] < bucket / 2) continue; // dropped partial
        const double sell = vol[i] - buy[i];
        sum += std::abs(buy[i] - sell) / vol[i];
        ++cnt;
    }
    return sum / static_cast<double>(cnt);
}

std::vector<std::vector<std::string>> components_bfs(
    const std::vector<std::pair<std::string, std::string>>& edges) {
    std::map<std::string, std::vector<std::string>> adj;
    std::set<std::string> nodes;
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
        nodes.insert(a);
        nodes.insert(b);
    }
    std::set<std::string> seen;
    std::vector<std::vector<std::string>> out;
    for (const auto& start : nodes) {
        if (seen.count(start)) continue;
        std::vector<std::string> comp;
        std::deque<std::string> queue{start};
        seen.insert(start);
        while (!queue.empty()) {
            const std::string cur = queue.front();
            queue.pop_front();
            comp.push_back(cur);
            for (const auto& next : adj[cur]) {
                if (seen.insert(next).second) queue.push_back(next);
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    return out;
}

} // namespace fillside::ref
