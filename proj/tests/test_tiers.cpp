#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fillside/reference.hpp"
#include "fillside/stats.hpp"
#include "fillside/tiers.hpp"

#include <cmath>

using namespace fillside;
using features::FeatureRow;
using tiers::Tier;

namespace {

FeatureRow make_row(const std::string& addr, double f2, double f9, double notional_usd,
                    double max_share = 0.0) {
    FeatureRow r;
    r.address = addr;
    r.n_fills = 10;
    r.raw = {f2, 0.0, 0.0, 0.5, 1.0, f9};
    r.total_notional = static_cast<Usdc>(std::llround(notional_usd * kMicro));
    r.max_market_share = max_share;
    return r;
}

// Band-separated population: thresholds land in the gaps so planted labels
// recover exactly. 100 addresses per point of structure.
struct Planted {
    std::vector<FeatureRow> rows;
    std::map<std::string, Tier> truth;

    void add(const std::string& prefix, std::size_t count, Tier tier, double f2_lo, double f2_hi,
             double f9_lo, double f9_hi, double notional_lo, double notional_hi,
             std::uint64_t seed) {
        stats::Rng rng(seed);
        for (std::size_t i = 0; i < count; ++i) {
            const auto addr = prefix + std::to_string(i);
            rows.push_back(make_row(addr, rng.uniform(f2_lo, f2_hi), rng.uniform(f9_lo, f9_hi),
                                    rng.uniform(notional_lo, notional_hi)));
            truth[addr] = tier;
        }
    }
};

Planted planted_population() {
    Planted p;
    // counts: 1199 episodic, 299 active, 101 hbo, 300 power, 101 hfo = 2000
    p.add("epi", 1199, Tier::EPISODIC_RETAIL, 0.5, 0.7, 0.7, 1.1, 300, 4000, 1);
    p.add("act", 299, Tier::ACTIVE_RETAIL, 1.25, 1.6, 1.4, 1.8, 12000, 20000, 2);
    p.add("hbo", 101, Tier::HBO, 0.92, 1.1, 4.8, 5.0, 30000, 40000, 3);
    p.add("pow", 300, Tier::POWER, 2.2, 2.7, 2.2, 2.6, 120000, 200000, 4);
    p.add("hfo", 101, Tier::HFO, 3.9, 4.4, 3.3, 3.6, 60000, 90000, 5);
    return p;
}

} // namespace

TEST_CASE("planted tier structure recovers exactly") {
    auto p = planted_population();
    const auto result = tiers::classify_tiers(p.rows);
    std::size_t errors = 0;
    for (const auto& [addr, truth] : p.truth)
        if (result.labels.at(addr).tier != truth) ++errors;
    CHECK(errors == 0);
}

TEST_CASE("whale overlay triggers on notional or single-market share, never alters tier") {
    auto p = planted_population();
    // One power trader scaled to whale notional, one episodic with a
    // dominating share of a single market.
    p.rows[1600].total_notional = 1'200'000ll * kMicro; // a power-band address
    p.rows[0].max_market_share = 0.006;

    const auto result = tiers::classify_tiers(p.rows);
    const auto& whale_by_notional = result.labels.at(p.rows[1600].address);
    CHECK(whale_by_notional.whale);
    const auto& whale_by_share = result.labels.at(p.rows[0].address);
    CHECK(whale_by_share.whale);
    CHECK(whale_by_share.tier == Tier::EPISODIC_RETAIL); // overlay is orthogonal

    // Exactly at the notional boundary counts (inclusive comparison).
    p.rows[1601].total_notional = 1'000'000ll * kMicro;
    const auto again = tiers::classify_tiers(p.rows);
    CHECK(again.labels.at(p.rows[1601].address).whale);
}

TEST_CASE("address above both HFO cutoffs classifies HFO") {
    std::vector<FeatureRow> rows;
    for (int i = 1; i <= 100; ++i)
        rows.push_back(make_row("a" + std::to_string(i), i, i, i * 1000.0));
    const auto result = tiers::classify_tiers(rows);
    // Nearest-rank P95 of 1..100 is 95; >= comparisons include the cutoff.
    CHECK(result.cutoffs.f2_p_hfo == doctest::Approx(95.0));
    CHECK(result.labels.at("a96").tier == Tier::HFO);
    CHECK(result.labels.at("a95").tier == Tier::HFO);
    CHECK(result.labels.at("a94").tier != Tier::HFO);
}

TEST_CASE("tiers partition the population") {
    auto p = planted_population();
    const auto result = tiers::classify_tiers(p.rows);
    CHECK(result.labels.size() == p.rows.size());
    const auto counts = tiers::tier_counts(p.rows, result.labels);
    std::uint64_t total = 0;
    for (const auto& [tier, n] : counts.population) total += n;
    CHECK(total == p.rows.size());
}

TEST_CASE("same input produces identical cutoffs and labels") {
    auto p = planted_population();
    const auto a = tiers::classify_tiers(p.rows);
    const auto b = tiers::classify_tiers(p.rows);
    CHECK(a.cutoffs.f2_p_hfo == b.cutoffs.f2_p_hfo);
    CHECK(a.labels.size() == b.labels.size());
    for (const auto& [addr, label] : a.labels) {
        CHECK(b.labels.at(addr).tier == label.tier);
        CHECK(b.labels.at(addr).whale == label.whale);
    }
}

TEST_CASE("sensitivity grid: HFO monotone in the f2 cutoff, whale count constant") {
    auto p = planted_population();
    // Give a few addresses whale notionals so the constancy check bites.
    for (std::size_t i = 1600; i < 1610; ++i) p.rows[i].total_notional = 2'000'000ll * kMicro;

    const auto grid = tiers::tier_sensitivity(p.rows, {0.90, 0.95, 0.99}, {0.90, 0.95, 0.99});
    REQUIRE(grid.size() == 9);

    const auto whales0 = grid[0].counts.whales;
    for (const auto& cell : grid) {
        CHECK(cell.counts.whales == whales0);
        CHECK(cell.counts.population.at(Tier::EPISODIC_RETAIL) ==
              grid[0].counts.population.at(Tier::EPISODIC_RETAIL));
    }
    // Rows of the grid vary f2; HFO population shrinks as the cutoff rises.
    for (std::size_t f9i = 0; f9i < 3; ++f9i) {
        std::uint64_t prev = ~0ull;
        for (std::size_t f2i = 0; f2i < 3; ++f2i) {
            const auto hfo = grid[f2i * 3 + f9i].counts.population.at(Tier::HFO);
            CHECK(hfo <= prev);
            prev = hfo;
        }
    }
}

TEST_CASE("strict non-retail share is monotone non-increasing as thresholds tighten") {
    auto p = planted_population();
    double prev_share = 2.0;
    for (double pct : {0.90, 0.95, 0.99}) {
        tiers::TierThresholds t;
        t.hfo_f2_percentile = pct;
        t.power_f2_percentile = std::min(0.75, pct);
        const auto result = tiers::classify_tiers(p.rows, t);
        Usdc strict = 0, total = 0;
        for (const auto& r : p.rows) {
            total += r.total_notional;
            const auto& label = result.labels.at(r.address);
            if (label.whale || label.tier == Tier::HFO || label.tier == Tier::POWER)
                strict += r.total_notional;
        }
        const double share = static_cast<double>(strict) / static_cast<double>(total);
        CHECK(share <= prev_share + 1e-12);
        prev_share = share;
    }
}

TEST_CASE("crosstab cells sum to the population and match brute-force pair counting") {
    std::map<std::string, std::string> rows_label, cols_label;
    for (int i = 0; i < 10; ++i) {
        const auto addr = "a" + std::to_string(i);
        rows_label[addr] = i < 4 ? "T1" : "T2";
        cols_label[addr] = i % 3 == 0 ? "K0" : "K1";
    }
    const auto tab = tiers::crosstab(rows_label, cols_label);
    CHECK(tab.total == 10);
    std::uint64_t sum = 0;
    for (const auto& [key, count] : tab.cells) sum += count;
    CHECK(sum == 10);

    // brute-force pair counting
    for (const auto& [key, count] : tab.cells) {
        std::uint64_t expect = 0;
        for (const auto& [addr, r] : rows_label)
            if (r == key.first && cols_label.at(addr) == key.second) ++expect;
        CHECK(count == expect);
    }
    // row and column sums equal the marginal populations
    CHECK(tab.row_totals.at("T1") == 4);
    CHECK(tab.row_totals.at("T2") == 6);
    CHECK(tab.col_totals.at("K0") == 4);
    CHECK(tab.col_totals.at("K1") == 6);
}

TEST_CASE("gini closed forms: equal holders and single holder") {
    std::vector<double> equal(100, 5.0);
    CHECK(tiers::concentration(equal).gini == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> single(100, 0.0);
    single[0] = 1000.0;
    CHECK(tiers::concentration(single).gini == doctest::Approx(0.99)); // 1 - 1/n
}

TEST_CASE("gini matches the mean-absolute-difference oracle on random data") {
    stats::Rng rng(17);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> v(200);
        for (auto& x : v) x = rng.uniform(0.0, 1000.0);
        const double a = tiers::concentration(v).gini;
        const double b = ref::gini_brute(v);
        CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
}

TEST_CASE("gini is invariant to scaling and permutation") {
    stats::Rng rng(18);
    std::vector<double> v(150);
    for (auto& x : v) x = rng.uniform(1.0, 500.0);
    const double base = tiers::concentration(v).gini;

    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= 37.0;
    CHECK(tiers::concentration(scaled).gini == doctest::Approx(base).epsilon(1e-12));

    std::vector<double> perm = v;
    for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    CHECK(tiers::concentration(perm).gini == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("lorenz curve is monotone, convex, with unit endpoints") {
    stats::Rng rng(19);
    std::vector<double> v(120);
    for (auto& x : v) x = rng.uniform(0.0, 100.0);
    const auto c = tiers::concentration(v, {0.1});
    CHECK(c.lorenz.front() == std::pair<double, double>{0.0, 0.0});
    CHECK(c.lorenz.back().first == doctest::Approx(1.0));
    CHECK(c.lorenz.back().second == doctest::Approx(1.0));
    for (std::size_t i = 1; i < c.lorenz.size(); ++i)
        CHECK(c.lorenz[i].second >= c.lorenz[i - 1].second - 1e-12);
    // convex: increments non-decreasing (values sorted ascending)
    for (std::size_t i = 2; i < c.lorenz.size(); ++i) {
        const double d1 = c.lorenz[i - 1].second - c.lorenz[i - 2].second;
        const double d2 = c.lorenz[i].second - c.lorenz[i - 1].second;
        CHECK(d2 >= d1 - 1e-12);
    }
    CHECK(c.top_shares.at(0.1) > 0.0);
}
