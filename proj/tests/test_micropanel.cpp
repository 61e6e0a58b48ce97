#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fillside/micropanel.hpp"
#include "fillside/reference.hpp"
#include "fillside/stats.hpp"
#include "fillside/synth.hpp"

#include <cmath>
#include <filesystem>

using namespace fillside;
using micro::MarketSeries;

namespace {

MicroPrice px(double p) { return static_cast<MicroPrice>(std::llround(p * kMicro)); }
Usdc usd(double v) { return static_cast<Usdc>(std::llround(v * kMicro)); }

MarketSeries series(std::initializer_list<std::tuple<std::int64_t, double, double, Side>> fills) {
    MarketSeries s;
    s.market_token = "m";
    for (const auto& [ts, price, notional, side] : fills)
        s.fills.push_back({ts, px(price), usd(notional), side});
    return s;
}

MarketSeries random_series(std::uint64_t seed, std::size_t n_fills = 200) {
    stats::Rng rng(seed);
    MarketSeries s;
    s.market_token = "r" + std::to_string(seed);
    std::int64_t ts = 0;
    for (std::size_t i = 0; i < n_fills; ++i) {
        ts += static_cast<std::int64_t>(rng.uniform_int(600));
        s.fills.push_back({ts, static_cast<MicroPrice>(rng.uniform_int(kMicro + 1)),
                           static_cast<Usdc>(1 + rng.uniform_int(500 * kMicro)),
                           rng.uniform01() < 0.5 ? Side::BUY : Side::SELL});
    }
    return s;
}

} // namespace

TEST_CASE("order imbalance: all buys give +1 in every window") {
    auto s = series({{0, 0.5, 10, Side::BUY},
                     {100, 0.5, 5, Side::BUY},
                     {400, 0.6, 8, Side::BUY},
                     {900, 0.7, 2, Side::BUY}});
    CHECK(*micro::order_imbalance(s, 300) == doctest::Approx(1.0));
}

TEST_CASE("order imbalance: balanced flow within each window gives 0") {
    auto s = series({{0, 0.5, 10, Side::BUY},
                     {10, 0.5, 10, Side::SELL},
                     {400, 0.5, 4, Side::BUY},
                     {410, 0.5, 4, Side::SELL}});
    CHECK(*micro::order_imbalance(s, 300) == doctest::Approx(0.0));
}

TEST_CASE("order imbalance matches the brute-force windowed oracle") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto s = random_series(seed);
        for (std::int64_t w : {300, 900, 3600})
            CHECK(*micro::order_imbalance(s, w) ==
                  doctest::Approx(ref::order_imbalance_brute(s, w)).epsilon(1e-12));
    }
}

TEST_CASE("two-sidedness endpoints and oracle") {
    auto all_buy = series({{0, 0.5, 10, Side::BUY}, {10, 0.5, 5, Side::BUY}});
    CHECK(*micro::two_sidedness(all_buy, 0) == doctest::Approx(0.0));
    auto balanced = series({{0, 0.5, 10, Side::BUY}, {10, 0.5, 10, Side::SELL}});
    CHECK(*micro::two_sidedness(balanced, 0) == doctest::Approx(1.0));
    for (std::uint64_t seed = 11; seed <= 14; ++seed) {
        const auto s = random_series(seed);
        CHECK(*micro::two_sidedness(s, 3600) ==
              doctest::Approx(ref::two_sidedness_brute(s, 3600)).epsilon(1e-12));
    }
}

TEST_CASE("persistence ratio: monotone path gives 1, round trip gives 0") {
    auto monotone = series({{0, 0.30, 5, Side::BUY},
                            {60, 0.40, 5, Side::BUY},
                            {120, 0.55, 5, Side::BUY},
                            {180, 0.70, 5, Side::BUY}});
    CHECK(*micro::persistence_ratio(monotone, 3600) == doctest::Approx(1.0));

    auto round_trip = series({{0, 0.30, 5, Side::BUY},
                              {60, 0.50, 5, Side::BUY},
                              {120, 0.70, 5, Side::BUY},
                              {180, 0.50, 5, Side::SELL},
                              {240, 0.30, 5, Side::SELL}});
    CHECK(*micro::persistence_ratio(round_trip, 3600) == doctest::Approx(0.0));
}

TEST_CASE("persistence ratio matches the brute-force oracle") {
    for (std::uint64_t seed = 21; seed <= 24; ++seed) {
        const auto s = random_series(seed);
        for (std::int64_t w : {3600, 14400})
            CHECK(*micro::persistence_ratio(s, w) ==
                  doctest::Approx(ref::persistence_ratio_brute(s, w)).epsilon(1e-12));
    }
}

TEST_CASE("persistence ratio is invariant to logit-shift relabeling") {
    const auto s = random_series(25);
    MarketSeries shifted = s;
    const double c = 0.8;
    for (auto& f : shifted.fills) {
        const double p = std::clamp(static_cast<double>(f.price) / kMicro, micro::kLogitClip,
                                    1.0 - micro::kLogitClip);
        const double l = std::log(p / (1.0 - p)) + c;
        f.price = px(1.0 / (1.0 + std::exp(-l)));
    }
    CHECK(*micro::persistence_ratio(shifted, 3600) ==
          doctest::Approx(*micro::persistence_ratio(s, 3600)).epsilon(1e-3));
}

TEST_CASE("vpin endpoints and oracle") {
    MarketSeries all_buy;
    all_buy.market_token = "m";
    for (int i = 0; i < 100; ++i) all_buy.fills.push_back({i * 10, px(0.5), usd(1), Side::BUY});
    CHECK(*micro::vpin(all_buy, 50) == doctest::Approx(1.0));

    MarketSeries balanced;
    balanced.market_token = "m";
    for (int i = 0; i < 200; ++i)
        balanced.fills.push_back({i * 10, px(0.5), usd(1), i % 2 == 0 ? Side::BUY : Side::SELL});
    CHECK(*micro::vpin(balanced, 50) == doctest::Approx(0.0));

    for (std::uint64_t seed = 31; seed <= 34; ++seed) {
        const auto s = random_series(seed, 400);
        CHECK(*micro::vpin(s, 50) == doctest::Approx(ref::vpin_brute(s, 50)).epsilon(1e-9));
    }
}

TEST_CASE("vpin and order imbalance are invariant to uniform notional scaling") {
    const auto s = random_series(35);
    MarketSeries scaled = s;
    for (auto& f : scaled.fills) f.notional *= 17;
    CHECK(*micro::vpin(scaled, 50) == doctest::Approx(*micro::vpin(s, 50)).epsilon(1e-9));
    CHECK(*micro::order_imbalance(scaled, 900) ==
          doctest::Approx(*micro::order_imbalance(s, 900)).epsilon(1e-9));
}

TEST_CASE("kyle lambda recovers a planted noise-free slope within 1%") {
    const auto s = synth::simulate_impact_series(0.001, 100, 300, 0.0, 41);
    const auto k = micro::kyle_lambda(s, 300);
    REQUIRE(k.raw.has_value());
    CHECK(std::abs(*k.raw - 0.001) / 0.001 < 0.01);
}

TEST_CASE("kyle lambda on a constant price is zero") {
    MarketSeries s;
    s.market_token = "m";
    stats::Rng rng(42);
    for (int i = 0; i < 50; ++i)
        s.fills.push_back({i * 300, px(0.5), usd(rng.uniform(1.0, 20.0)),
                           rng.uniform01() < 0.5 ? Side::BUY : Side::SELL});
    const auto k = micro::kyle_lambda(s, 300);
    REQUIRE(k.raw.has_value());
    CHECK(*k.raw == doctest::Approx(0.0));
}

TEST_CASE("kyle lambda is null when under-determined") {
    auto s = series({{0, 0.5, 5, Side::BUY}, {400, 0.6, 5, Side::BUY}});
    CHECK(!micro::kyle_lambda(s, 300).raw.has_value());
}

TEST_CASE("winsorize clips, counts, and is idempotent") {
    std::vector<double> inside = {1, 2, 3, 4, 5};
    micro::WinsorSpec spec;
    spec.lo = 0;
    spec.hi = 10;
    auto [same, count0] = micro::winsorize(inside, spec);
    CHECK(same == inside);
    CHECK(count0 == 0);

    std::vector<double> one_out = {1, 2, 30};
    auto [clipped, count1] = micro::winsorize(one_out, spec);
    CHECK(clipped == std::vector<double>{1, 2, 10});
    CHECK(count1 == 1);

    auto [again, count2] = micro::winsorize(clipped, spec);
    CHECK(again == clipped);
    CHECK(count2 == 0);
}

TEST_CASE("winsor band matches the sort-based quantile oracle") {
    stats::Rng rng(51);
    std::vector<double> v(500);
    for (auto& x : v) x = rng.normal() * 100;
    const auto spec = micro::fit_winsor(v, 0.01, 0.99);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(spec.lo == sorted[static_cast<std::size_t>(std::ceil(0.01 * 500)) - 1]);
    CHECK(spec.hi == sorted[static_cast<std::size_t>(std::ceil(0.99 * 500)) - 1]);
}

TEST_CASE("trade size kurtosis: two-point symmetric distribution gives -2") {
    auto s = series({{0, 0.5, 1, Side::BUY},
                     {10, 0.5, 1, Side::BUY},
                     {20, 0.5, 9, Side::SELL},
                     {30, 0.5, 9, Side::SELL}});
    CHECK(*micro::trade_size_kurtosis(s) == doctest::Approx(-2.0));

    auto constant = series({{0, 0.5, 5, Side::BUY}, {10, 0.5, 5, Side::SELL}});
    CHECK(!micro::trade_size_kurtosis(constant).has_value());
}

TEST_CASE("trade size kurtosis matches the direct moment oracle") {
    const auto s = random_series(61, 300);
    std::vector<double> sizes;
    for (const auto& f : s.fills) sizes.push_back(static_cast<double>(f.notional) / kMicro);
    CHECK(*micro::trade_size_kurtosis(s) ==
          doctest::Approx(stats::excess_kurtosis(sizes)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// ILS
// ---------------------------------------------------------------------------

TEST_CASE("ils: price already at resolution gives 1 at every anchor") {
    MarketSeries s;
    s.market_token = "m";
    s.fills.push_back({0, px(0.3), usd(5), Side::BUY});
    for (int i = 1; i < 50; ++i) s.fills.push_back({i * 3600, px(1.0), usd(5), Side::BUY});
    s.resolution_price = kMicro;
    s.resolution_ts = 400000;
    const auto ils = micro::ils_values(s, {3600, 21600, 86400, 100000});
    for (const auto& v : ils) {
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(1.0));
    }
    CHECK(micro::ils_in_scope(s));
}

TEST_CASE("ils: price pinned at open until after the last anchor gives 0") {
    MarketSeries s;
    s.market_token = "m";
    for (int i = 0; i < 100; ++i) s.fills.push_back({i * 600, px(0.3), usd(5), Side::BUY});
    s.resolution_price = kMicro;
    s.resolution_ts = 100 * 600 + 400000; // anchors all precede any move
    const auto ils = micro::ils_values(s, {3600, 21600, 86400, 259200});
    for (const auto& v : ils) {
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(0.0));
    }
}

TEST_CASE("ils scope condition excludes small open-to-resolution moves") {
    MarketSeries s;
    s.market_token = "m";
    s.fills.push_back({0, px(0.97), usd(5), Side::BUY});
    s.resolution_price = kMicro; // |1.0 - 0.97| = 0.03
    s.resolution_ts = 1000;
    CHECK(!micro::ils_in_scope(s, 0.05));
    s.fills[0].price = px(0.90);
    CHECK(micro::ils_in_scope(s, 0.05));
}

TEST_CASE("ils is invariant under the joint p -> 1-p symmetry") {
    stats::Rng rng(71);
    MarketSeries s;
    s.market_token = "m";
    for (int i = 0; i < 200; ++i)
        s.fills.push_back({i * 1800, static_cast<MicroPrice>(rng.uniform_int(kMicro + 1)), usd(5),
                           Side::BUY});
    s.resolution_price = kMicro;
    s.resolution_ts = 200 * 1800;

    MarketSeries mirrored = s;
    for (auto& f : mirrored.fills) f.price = kMicro - f.price;
    mirrored.resolution_price = 0;

    const std::array<std::int64_t, 4> anchors = {3600, 21600, 86400, 259200};
    const auto a = micro::ils_values(s, anchors);
    const auto b = micro::ils_values(mirrored, anchors);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(a[i].has_value() == b[i].has_value());
        if (a[i]) CHECK(*a[i] == doctest::Approx(*b[i]).epsilon(1e-9));
    }
}

TEST_CASE("ils anchors without a prior fill are null") {
    MarketSeries s;
    s.market_token = "m";
    s.fills.push_back({1000, px(0.3), usd(5), Side::BUY});
    s.fills.push_back({2000, px(0.8), usd(5), Side::BUY});
    s.resolution_price = kMicro;
    s.resolution_ts = 3000;
    const auto ils = micro::ils_values(s, {500, 2500, 86400, 259200});
    CHECK(ils[0].has_value());  // t = 2500: last fill at 2000
    CHECK(!ils[1].has_value()); // t = 500: before the first fill
    CHECK(!ils[2].has_value());
}

// ---------------------------------------------------------------------------
// Hawkes
// ---------------------------------------------------------------------------

TEST_CASE("hawkes: homogeneous poisson estimates a near-zero branching ratio") {
    stats::Rng rng(81);
    std::vector<double> times;
    double t = 0;
    while (times.size() < 2000) {
        t += rng.exponential(1.0);
        times.push_back(t);
    }
    const auto fit = micro::hawkes_branching(times, t + 1.0);
    REQUIRE(fit.eta.has_value());
    CHECK(*fit.eta < 0.1);
}

TEST_CASE("hawkes: planted branching ratio 0.5 recovers within 0.05") {
    const double mu = 1.0, alpha = 1.0, beta = 2.0; // eta = 0.5, rate = 2/s
    const auto times = synth::simulate_hawkes(mu, alpha, beta, 2500.0, 83);
    REQUIRE(times.size() > 3000); // ~5000 expected
    const auto fit = micro::hawkes_branching(times, 2500.0);
    REQUIRE(fit.eta.has_value());
    CHECK(std::abs(*fit.eta - 0.5) < 0.05);
}

TEST_CASE("hawkes: alpha = 0 in the simulator estimates eta near zero") {
    const auto times = synth::simulate_hawkes(2.0, 0.0, 1.0, 1500.0, 85);
    const auto fit = micro::hawkes_branching(times, 1500.0);
    REQUIRE(fit.eta.has_value());
    CHECK(*fit.eta < 0.05);
}

TEST_CASE("hawkes: fitted likelihood dominates probe parameters") {
    const auto times = synth::simulate_hawkes(1.0, 0.8, 2.0, 1000.0, 87);
    const auto fit = micro::hawkes_branching(times, 1000.0);
    REQUIRE(fit.converged);
    CHECK(fit.log_likelihood >= micro::hawkes_loglik(times, 1000.0, 1.0, 0.8, 2.0) - 1e-6);
    CHECK(fit.log_likelihood >= micro::hawkes_loglik(times, 1000.0, 2.0, 0.2, 1.0) - 1e-6);
    CHECK(fit.log_likelihood >= micro::hawkes_loglik(times, 1000.0, 0.5, 1.0, 4.0) - 1e-6);
}

TEST_CASE("hawkes: too few events is null") {
    std::vector<double> times = {1, 2, 3};
    CHECK(!micro::hawkes_branching(times, 10.0).eta.has_value());
}

// ---------------------------------------------------------------------------
// Book diagnostics
// ---------------------------------------------------------------------------

TEST_CASE("book diagnostics: constant book has no swing events") {
    MarketSeries s;
    s.market_token = "m";
    for (int i = 0; i < 100; ++i) s.books.push_back({i * 60, px(0.49), px(0.51)});
    const auto d = micro::book_diagnostics(s);
    CHECK(d.swings.empty());
    CHECK(d.mid.size() == 100);
    CHECK(d.mid.front().second == doctest::Approx(0.5));
    CHECK(d.spread.front().second == doctest::Approx(0.02));
}

TEST_CASE("book diagnostics: a 0.12 step produces exactly one swing event") {
    MarketSeries s;
    s.market_token = "m";
    for (int i = 0; i < 50; ++i) s.books.push_back({i * 60, px(0.49), px(0.51)});
    for (int i = 50; i < 100; ++i) s.books.push_back({i * 60, px(0.61), px(0.63)});
    const auto d = micro::book_diagnostics(s, 0.10, 300);
    CHECK(d.swings.size() == 1);
    CHECK(d.swings.front().ts == 50 * 60);
}

TEST_CASE("book swings match a naive sliding-window oracle") {
    stats::Rng rng(91);
    MarketSeries s;
    s.market_token = "m";
    double mid = 0.5;
    for (int i = 0; i < 400; ++i) {
        mid = std::clamp(mid + 0.03 * rng.normal(), 0.05, 0.95);
        s.books.push_back({i * 30, px(mid - 0.01), px(mid + 0.01)});
    }
    const auto d = micro::book_diagnostics(s, 0.10, 300);

    // Oracle: same reset semantics, explicit window rescan.
    std::vector<std::int64_t> expected;
    std::vector<std::pair<std::int64_t, double>> window;
    for (const auto& b : s.books) {
        const double m = (static_cast<double>(b.best_bid) + b.best_ask) / (2.0 * kMicro);
        while (!window.empty() && b.ts - window.front().first > 300)
            window.erase(window.begin());
        window.emplace_back(b.ts, m);
        double lo = m, hi = m;
        for (auto& [ts, v] : window) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > 0.10) {
            expected.push_back(b.ts);
            window.clear();
            window.emplace_back(b.ts, m);
        }
    }
    REQUIRE(d.swings.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(d.swings[i].ts == expected[i]);
}

TEST_CASE("adverse-selection profile stub refuses to pretend") {
    CHECK_THROWS_AS(micro::adverse_selection_profile_not_implemented(), std::logic_error);
}

// ---------------------------------------------------------------------------
// Panel
// ---------------------------------------------------------------------------

TEST_CASE("panel: sci is zero at the cross-market mean and uniform equals the z mean") {
    // Three markets with distinct component values; verify the SCI of each
    // against a hand computation from the public per-market functions.
    std::vector<MarketSeries> markets;
    for (std::uint64_t seed = 101; seed <= 105; ++seed) markets.push_back(random_series(seed, 300));
    for (auto& m : markets) m.market_token = "m" + std::to_string(&m - markets.data());

    const auto panel = micro::compute_panel(markets);
    REQUIRE(panel.rows.size() == markets.size());

    // Hand-compute components at the 60m window.
    struct Comp {
        std::optional<double> pr, ts, oi, vp;
    };
    std::vector<Comp> comps;
    for (const auto& m : markets)
        comps.push_back({micro::persistence_ratio(m, 3600), micro::two_sidedness(m, 3600),
                         micro::order_imbalance(m, 3600), micro::vpin(m, 50)});
    const auto zstat = [&](auto get) {
        std::vector<double> vals;
        for (const auto& c : comps)
            if (get(c)) vals.push_back(*get(c));
        return std::pair<double, double>{stats::mean(vals), stats::sample_std(vals)};
    };
    const auto pr_s = zstat([](const Comp& c) { return c.pr; });
    const auto ts_s = zstat([](const Comp& c) { return c.ts; });
    const auto oi_s = zstat([](const Comp& c) { return c.oi; });
    const auto vp_s = zstat([](const Comp& c) { return c.vp; });

    for (std::size_t i = 0; i < markets.size(); ++i) {
        double sum = 0;
        double wsum = 0;
        const auto add = [&](const std::optional<double>& v, std::pair<double, double> s, double w) {
            if (!v || s.second <= 0) return;
            sum += w * (*v - s.first) / s.second;
            wsum += w;
        };
        add(comps[i].pr, pr_s, 0.25);
        add(comps[i].ts, ts_s, 0.25);
        add(comps[i].oi, oi_s, 0.25);
        add(comps[i].vp, vp_s, 0.25);
        REQUIRE(panel.rows[i].sci[0][0].has_value());
        CHECK(*panel.rows[i].sci[0][0] == doctest::Approx(sum / wsum).epsilon(1e-9));
    }
}

TEST_CASE("panel: kyle winsor band is fitted cross-market and flags outliers") {
    std::vector<MarketSeries> markets;
    // 200 tame impact markets and one extreme outlier.
    for (std::uint64_t i = 0; i < 200; ++i) {
        auto s = synth::simulate_impact_series(0.0005 + 1e-6 * static_cast<double>(i), 60, 300,
                                               0.0005, 200 + i);
        s.market_token = "m" + std::to_string(i);
        markets.push_back(std::move(s));
    }
    auto wild = synth::simulate_impact_series(0.02, 60, 300, 0.0, 777);
    wild.market_token = "zwild";
    markets.push_back(std::move(wild));

    const auto panel = micro::compute_panel(markets);
    CHECK(panel.kyle_winsor.outlier_count >= 1);
    const auto& last = panel.rows.back();
    REQUIRE(last.kyle_lambda_raw.has_value());
    CHECK(last.kyle_outlier);
    CHECK(*last.kyle_lambda_winsorized == doctest::Approx(panel.kyle_winsor.hi));
    CHECK(*last.kyle_lambda_winsorized <= panel.kyle_winsor.hi);
}

TEST_CASE("panel: null metrics stay null, never zero") {
    MarketSeries tiny;
    tiny.market_token = "tiny";
    tiny.fills.push_back({0, px(0.5), usd(3), Side::BUY});
    std::vector<MarketSeries> markets = {tiny, random_series(301, 300)};
    markets[1].market_token = "zbig";
    const auto panel = micro::compute_panel(markets);
    const auto& row = panel.rows.front();
    CHECK(row.market_token == "tiny");
    CHECK(!row.pr_60m.has_value());
    CHECK(!row.kyle_lambda_raw.has_value());
    CHECK(!row.hawkes.has_value());
    CHECK(!row.kurtosis.has_value());
    CHECK(!row.ils[0].has_value());
    CHECK(row.oi_5m.has_value()); // one fill still has an imbalance
}

TEST_CASE("metrics table round-trip preserves values and nulls") {
    std::vector<MarketSeries> markets;
    for (std::uint64_t seed = 401; seed <= 404; ++seed) {
        auto s = random_series(seed, 150);
        s.market_token = "m" + std::to_string(seed);
        markets.push_back(std::move(s));
    }
    markets[0].resolution_price = kMicro;
    markets[0].resolution_ts = markets[0].fills.back().ts + 400000;

    const auto panel = micro::compute_panel(markets);
    const auto path = (std::filesystem::temp_directory_path() / "fillside_metrics.tsv").string();
    micro::write_metrics_table(panel, path);
    const auto back = micro::read_metrics_table(path);
    REQUIRE(back.size() == panel.rows.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        for (std::size_t m = 0; m < micro::kPanelMetrics; ++m) {
            const auto a = panel.rows[i].metric(m);
            const auto b = back[i].metric(m);
            CHECK(a.has_value() == b.has_value());
            if (a) CHECK(*a == doctest::Approx(*b).epsilon(1e-9));
        }
        CHECK(back[i].kyle_outlier == panel.rows[i].kyle_outlier);
        CHECK(back[i].ils_in_scope == panel.rows[i].ils_in_scope);
    }
}

TEST_CASE("bounded metrics respect their ranges on random series") {
    for (std::uint64_t seed = 500; seed < 550; ++seed) {
        const auto s = random_series(seed, 50 + seed % 200);
        if (auto v = micro::order_imbalance(s, 300)) CHECK(std::abs(*v) <= 1.0 + 1e-12);
        if (auto v = micro::two_sidedness(s, 3600)) {
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0 + 1e-12);
        }
        if (auto v = micro::persistence_ratio(s, 3600)) {
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0 + 1e-12);
        }
        if (auto v = micro::vpin(s, 50)) {
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0 + 1e-12);
        }
    }
}
