#pragma once

#include "fillside/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fillside::micro {

struct SeriesFill {
    std::int64_t ts = 0;
    MicroPrice price = 0;
    Usdc notional = 0;
    Side taker_side = Side::BUY;
};

struct BookSnap {
    std::int64_t ts = 0;
    MicroPrice best_bid = 0;
    MicroPrice best_ask = 0;
};

struct MarketSeries {
    std::string market_token;
    std::vector<SeriesFill> fills; // ts ascending
    std::vector<BookSnap> books;   // ts ascending, may be empty
    std::optional<MicroPrice> resolution_price; // 0 or 1'000'000
    std::optional<std::int64_t> resolution_ts;

    double open_price() const; // first fill price in [0,1]
    std::int64_t start_ts() const { return fills.empty() ? 0 : fills.front().ts; }
};

std::vector<MarketSeries> build_series(const std::vector<FillRecord>& records);
void attach_books(std::vector<MarketSeries>& series, const std::string& books_tsv_path);
void attach_resolutions(std::vector<MarketSeries>& series, const std::string& resolutions_tsv_path);

// --------------------------------------------------------------------------
// Single-market metrics. Windowed metrics use tumbling windows aligned to
// the market's first fill.
// --------------------------------------------------------------------------

// Volume-weighted mean |imbalance| over windows, signed by the net flow.
std::optional<double> order_imbalance(const MarketSeries& series, std::int64_t window_seconds);
// 1 - |V_B - V_S| / (V_B + V_S); window_seconds = 0 means the full series.
std::optional<double> two_sidedness(const MarketSeries& series, std::int64_t window_seconds);
// |sum r| / sum |r| on logit-price returns, absolute-move weighted across
// windows; prices clipped to [delta, 1-delta] before the logit.
inline constexpr double kLogitClip = 1e-4;
std::optional<double> persistence_ratio(const MarketSeries& series, std::int64_t window_seconds);
// Mean |V_B - V_S| / V over equal-volume buckets (sides are observed, so no
// bulk-volume classification); the last partial bucket drops when under half
// size.
std::optional<double> vpin(const MarketSeries& series, std::size_t n_buckets = 50);
// Net signed flow V_B - V_S in USDC (operationalized order-flow imbalance).
std::optional<double> order_flow_imbalance(const MarketSeries& series);

struct KyleLambda {
    std::optional<double> raw; // null when under-determined (< 3 usable bins)
    std::size_t n_bins = 0;
};
// OLS slope of per-bin price change on per-bin signed USDC volume over fixed
// time bins; bins without trades are skipped.
KyleLambda kyle_lambda(const MarketSeries& series, std::int64_t bin_seconds = 300);

struct WinsorSpec {
    double lower_q = 0.01;
    double upper_q = 0.99;
    double lo = 0;
    double hi = 0;
    std::uint64_t outlier_count = 0;
};
WinsorSpec fit_winsor(const std::vector<double>& values, double lower_q = 0.01,
                      double upper_q = 0.99);
// Clip to [lo, hi]; idempotent; counts values strictly outside the band.
std::pair<std::vector<double>, std::uint64_t> winsorize(const std::vector<double>& values,
                                                        const WinsorSpec& spec);

// Sample excess kurtosis of fill notionals; null when sizes are constant.
std::optional<double> trade_size_kurtosis(const MarketSeries& series);

struct HawkesFit {
    std::optional<double> eta; // branching ratio alpha/beta in [0, 1)
    double mu = 0, alpha = 0, beta = 0;
    double log_likelihood = 0;
    bool converged = false;
};
// Exponential-kernel self-exciting fit by multi-start Nelder-Mead on
// log-parameters; deterministic given seed.
HawkesFit hawkes_branching(const std::vector<double>& times, double horizon,
                           std::uint64_t seed = 17, std::size_t min_events = 50);
HawkesFit hawkes_branching(const MarketSeries& series, std::uint64_t seed = 17,
                           std::size_t min_events = 50);
double hawkes_loglik(const std::vector<double>& times, double horizon, double mu, double alpha,
                     double beta);

struct SwingEvent {
    std::int64_t ts = 0;
    double mid_before = 0;
    double mid_after = 0;
};
struct BookDiagnostics {
    std::vector<std::pair<std::int64_t, double>> mid;    // (ts, mid price)
    std::vector<std::pair<std::int64_t, double>> spread; // (ts, ask - bid)
    std::vector<SwingEvent> swings;
};
// Swing event: mid range within the rolling window exceeds the threshold;
// the scan restarts after each event so one step produces one event.
BookDiagnostics book_diagnostics(const MarketSeries& series, double swing_threshold = 0.10,
                                 std::int64_t window_seconds = 300);

// Per-address post-fill adverse-selection distributions are deferred;
// calling this is an explicit contract violation.
[[noreturn]] void adverse_selection_profile_not_implemented();

// --------------------------------------------------------------------------
// Panel
// --------------------------------------------------------------------------

enum class SciScheme : std::uint8_t { UNIFORM, TOXICITY, PERSISTENCE };
const char* to_string(SciScheme s);
std::array<double, 4> sci_weights(SciScheme s); // over {PR, TS, OI, VPIN}

inline constexpr std::size_t kPanelMetrics = 22;
// Fixed metric order of the bilateral panel.
const std::array<std::string, kPanelMetrics>& panel_metric_names();

struct MarketMetricsRow {
    std::string market_token;
    std::uint64_t fill_count = 0;
    Usdc notional_total = 0;

    std::optional<double> oi_5m, oi_15m, oi_1h;
    std::optional<double> ofi;
    std::optional<double> ts_60m, ts_full;
    std::optional<double> pr_60m, pr_240m;
    std::optional<double> vpin_50;
    std::optional<double> kyle_lambda_raw, kyle_lambda_winsorized;
    bool kyle_outlier = false;
    // sci[scheme][window], windows {60m, 240m}
    std::array<std::array<std::optional<double>, 2>, 3> sci{};
    std::array<std::optional<double>, 4> ils{};
    bool ils_in_scope = false;
    std::optional<double> kurtosis;
    std::optional<double> hawkes;

    std::optional<double> metric(std::size_t panel_index) const;
};

struct PanelConfig {
    std::int64_t kyle_bin_seconds = 300;
    std::size_t vpin_buckets = 50;
    double winsor_lower_q = 0.01;
    double winsor_upper_q = 0.99;
    std::array<std::int64_t, 4> ils_anchors = {3600, 21600, 86400, 259200}; // 1h, 6h, 24h, 72h
    double ils_scope_threshold = 0.05;
    double swing_threshold = 0.10;
    std::int64_t swing_window_seconds = 300;
    std::size_t hawkes_min_events = 50;
    std::uint64_t hawkes_seed = 17;
};

struct PanelResult {
    std::vector<MarketMetricsRow> rows; // market_token ascending
    WinsorSpec kyle_winsor;
};

// Two-phase computation: parallel per-market metrics, sequential cross-market
// fits (Kyle winsor band, SCI component z-scores), parallel re-application.
// Output is independent of scheduling.
PanelResult compute_panel(const std::vector<MarketSeries>& series, const PanelConfig& config = {});

void write_metrics_table(const PanelResult& panel, const std::string& path);
std::vector<MarketMetricsRow> read_metrics_table(const std::string& path);

std::array<std::optional<double>, 4> ils_values(const MarketSeries& series,
                                                const std::array<std::int64_t, 4>& anchors);
bool ils_in_scope(const MarketSeries& series, double scope_threshold = 0.05);

} // namespace fillside::micro
