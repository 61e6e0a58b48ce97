#pragma once

#include "fillside/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fillside::features {

// Per-address streaming aggregate. Counts and volumes are exact integers so
// partition-merge is associative bit-for-bit.
struct AddressAggregate {
    std::string address;
    std::uint64_t n_fills = 0;
    Usdc buy_volume = 0;  // V_B
    Usdc sell_volume = 0; // V_S
    Usdc total_notional = 0;
    std::map<std::string, std::uint64_t> per_market_fill_counts;
    std::map<std::string, Usdc> per_market_notional;
    std::array<std::uint64_t, 24> hourly_histogram{}; // hour-of-day bins
    std::set<std::int64_t> active_hour_set;           // distinct UTC wall-clock hours
    std::int64_t first_ts = 0;
    std::int64_t last_ts = 0;

    std::uint64_t active_hours() const { return active_hour_set.size(); }
    std::uint64_t n_markets() const { return per_market_fill_counts.size(); }
    void add(const FillRecord& fill, Side side_for_this_party);
    void merge(const AddressAggregate& other);
};

using AggregateMap = std::map<std::string, AddressAggregate>;

// Every fill contributes to BOTH counterparties, the maker on the side
// opposite the recorded taker side.
void apply_fill(AggregateMap& aggregates, const FillRecord& fill);
AggregateMap aggregate(const std::vector<FillRecord>& records);
AggregateMap merge(AggregateMap a, const AggregateMap& b);

struct FilterResult {
    AggregateMap aggregates;
    std::uint64_t survivors = 0;
    std::uint64_t removed = 0;
};
FilterResult activity_filter(AggregateMap aggregates, std::uint64_t min_fills);

// The six fill-side features. Index order is fixed: f2, f3, f5, f6, f7, f9.
inline constexpr std::size_t kNumFeatures = 6;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {"f2", "f3", "f5",
                                                                        "f6", "f7", "f9"};

struct FeatureVector {
    double f2 = 0; // log trade intensity, ln(1 + fills per active hour)
    double f3 = 0; // log10 mean fill notional (USDC)
    double f5 = 0; // directional ratio in [-1, 1]
    double f6 = 0; // market HHI in (0, 1]
    double f7 = 0; // intraday entropy in [0, ln 24]
    double f9 = 0; // log market breadth, ln(1 + n_markets)
    bool degenerate_notional = false;

    std::array<double, kNumFeatures> as_array() const { return {f2, f3, f5, f6, f7, f9}; }
};

struct FeatureOptions {
    bool notional_weighted_hhi = false; // f6 weighted by notional instead of fill count
};

FeatureVector compute_features(const AddressAggregate& agg, const FeatureOptions& opts = {});

// --------------------------------------------------------------------------
// Preprocessing: winsorize at p99.5 then z-score (primary), or median/IQR
// robust scaling (sensitivity mode).
// --------------------------------------------------------------------------

struct DegenerateFeature : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ScalerMode : std::uint8_t { WINSOR_Z, ROBUST };

struct ScalerState {
    ScalerMode mode = ScalerMode::WINSOR_Z;
    double winsor_quantile = 0.995;
    std::uint64_t sample_size = 0;
    std::array<double, kNumFeatures> cap{};    // p99.5 value (WINSOR_Z only)
    std::array<double, kNumFeatures> center{}; // post-clip mean, or median
    std::array<double, kNumFeatures> scale{};  // post-clip std, or IQR

    std::string to_json() const;
    static ScalerState from_json(const std::string& text);
};

ScalerState fit_scaler(const std::vector<std::array<double, kNumFeatures>>& rows,
                       ScalerMode mode = ScalerMode::WINSOR_Z, double winsor_quantile = 0.995);
std::array<double, kNumFeatures> apply_scaler(const ScalerState& state,
                                              const std::array<double, kNumFeatures>& raw);

// --------------------------------------------------------------------------
// Feature table (one address per row, raw + scaled columns)
// --------------------------------------------------------------------------

struct FeatureRow {
    std::string address;
    std::uint64_t n_fills = 0;
    std::uint64_t active_hours = 0;
    std::uint64_t n_markets = 0;
    Usdc buy_volume = 0;
    Usdc sell_volume = 0;
    Usdc total_notional = 0;
    double max_market_share = 0; // address share of its most-dominated market
    std::array<double, kNumFeatures> raw{};
    std::array<double, kNumFeatures> scaled{};
};

void write_feature_table(const std::vector<FeatureRow>& rows, const std::string& path);
std::vector<FeatureRow> read_feature_table(const std::string& path);

// Builds rows in address order: features, scaling, and the per-market share
// column (vs market totals over the whole corpus).
std::vector<FeatureRow> build_feature_rows(const AggregateMap& aggregates,
                                           const std::map<std::string, Usdc>& market_totals,
                                           const ScalerState& scaler,
                                           const FeatureOptions& opts = {});

std::map<std::string, Usdc> market_notional_totals(const std::vector<FillRecord>& records);

} // namespace fillside::features
