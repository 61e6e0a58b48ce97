#pragma once

#include "fillside/features.hpp"
#include "fillside/micropanel.hpp"
#include "fillside/types.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fillside::patterns {

// --------------------------------------------------------------------------
// Wash-volume candidates (upper bound, never "wash trades")
// --------------------------------------------------------------------------

struct WashCandidate {
    std::string address;
    Usdc gross_volume = 0;
    double net_ratio = 0; // |V_B - V_S| / (V_B + V_S)
    std::uint64_t intra_window_pairs = 0;
};

struct WashConfig {
    Usdc gross_min = 1'000ll * kMicro;
    double net_ratio_max = 0.01;
    std::int64_t delta_wash_seconds = 60;
};

std::vector<WashCandidate> detect_wash(const features::AggregateMap& aggregates,
                                       const std::vector<FillRecord>& fills,
                                       const WashConfig& config = {});

// --------------------------------------------------------------------------
// Counterparty co-occurrence graph
// --------------------------------------------------------------------------

struct EdgeStats {
    std::uint64_t fill_count = 0;
    std::uint64_t shared_markets = 0;
};

struct CoOccurrenceGraph {
    // Undirected: keys are (min address, max address); no self-loops.
    std::map<std::pair<std::string, std::string>, EdgeStats> edges;
    std::set<std::string> nodes;
};

CoOccurrenceGraph co_occurrence(const std::vector<FillRecord>& fills);

// Union-find components over edges with fill_count >= min_edge_weight,
// sorted by size descending then lexicographic first member.
std::vector<std::vector<std::string>> connected_components(const CoOccurrenceGraph& graph,
                                                           std::uint64_t min_edge_weight = 1);

// --------------------------------------------------------------------------
// Cross-market pairs
// --------------------------------------------------------------------------

enum class ArbSignRule : std::uint8_t {
    OPPOSITE_SIDES, // long one leg, short the other (default)
    ANY_SIDES,
};

struct PairEvent {
    std::string address;
    std::string group;
    std::string market_a;
    std::string market_b;
    std::int64_t ts_a = 0;
    std::int64_t ts_b = 0;
};

// related_map: group id -> member market tokens (>= 2 members each).
std::vector<PairEvent> cross_market_pairs(const std::vector<FillRecord>& fills,
                                          const std::map<std::string, std::vector<std::string>>& related_map,
                                          std::int64_t delta_arb_seconds = 60,
                                          ArbSignRule rule = ArbSignRule::OPPOSITE_SIDES);

// --------------------------------------------------------------------------
// negRisk group-sum deviation
// --------------------------------------------------------------------------

struct DeviationSample {
    std::int64_t ts = 0;
    double deviation = 0; // sum of member prices - 1
};

struct DeviationEpisode {
    std::int64_t crossing_ts = 0;
    std::int64_t recovery_ts = 0; // 0 while still above threshold at end
    double peak = 0;
    std::int64_t correction_seconds() const { return recovery_ts - crossing_ts; }
};

struct NegRiskSeries {
    std::string group;
    std::vector<DeviationSample> samples; // on the union of member price-change times
    std::vector<DeviationEpisode> episodes;
};

// Member prices are last-observation-carried-forward; the series starts once
// every member has traded at least once.
NegRiskSeries negrisk_deviation(const std::string& group_id,
                                const std::vector<std::string>& members,
                                const std::vector<FillRecord>& fills, double threshold = 0.02);

// --------------------------------------------------------------------------
// Run-level book swing report (per-market scan delegated to micropanel)
// --------------------------------------------------------------------------

struct SwingReport {
    std::map<std::string, std::vector<micro::SwingEvent>> by_market;
    std::uint64_t markets_with_swings = 0;
    std::uint64_t total_events = 0;
};

SwingReport book_swing_scan(const std::vector<micro::MarketSeries>& series,
                            double swing_threshold = 0.10, std::int64_t window_seconds = 300);

} // namespace fillside::patterns
