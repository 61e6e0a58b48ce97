#pragma once

#include "fillside/features.hpp"
#include "fillside/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fillside::tiers {

enum class Tier : std::uint8_t { HFO, HBO, POWER, ACTIVE_RETAIL, EPISODIC_RETAIL };
const char* to_string(Tier t);
inline constexpr std::array<Tier, 5> kAllTiers = {Tier::HFO, Tier::HBO, Tier::POWER,
                                                  Tier::ACTIVE_RETAIL, Tier::EPISODIC_RETAIL};

struct TierThresholds {
    Usdc whale_notional = 1'000'000ll * kMicro;       // total notional >= $1M
    double whale_single_market_share = 0.005;         // or >= 0.5% of one market
    double hfo_f2_percentile = 0.95;
    double hfo_f9_percentile = 0.75;
    double hbo_f9_percentile = 0.95;
    double power_f2_percentile = 0.75;
    double power_notional_percentile = 0.75;
    Usdc episodic_cap = 10'000ll * kMicro;            // total notional < $10K
};

struct TierLabel {
    Tier tier = Tier::EPISODIC_RETAIL;
    bool whale = false; // orthogonal overlay, never alters the tier
};

// Fitted percentile cutoffs, exposed for reporting.
struct TierCutoffs {
    double f2_p_hfo = 0;
    double f9_p_hfo = 0;
    double f9_p_hbo = 0;
    double f2_p_power = 0;
    double notional_p_power = 0; // USDC
};

struct TierResult {
    std::map<std::string, TierLabel> labels;
    TierCutoffs cutoffs;
};

// Percentiles are nearest-rank (type-1) on the supplied population, which
// must already be post-exclusion and post-activity-filter. Precedence:
// HFO > HBO > POWER > EPISODIC > ACTIVE residual; boundary comparisons are
// inclusive (>= cutoff).
TierResult classify_tiers(const std::vector<features::FeatureRow>& rows,
                          const TierThresholds& thresholds = {});

struct TierCounts {
    std::map<Tier, std::uint64_t> population;
    std::map<Tier, Usdc> notional;
    std::uint64_t whales = 0;
};
TierCounts tier_counts(const std::vector<features::FeatureRow>& rows,
                       const std::map<std::string, TierLabel>& labels);

// Population grid across f2 x f9 threshold percentiles; whale and episodic
// counts are threshold-independent by construction.
struct SensitivityCell {
    double f2_percentile = 0;
    double f9_percentile = 0;
    TierCounts counts;
};
std::vector<SensitivityCell> tier_sensitivity(const std::vector<features::FeatureRow>& rows,
                                              const std::vector<double>& f2_percentiles,
                                              const std::vector<double>& f9_percentiles,
                                              const TierThresholds& base = {});

// --------------------------------------------------------------------------
// Cross-tabulation and concentration
// --------------------------------------------------------------------------

struct Crosstab {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::map<std::pair<std::string, std::string>, std::uint64_t> cells;
    std::map<std::string, std::uint64_t> row_totals;
    std::map<std::string, std::uint64_t> col_totals;
    std::uint64_t total = 0;
};
// Contingency table over addresses present in both labelings.
Crosstab crosstab(const std::map<std::string, std::string>& rows,
                  const std::map<std::string, std::string>& cols);

struct ConcentrationStats {
    // Lorenz curve points (population fraction, cumulative notional share),
    // ascending, endpoints (0,0) and (1,1).
    std::vector<std::pair<double, double>> lorenz;
    double gini = 0;
    // share of total held by the top `fraction` of holders
    std::map<double, double> top_shares;
};
ConcentrationStats concentration(std::vector<double> values,
                                 const std::vector<double>& top_fractions = {});

// Per-group population and notional shares for the aggregate bundle.
struct GroupShare {
    std::uint64_t population = 0;
    Usdc notional = 0;
    double notional_share = 0;
};
std::map<std::string, GroupShare> group_shares(const std::vector<features::FeatureRow>& rows,
                                               const std::map<std::string, std::string>& labels);

} // namespace fillside::tiers
