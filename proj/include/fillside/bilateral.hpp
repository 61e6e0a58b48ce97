#pragma once

#include "fillside/micropanel.hpp"
#include "fillside/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fillside::bilateral {

// --------------------------------------------------------------------------
// Per-market group volume shares
// --------------------------------------------------------------------------

struct ShareRow {
    std::string market_token;
    std::string group;
    double volume_share = 0; // within the market, shares over groups sum to 1
};

struct ShareTable {
    std::vector<ShareRow> rows; // sorted by (market, group)
    std::vector<std::string> groups;
};

// Both counterparties of a fill contribute its notional once each; addresses
// without a label fall into "UNKNOWN".
ShareTable archetype_shares(const std::vector<FillRecord>& fills,
                            const std::map<std::string, std::string>& labels);

// --------------------------------------------------------------------------
// Statistics
// --------------------------------------------------------------------------

// Pearson correlation of average ranks (ties -> mean ranks). n >= 3.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
// Two-sided t-approximation p-value.
double spearman_pvalue(double rho, std::size_t n);

struct BhResult {
    std::vector<double> q_values;
    std::vector<bool> significant;
};
// Standard step-up: q_i = min_{j>=i} m p_(j) / j, reject at q <= alpha.
BhResult bh_fdr(const std::vector<double>& p_values, double alpha = 0.05);

struct BcaInterval {
    double lo = 0;
    double hi = 0;
    bool degenerate = false; // all bootstrap statistics identical
};
// Bias-corrected accelerated bootstrap for Spearman's rho over paired
// samples, case resampling; deterministic given seed.
BcaInterval bca_ci(const std::vector<double>& x, const std::vector<double>& y,
                   std::size_t iterations = 2000, double level = 0.95, std::uint64_t seed = 1);

struct MannWhitneyResult {
    double u = 0;       // U statistic of sample a
    double p_value = 1; // two-sided, normal approximation with tie correction
};
MannWhitneyResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b);

// --------------------------------------------------------------------------
// The bilateral run
// --------------------------------------------------------------------------

struct BilateralResult {
    std::string group;
    std::string metric;
    std::size_t n = 0; // markets with nonzero share and non-null metric
    double rho = 0;
    double p_value = 1;
    double q_value = 1;
    bool significant = false;
    double ci_low = 0;
    double ci_high = 0;
    bool ci_degenerate = false;
    bool skipped = false; // n < 3: excluded from the BH family
};

struct BilateralConfig {
    double alpha = 0.05;
    std::size_t bootstrap_iterations = 2000;
    double ci_level = 0.95;
    std::uint64_t seed = 1;
};

// One result per (group, metric); p-values pooled across all tests for a
// single BH pass. Bootstrap seeds derive per pair from the master seed, so
// the output is parallelism-invariant.
std::vector<BilateralResult> run_bilateral(const ShareTable& shares,
                                           const std::vector<micro::MarketMetricsRow>& metrics,
                                           const BilateralConfig& config = {});

void write_bilateral_table(const std::vector<BilateralResult>& results, const std::string& path);
std::string bilateral_summary_json(const std::vector<BilateralResult>& results,
                                   const BilateralConfig& config);

} // namespace fillside::bilateral
