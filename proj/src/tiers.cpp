#include "fillside/tiers.hpp"

#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace fillside::tiers {

const char* to_string(Tier t) {
    switch (t) {
        case Tier::HFO: return "HFO";
        case Tier::HBO: return "HBO";
        case Tier::POWER: return "POWER";
        case Tier::ACTIVE_RETAIL: return "ACTIVE_RETAIL";
        case Tier::EPISODIC_RETAIL: return "EPISODIC_RETAIL";
    }
    return "EPISODIC_RETAIL";
}

namespace {

// f2 and f9 sit at fixed indices in the six-feature array.
constexpr std::size_t kF2 = 0;
constexpr std::size_t kF9 = 5;

TierCutoffs fit_cutoffs(const std::vector<features::FeatureRow>& rows, const TierThresholds& t) {
    if (rows.empty()) throw std::invalid_argument("classify_tiers on empty population");
    std::vector<double> f2(rows.size()), f9(rows.size()), notional(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        f2[i] = rows[i].raw[kF2];
        f9[i] = rows[i].raw[kF9];
        notional[i] = static_cast<double>(rows[i].total_notional);
    }
    TierCutoffs c;
    c.f2_p_hfo = stats::quantile_nearest_rank(f2, t.hfo_f2_percentile);
    c.f9_p_hfo = stats::quantile_nearest_rank(f9, t.hfo_f9_percentile);
    c.f9_p_hbo = stats::quantile_nearest_rank(f9, t.hbo_f9_percentile);
    c.f2_p_power = stats::quantile_nearest_rank(f2, t.power_f2_percentile);
    c.notional_p_power = stats::quantile_nearest_rank(notional, t.power_notional_percentile);
    return c;
}

TierLabel label_one(const features::FeatureRow& r, const TierThresholds& t, const TierCutoffs& c) {
    TierLabel out;
    out.whale = r.total_notional >= t.whale_notional ||
                r.max_market_share >= t.whale_single_market_share;
    const double f2 = r.raw[kF2];
    const double f9 = r.raw[kF9];
    const double notional = static_cast<double>(r.total_notional);
    if (f2 >= c.f2_p_hfo && f9 >= c.f9_p_hfo)
        out.tier = Tier::HFO;
    else if (f9 >= c.f9_p_hbo)
        out.tier = Tier::HBO;
    else if (f2 >= c.f2_p_power && notional >= c.notional_p_power)
        out.tier = Tier::POWER;
    else if (r.total_notional < t.episodic_cap)
        out.tier = Tier::EPISODIC_RETAIL;
    else
        out.tier = Tier::ACTIVE_RETAIL;
    return out;
}

} // namespace

TierResult classify_tiers(const std::vector<features::FeatureRow>& rows,
                          const TierThresholds& thresholds) {
    TierResult out;
    out.cutoffs = fit_cutoffs(rows, thresholds);
    for (const auto& r : rows) out.labels[r.address] = label_one(r, thresholds, out.cutoffs);
    return out;
}

TierCounts tier_counts(const std::vector<features::FeatureRow>& rows,
                       const std::map<std::string, TierLabel>& labels) {
    TierCounts c;
    for (Tier t : kAllTiers) {
        c.population[t] = 0;
        c.notional[t] = 0;
    }
    for (const auto& r : rows) {
        auto it = labels.find(r.address);
        if (it == labels.end()) continue;
        ++c.population[it->second.tier];
        c.notional[it->second.tier] += r.total_notional;
        if (it->second.whale) ++c.whales;
    }
    return c;
}

std::vector<SensitivityCell> tier_sensitivity(const std::vector<features::FeatureRow>& rows,
                                              const std::vector<double>& f2_percentiles,
                                              const std::vector<double>& f9_percentiles,
                                              const TierThresholds& base) {
    if (f2_percentiles.empty() || f9_percentiles.empty())
        throw std::invalid_argument("tier_sensitivity needs non-empty grids");
    std::vector<SensitivityCell> grid;
    grid.reserve(f2_percentiles.size() * f9_percentiles.size());
    for (double p2 : f2_percentiles) {
        for (double p9 : f9_percentiles) {
            // Rows vary the HFO intensity cutoff, columns the HBO breadth
            // cutoff; POWER and the HFO breadth gate stay at their base
            // percentiles, matching the published sensitivity table.
            TierThresholds t = base;
            t.hfo_f2_percentile = p2;
            t.hbo_f9_percentile = p9;
            SensitivityCell cell;
            cell.f2_percentile = p2;
            cell.f9_percentile = p9;
            const TierResult res = classify_tiers(rows, t);
            cell.counts = tier_counts(rows, res.labels);
            grid.push_back(std::move(cell));
        }
    }
    return grid;
}

Crosstab crosstab(const std::map<std::string, std::string>& rows,
                  const std::map<std::string, std::string>& cols) {
    Crosstab t;
    std::set<std::string> row_set, col_set;
    for (const auto& [addr, row_label] : rows) {
        auto it = cols.find(addr);
        if (it == cols.end()) continue;
        ++t.cells[{row_label, it->second}];
        ++t.row_totals[row_label];
        ++t.col_totals[it->second];
        ++t.total;
        row_set.insert(row_label);
        col_set.insert(it->second);
    }
    t.row_labels.assign(row_set.begin(), row_set.end());
    t.col_labels.assign(col_set.begin(), col_set.end());
    return t;
}

ConcentrationStats concentration(std::vector<double> values,
                                 const std::vector<double>& top_fractions) {
    if (values.empty()) throw std::invalid_argument("concentration on empty population");
    for (double v : values)
        if (v < 0) throw std::invalid_argument("concentration needs non-negative values");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double total = 0;
    for (double v : values) total += v;
    if (total <= 0) throw std::invalid_argument("concentration needs positive total");

    ConcentrationStats out;
    out.lorenz.reserve(values.size() + 1);
    out.lorenz.emplace_back(0.0, 0.0);
    double cum = 0, area = 0, prev_share = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        cum += values[i];
        const double share = cum / total;
        out.lorenz.emplace_back(static_cast<double>(i + 1) / n, share);
        area += (prev_share + share) / (2.0 * n);
        prev_share = share;
    }
    out.gini = 1.0 - 2.0 * area;

    for (double f : top_fractions) {
        const auto k = static_cast<std::size_t>(std::llround(f * n));
        double top = 0;
        for (std::size_t i = values.size() - std::min(k, values.size()); i < values.size(); ++i)
            top += values[i];
        out.top_shares[f] = top / total;
    }
    return out;
}

std::map<std::string, GroupShare> group_shares(const std::vector<features::FeatureRow>& rows,
                                               const std::map<std::string, std::string>& labels) {
    std::map<std::string, GroupShare> out;
    Usdc total = 0;
    for (const auto& r : rows) {
        auto it = labels.find(r.address);
        const std::string label = it == labels.end() ? "UNKNOWN" : it->second;
        auto& g = out[label];
        ++g.population;
        g.notional += r.total_notional;
        total += r.total_notional;
    }
    if (total > 0)
        for (auto& [label, g] : out)
            g.notional_share = static_cast<double>(g.notional) / static_cast<double>(total);
    return out;
}

} // namespace fillside::tiers
