#pragma once

#include "fillside/types.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fillside::gates {

enum class Verdict : std::uint8_t { PASS, PARTIAL, FAIL };
const char* to_string(Verdict v);

struct WithdrawnAnalysis {
    std::string id;
    std::string reason;
};

struct GateReport {
    Verdict g_fill = Verdict::FAIL;
    Verdict g_quote_life = Verdict::FAIL;
    Verdict g_book = Verdict::FAIL;
    std::set<std::string> enabled_features; // feature ids "f1".."f9"
    std::vector<WithdrawnAnalysis> withdrawn_analyses;
    // Informational: fraction of notional routed through unresolvable
    // contracts, when contract-type annotations were supplied. Above the
    // downgrade threshold clustering is entity-level, not trader-level.
    std::optional<double> router_notional_fraction;
    bool addr_downgrade = false;

    bool feature_enabled(const std::string& id) const {
        return enabled_features.count(id) > 0;
    }
    std::string to_json() const;
    static GateReport from_json(const std::string& text);
};

inline constexpr double kAddrDowngradeThreshold = 0.20;

// Verdicts are a pure function of declared capabilities; the gates are
// architectural facts about the venue, not sample statistics.
GateReport evaluate_gates(const CorpusCapabilities& caps,
                          std::optional<double> router_notional_fraction = std::nullopt);

} // namespace fillside::gates
