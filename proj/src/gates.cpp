#include "fillside/gates.hpp"

#include <nlohmann/json.hpp>

namespace fillside::gates {

using nlohmann::json;

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::PASS: return "PASS";
        case Verdict::PARTIAL: return "PARTIAL";
        case Verdict::FAIL: return "FAIL";
    }
    return "FAIL";
}

namespace {
Verdict verdict_from_string(const std::string& s) {
    if (s == "PASS") return Verdict::PASS;
    if (s == "PARTIAL") return Verdict::PARTIAL;
    return Verdict::FAIL;
}
} // namespace

GateReport evaluate_gates(const CorpusCapabilities& caps,
                          std::optional<double> router_notional_fraction) {
    GateReport r;
    r.g_fill = caps.has_fill_attribution ? Verdict::PASS : Verdict::FAIL;
    r.g_quote_life = caps.has_quote_lifecycle ? Verdict::PASS : Verdict::FAIL;
    if (!caps.has_book_snapshots || caps.book_granularity == BookGranularity::NONE) {
        r.g_book = Verdict::FAIL;
    } else {
        r.g_book = caps.book_granularity == BookGranularity::ADDRESS_LEVEL ? Verdict::PASS
                                                                           : Verdict::PARTIAL;
    }

    if (r.g_fill == Verdict::PASS)
        r.enabled_features = {"f2", "f3", "f5", "f6", "f7", "f9"};
    if (r.g_quote_life == Verdict::PASS) {
        r.enabled_features.insert({"f1", "f4", "f8"});
    } else {
        r.withdrawn_analyses.push_back({"spoof_non_fill", "quote lifecycle not attributable"});
        r.withdrawn_analyses.push_back({"coordinated_withdrawal", "quote lifecycle not attributable"});
        r.withdrawn_analyses.push_back({"posted_spread", "quote lifecycle not attributable"});
    }
    if (r.g_fill == Verdict::FAIL) {
        r.withdrawn_analyses.push_back({"fill_side_features", "no fill attribution"});
        r.withdrawn_analyses.push_back({"wash_candidates", "no fill attribution"});
        r.withdrawn_analyses.push_back({"bilateral", "no fill attribution"});
    }
    if (r.g_book == Verdict::FAIL)
        r.withdrawn_analyses.push_back({"book_diagnostics", "no book snapshots"});
    else if (r.g_book == Verdict::PARTIAL)
        r.withdrawn_analyses.push_back({"address_book_diagnostics", "book snapshots at market level only"});

    r.router_notional_fraction = router_notional_fraction;
    r.addr_downgrade =
        router_notional_fraction.has_value() && *router_notional_fraction > kAddrDowngradeThreshold;
    if (r.addr_downgrade)
        r.withdrawn_analyses.push_back(
            {"trader_level_clustering", "router-contract notional above downgrade threshold"});
    return r;
}

std::string GateReport::to_json() const {
    json j;
    j["g_fill"] = to_string(g_fill);
    j["g_quote_life"] = to_string(g_quote_life);
    j["g_book"] = to_string(g_book);
    j["enabled_features"] = enabled_features;
    json withdrawn = json::array();
    for (const auto& w : withdrawn_analyses) withdrawn.push_back({{"id", w.id}, {"reason", w.reason}});
    j["withdrawn_analyses"] = withdrawn;
    if (router_notional_fraction) j["router_notional_fraction"] = *router_notional_fraction;
    j["addr_downgrade"] = addr_downgrade;
    return j.dump(2);
}

GateReport GateReport::from_json(const std::string& text) {
    json j = json::parse(text);
    GateReport r;
    r.g_fill = verdict_from_string(j.value("g_fill", "FAIL"));
    r.g_quote_life = verdict_from_string(j.value("g_quote_life", "FAIL"));
    r.g_book = verdict_from_string(j.value("g_book", "FAIL"));
    for (const auto& f : j.value("enabled_features", json::array()))
        r.enabled_features.insert(f.get<std::string>());
    for (const auto& w : j.value("withdrawn_analyses", json::array()))
        r.withdrawn_analyses.push_back({w.value("id", ""), w.value("reason", "")});
    if (j.contains("router_notional_fraction"))
        r.router_notional_fraction = j["router_notional_fraction"].get<double>();
    r.addr_downgrade = j.value("addr_downgrade", false);
    return r;
}

} // namespace fillside::gates
