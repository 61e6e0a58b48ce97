#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fillside/gates.hpp"

using namespace fillside;
using gates::Verdict;

TEST_CASE("polymarket-like capabilities: fill pass, quote-life fail, book partial") {
    CorpusCapabilities caps{true, false, true, BookGranularity::MARKET_LEVEL};
    const auto r = gates::evaluate_gates(caps);
    CHECK(r.g_fill == Verdict::PASS);
    CHECK(r.g_quote_life == Verdict::FAIL);
    CHECK(r.g_book == Verdict::PARTIAL);
    CHECK(r.enabled_features == std::set<std::string>{"f2", "f3", "f5", "f6", "f7", "f9"});
    bool spoof_withdrawn = false;
    for (const auto& w : r.withdrawn_analyses)
        if (w.id == "spoof_non_fill") spoof_withdrawn = true;
    CHECK(spoof_withdrawn);
}

TEST_CASE("fully capable venue enables all nine features") {
    CorpusCapabilities caps{true, true, true, BookGranularity::ADDRESS_LEVEL};
    const auto r = gates::evaluate_gates(caps);
    CHECK(r.g_fill == Verdict::PASS);
    CHECK(r.g_quote_life == Verdict::PASS);
    CHECK(r.g_book == Verdict::PASS);
    CHECK(r.enabled_features.size() == 9);
    CHECK(r.feature_enabled("f1"));
    CHECK(r.feature_enabled("f8"));
}

TEST_CASE("empty capability fails everything") {
    CorpusCapabilities caps{false, false, false, BookGranularity::NONE};
    const auto r = gates::evaluate_gates(caps);
    CHECK(r.g_fill == Verdict::FAIL);
    CHECK(r.g_quote_life == Verdict::FAIL);
    CHECK(r.g_book == Verdict::FAIL);
    CHECK(r.enabled_features.empty());
}

TEST_CASE("gate report is a pure function of capabilities") {
    CorpusCapabilities caps{true, false, false, BookGranularity::NONE};
    const auto a = gates::evaluate_gates(caps);
    const auto b = gates::evaluate_gates(caps);
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("quote-life fail forbids f1/f4/f8 and withdraws the three analyses") {
    for (bool book : {false, true}) {
        CorpusCapabilities caps{true, false, book,
                                book ? BookGranularity::MARKET_LEVEL : BookGranularity::NONE};
        const auto r = gates::evaluate_gates(caps);
        CHECK(!r.feature_enabled("f1"));
        CHECK(!r.feature_enabled("f4"));
        CHECK(!r.feature_enabled("f8"));
        std::set<std::string> ids;
        for (const auto& w : r.withdrawn_analyses) ids.insert(w.id);
        CHECK(ids.count("spoof_non_fill"));
        CHECK(ids.count("coordinated_withdrawal"));
        CHECK(ids.count("posted_spread"));
    }
}

TEST_CASE("router fraction above threshold downgrades address-level claims") {
    CorpusCapabilities caps{true, false, false, BookGranularity::NONE};
    const auto r = gates::evaluate_gates(caps, 0.25);
    CHECK(r.addr_downgrade);
    const auto ok = gates::evaluate_gates(caps, 0.10);
    CHECK(!ok.addr_downgrade);
}

TEST_CASE("gate report JSON round-trip") {
    CorpusCapabilities caps{true, false, true, BookGranularity::MARKET_LEVEL};
    const auto r = gates::evaluate_gates(caps, 0.05);
    const auto back = gates::GateReport::from_json(r.to_json());
    CHECK(back.g_fill == r.g_fill);
    CHECK(back.g_quote_life == r.g_quote_life);
    CHECK(back.g_book == r.g_book);
    CHECK(back.enabled_features == r.enabled_features);
    CHECK(back.withdrawn_analyses.size() == r.withdrawn_analyses.size());
}
