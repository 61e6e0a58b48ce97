#include "fillside/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace fillside::patterns {

// --------------------------------------------------------------------------
// Wash detection
// --------------------------------------------------------------------------

namespace {

// Count opposite-side pairs within the window for one (address, market)
// fill list, via a two-pointer sweep over the sell timestamps per buy.
std::uint64_t count_intra_window_pairs(std::vector<std::pair<std::int64_t, Side>> fills,
                                       std::int64_t delta) {
    std::sort(fills.begin(), fills.end());
    std::vector<std::int64_t> buys, sells;
    for (const auto& [ts, side] : fills) (side == Side::BUY ? buys : sells).push_back(ts);
    std::uint64_t pairs = 0;
    std::size_t lo = 0, hi = 0;
    for (const std::int64_t t : buys) {
        while (lo < sells.size() && sells[lo] < t - delta) ++lo;
        if (hi < lo) hi = lo;
        while (hi < sells.size() && sells[hi] <= t + delta) ++hi;
        pairs += hi - lo;
    }
    return pairs;
}

} // namespace

std::vector<WashCandidate> detect_wash(const features::AggregateMap& aggregates,
                                       const std::vector<FillRecord>& fills,
                                       const WashConfig& config) {
    // Candidate screen first on the aggregates, then the pair sweep only for
    // screened addresses.
    std::map<std::string, WashCandidate> candidates;
    for (const auto& [addr, agg] : aggregates) {
        const Usdc gross = agg.buy_volume + agg.sell_volume;
        if (gross < config.gross_min || gross == 0) continue;
        const double net_ratio = std::abs(static_cast<double>(agg.buy_volume - agg.sell_volume)) /
                                 static_cast<double>(gross);
        if (net_ratio > config.net_ratio_max) continue;
        WashCandidate c;
        c.address = addr;
        c.gross_volume = gross;
        c.net_ratio = net_ratio;
        candidates.emplace(addr, std::move(c));
    }

    // (address, market) -> fills, both counterparties counted on their side.
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::int64_t, Side>>> lists;
    for (const auto& f : fills) {
        if (candidates.count(f.taker))
            lists[{f.taker, f.market_token}].emplace_back(f.timestamp, f.side);
        if (candidates.count(f.maker))
            lists[{f.maker, f.market_token}].emplace_back(f.timestamp, opposite(f.side));
    }
    for (auto& [key, list] : lists)
        candidates[key.first].intra_window_pairs +=
            count_intra_window_pairs(std::move(list), config.delta_wash_seconds);

    std::vector<WashCandidate> out;
    out.reserve(candidates.size());
    for (auto& [addr, c] : candidates) out.push_back(std::move(c));
    return out;
}

// --------------------------------------------------------------------------
// Co-occurrence graph
// --------------------------------------------------------------------------

CoOccurrenceGraph co_occurrence(const std::vector<FillRecord>& fills) {
    CoOccurrenceGraph g;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> markets;
    for (const auto& f : fills) {
        g.nodes.insert(f.maker);
        g.nodes.insert(f.taker);
        if (f.maker == f.taker) continue; // no self-loops
        auto key = f.maker < f.taker ? std::make_pair(f.maker, f.taker)
                                     : std::make_pair(f.taker, f.maker);
        ++g.edges[key].fill_count;
        markets[key].insert(f.market_token);
    }
    for (auto& [key, set] : markets) g.edges[key].shared_markets = set.size();
    return g;
}

std::vector<std::vector<std::string>> connected_components(const CoOccurrenceGraph& graph,
                                                           std::uint64_t min_edge_weight) {
    std::vector<std::string> nodes(graph.nodes.begin(), graph.nodes.end());
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = i;

    std::vector<std::size_t> parent(nodes.size());
    std::iota(parent.begin(), parent.end(), 0u);
    const auto find = [&](std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    for (const auto& [key, stats] : graph.edges) {
        if (stats.fill_count < min_edge_weight) continue;
        std::size_t a = find(index[key.first]);
        std::size_t b = find(index[key.second]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }

    std::map<std::size_t, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < nodes.size(); ++i) groups[find(i)].push_back(nodes[i]);
    std::vector<std::vector<std::string>> out;
    out.reserve(groups.size());
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    return out;
}

// --------------------------------------------------------------------------
// Cross-market pairs
// --------------------------------------------------------------------------

std::vector<PairEvent> cross_market_pairs(
    const std::vector<FillRecord>& fills,
    const std::map<std::string, std::vector<std::string>>& related_map,
    std::int64_t delta_arb_seconds, ArbSignRule rule) {
    std::map<std::string, std::string> market_to_group;
    for (const auto& [group, members] : related_map) {
        if (members.size() < 2)
            throw std::invalid_argument("related group needs >= 2 members: " + group);
        for (const auto& m : members) market_to_group[m] = group;
    }

    struct Leg {
        std::int64_t ts;
        std::string market;
        Side side;
    };
    // (address, group) -> legs; both counterparties produce legs.
    std::map<std::pair<std::string, std::string>, std::vector<Leg>> legs;
    for (const auto& f : fills) {
        auto it = market_to_group.find(f.market_token);
        if (it == market_to_group.end()) continue;
        legs[{f.taker, it->second}].push_back({f.timestamp, f.market_token, f.side});
        legs[{f.maker, it->second}].push_back({f.timestamp, f.market_token, opposite(f.side)});
    }

    std::vector<PairEvent> events;
    for (auto& [key, list] : legs) {
        std::sort(list.begin(), list.end(), [](const Leg& a, const Leg& b) {
            if (a.ts != b.ts) return a.ts < b.ts;
            return a.market < b.market;
        });
        for (std::size_t i = 0; i < list.size(); ++i) {
            for (std::size_t j = i + 1; j < list.size(); ++j) {
                if (list[j].ts - list[i].ts > delta_arb_seconds) break;
                if (list[i].market == list[j].market) continue;
                if (rule == ArbSignRule::OPPOSITE_SIDES && list[i].side == list[j].side) continue;
                events.push_back({key.first, key.second, list[i].market, list[j].market,
                                  list[i].ts, list[j].ts});
            }
        }
    }
    return events;
}

// --------------------------------------------------------------------------
// negRisk deviation
// --------------------------------------------------------------------------

NegRiskSeries negrisk_deviation(const std::string& group_id,
                                const std::vector<std::string>& members,
                                const std::vector<FillRecord>& fills, double threshold) {
    if (members.size() < 2) throw std::invalid_argument("negRisk group needs >= 2 members");
    NegRiskSeries out;
    out.group = group_id;

    std::map<std::string, std::size_t> member_index;
    for (std::size_t i = 0; i < members.size(); ++i) member_index[members[i]] = i;

    struct Tick {
        std::int64_t ts;
        std::size_t member;
        double price;
    };
    std::vector<Tick> ticks;
    for (const auto& f : fills) {
        auto it = member_index.find(f.market_token);
        if (it == member_index.end()) continue;
        ticks.push_back({f.timestamp, it->second, static_cast<double>(f.price) / kMicro});
    }
    std::stable_sort(ticks.begin(), ticks.end(),
                     [](const Tick& a, const Tick& b) { return a.ts < b.ts; });

    std::vector<double> last(members.size(), -1.0);
    std::size_t seen = 0;
    bool above = false;
    DeviationEpisode episode;
    std::size_t i = 0;
    while (i < ticks.size()) {
        const std::int64_t ts = ticks[i].ts;
        for (; i < ticks.size() && ticks[i].ts == ts; ++i) {
            if (last[ticks[i].member] < 0) ++seen;
            last[ticks[i].member] = ticks[i].price;
        }
        if (seen < members.size()) continue; // wait until every member has a price

        double sum = 0;
        for (double p : last) sum += p;
        const double dev = sum - 1.0;
        out.samples.push_back({ts, dev});

        const bool now_above = std::abs(dev) > threshold;
        if (now_above && !above) {
            episode = DeviationEpisode{};
            episode.crossing_ts = ts;
            episode.peak = std::abs(dev);
        } else if (now_above) {
            episode.peak = std::max(episode.peak, std::abs(dev));
        } else if (above) {
            episode.recovery_ts = ts;
            out.episodes.push_back(episode);
        }
        above = now_above;
    }
    if (above) out.episodes.push_back(episode); // unrecovered at end of window
    return out;
}

SwingReport book_swing_scan(const std::vector<micro::MarketSeries>& series, double swing_threshold,
                            std::int64_t window_seconds) {
    SwingReport report;
    for (const auto& s : series) {
        if (s.books.empty()) continue;
        auto diag = micro::book_diagnostics(s, swing_threshold, window_seconds);
        if (diag.swings.empty()) continue;
        report.total_events += diag.swings.size();
        ++report.markets_with_swings;
        report.by_market[s.market_token] = std::move(diag.swings);
    }
    return report;
}

} // namespace fillside::patterns
