#include "fillside/synth.hpp"

#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fillside::synth {

using nlohmann::json;
using stats::Rng;

namespace {

std::string synth_address(char tag, std::uint64_t index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "0x%c%039llx", tag, static_cast<unsigned long long>(index));
    return buf;
}

std::string synth_tx(std::uint64_t index) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "0x%064llx", static_cast<unsigned long long>(index));
    return buf;
}

std::string synth_market(std::uint64_t index) { return std::to_string(9'000'000 + index); }

// Emits fills with unique tx hashes and per-block log indices.
class FillEmitter {
public:
    explicit FillEmitter(std::int64_t start_ts) : start_ts_(start_ts) {}

    FillRecord& emit(Corpus& corpus, std::int64_t ts, const std::string& maker,
                     const std::string& taker, const std::string& market, Side taker_side,
                     double price, double notional_usdc) {
        FillRecord r;
        r.block_number = 86'000'000 + static_cast<std::uint64_t>((ts - start_ts_) / 2);
        r.log_index = next_log_index_[r.block_number]++;
        r.tx_hash = synth_tx(tx_counter_++);
        r.maker = maker;
        r.taker = taker;
        r.market_token = market;
        r.side = taker_side;
        r.price = static_cast<MicroPrice>(std::llround(std::clamp(price, 0.0, 1.0) * kMicro));
        r.notional = static_cast<Usdc>(std::llround(notional_usdc * kMicro));
        r.timestamp = ts;
        corpus.records.push_back(std::move(r));
        return corpus.records.back();
    }

    std::string throwaway() { return synth_address('b', throwaway_counter_++); }

private:
    std::int64_t start_ts_;
    std::uint64_t tx_counter_ = 0;
    std::uint64_t throwaway_counter_ = 0;
    std::map<std::uint64_t, std::uint32_t> next_log_index_;
};

std::uint64_t uniform_count(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
    if (hi <= lo) return lo;
    return lo + rng.uniform_int(hi - lo + 1);
}

} // namespace

SynthSpec SynthSpec::standard() {
    SynthSpec s;
    // Bands chosen so nearest-rank percentile thresholds fall in the gaps
    // (wide separation between the defining features of adjacent tiers).
    s.tiers["episodic"] = {1199, 1.0, 1.0, 5, 10, 1, 2, 300, 4'000, 400};
    s.tiers["active"] = {299, 2.5, 4.0, 10, 20, 3, 5, 12'000, 20'000, 200};
    s.tiers["hbo"] = {101, 1.6, 2.0, 90, 110, 120, 140, 30'000, 40'000, 300};
    s.tiers["power"] = {300, 8.0, 14.0, 15, 25, 8, 12, 120'000, 200'000, 150};
    s.tiers["hfo"] = {101, 50.0, 80.0, 20, 40, 25, 35, 60'000, 90'000, 60};
    return s;
}

SynthOutput generate(const SynthSpec& spec) {
    SynthOutput out;
    out.corpus.caps.has_fill_attribution = true;
    out.corpus.caps.has_quote_lifecycle = false;
    out.corpus.caps.has_book_snapshots = spec.book_markets > 0;
    out.corpus.caps.book_granularity =
        spec.book_markets > 0 ? BookGranularity::MARKET_LEVEL : BookGranularity::NONE;

    Rng rng(spec.seed);
    FillEmitter emitter(spec.start_ts);
    const std::int64_t window_seconds = spec.window_hours * 3600;
    std::uint64_t address_counter = 0;
    std::uint64_t market_pool_base = 0;

    // ---- Tier population -------------------------------------------------
    // Tiers generate in fixed name order for determinism.
    const std::array<const char*, 5> tier_order = {"episodic", "active", "hbo", "power", "hfo"};
    std::vector<std::string> power_addresses;
    for (const char* tier_name : tier_order) {
        auto it = spec.tiers.find(tier_name);
        if (it == spec.tiers.end()) continue;
        const TierPlant& plant = it->second;
        const std::uint64_t pool_base = market_pool_base;
        market_pool_base += plant.market_pool;

        for (std::uint64_t a = 0; a < plant.count; ++a) {
            const std::string addr = synth_address('a', address_counter++);
            out.truth.tier[addr] = tier_name;
            out.truth.directional_addresses.insert(addr);
            if (std::string(tier_name) == "power") power_addresses.push_back(addr);

            const double rate = rng.uniform(plant.rate_lo, plant.rate_hi);
            std::uint64_t hours = uniform_count(rng, plant.hours_lo, plant.hours_hi);
            std::uint64_t n_fills = static_cast<std::uint64_t>(std::llround(rate * static_cast<double>(hours)));
            if (n_fills < hours) hours = n_fills; // active hours can never exceed fills
            std::uint64_t n_markets = uniform_count(rng, plant.markets_lo, plant.markets_hi);
            n_markets = std::min(n_markets, n_fills);

            // Distinct wall-clock hours inside the window.
            std::set<std::int64_t> hour_set;
            while (hour_set.size() < hours)
                hour_set.insert(static_cast<std::int64_t>(rng.uniform_int(
                    static_cast<std::uint64_t>(spec.window_hours))));
            std::vector<std::int64_t> hour_list(hour_set.begin(), hour_set.end());

            // Market basket from the tier's pool.
            std::set<std::uint64_t> market_set;
            while (market_set.size() < n_markets)
                market_set.insert(pool_base + rng.uniform_int(plant.market_pool));
            std::vector<std::uint64_t> market_list(market_set.begin(), market_set.end());

            const double total = rng.uniform(plant.notional_total_lo, plant.notional_total_hi);
            const double per_fill = total / static_cast<double>(n_fills);
            // One-sided bias planted as an exact composition so the realized
            // net ratio stays far above wash candidacy even at 5 fills.
            double buy_fraction = rng.uniform(0.65, 0.85);
            if (rng.uniform01() < 0.5) buy_fraction = 1.0 - buy_fraction;
            const std::uint64_t n_buys = static_cast<std::uint64_t>(
                std::llround(buy_fraction * static_cast<double>(n_fills)));

            for (std::uint64_t f = 0; f < n_fills; ++f) {
                // Every chosen hour and market appears at least once.
                const std::int64_t hour = hour_list[f < hours ? f : rng.uniform_int(hours)];
                const std::uint64_t market =
                    market_list[f < n_markets ? f : rng.uniform_int(n_markets)];
                const std::int64_t ts = spec.start_ts + hour * 3600 +
                                        static_cast<std::int64_t>(rng.uniform_int(3600));
                const Side side = f < n_buys ? Side::BUY : Side::SELL;
                emitter.emit(out.corpus, ts, emitter.throwaway(), addr, synth_market(market), side,
                             rng.uniform(0.2, 0.8), per_fill);
            }
        }
    }

    // ---- Whale overlay ----------------------------------------------------
    // Re-scale the first whale_count power addresses to whale notionals by
    // adding large fills on their own markets.
    const std::uint64_t n_whales = std::min<std::uint64_t>(spec.whale_count, power_addresses.size());
    for (std::uint64_t w = 0; w < n_whales; ++w) {
        const std::string& addr = power_addresses[w];
        out.truth.whales.insert(addr);
        const double extra = rng.uniform(spec.whale_total_lo, spec.whale_total_hi);
        const std::uint64_t n_fills = 40;
        const double per_fill = extra / n_fills;
        for (std::uint64_t f = 0; f < n_fills; ++f) {
            const std::int64_t ts =
                spec.start_ts + static_cast<std::int64_t>(rng.uniform_int(
                                    static_cast<std::uint64_t>(window_seconds)));
            emitter.emit(out.corpus, ts, emitter.throwaway(), addr,
                         synth_market(market_pool_base + w % 8), Side::BUY, rng.uniform(0.3, 0.7),
                         per_fill);
        }
    }
    market_pool_base += 8;

    // ---- Wash ring ----------------------------------------------------------
    // Balanced buy/sell pairs inside the wash window; the addresses stay
    // under the activity filter (2 pairs = 4 fills) so they do not disturb
    // the tier percentile geometry.
    for (std::uint64_t i = 0; i < spec.wash_count; ++i) {
        const std::string addr = synth_address('e', i);
        out.truth.wash_addresses.insert(addr);
        const std::string market = synth_market(market_pool_base + i % 4);
        for (std::uint64_t p = 0; p < spec.wash_pairs; ++p) {
            const std::int64_t t0 =
                spec.start_ts + static_cast<std::int64_t>((i * 7919 + p * 1201) % 150000) * 1000 % window_seconds;
            const double price = 0.4 + 0.01 * static_cast<double>(p);
            emitter.emit(out.corpus, t0, emitter.throwaway(), addr, market, Side::BUY, price,
                         spec.wash_fill_notional);
            emitter.emit(out.corpus, t0 + spec.wash_gap_seconds, emitter.throwaway(), addr, market,
                         Side::SELL, price, spec.wash_fill_notional);
        }
    }
    market_pool_base += 4;

    // ---- negRisk groups and arb bots ---------------------------------------
    for (std::uint64_t g = 0; g < spec.negrisk_groups; ++g) {
        const std::string group_id = "group" + std::to_string(g);
        NegRiskTruth truth;
        truth.pulse_t0 = spec.start_ts + spec.negrisk_pulse_offset;
        truth.pulse_width = spec.negrisk_pulse_width;
        truth.pulse_magnitude = spec.negrisk_pulse_magnitude;
        std::vector<std::string> members;
        for (std::size_t m = 0; m < spec.negrisk_prices.size(); ++m)
            members.push_back(synth_market(market_pool_base + m));
        market_pool_base += spec.negrisk_prices.size();
        truth.members = members;
        out.related_map[group_id] = members;

        // Price ticks every 60 seconds, staggered per member; member 0 carries
        // the square pulse.
        const std::int64_t tick = 60;
        for (std::int64_t t = 0; t + tick <= window_seconds / 4; t += tick) {
            for (std::size_t m = 0; m < members.size(); ++m) {
                const std::int64_t ts = spec.start_ts + t + static_cast<std::int64_t>(m);
                double price = spec.negrisk_prices[m];
                if (m == 0 && ts >= truth.pulse_t0 && ts < truth.pulse_t0 + truth.pulse_width)
                    price += truth.pulse_magnitude;
                emitter.emit(out.corpus, ts, emitter.throwaway(), emitter.throwaway(), members[m],
                             Side::BUY, price, 5.0);
            }
        }
        // Resolution: member 0 wins.
        for (std::size_t m = 0; m < members.size(); ++m)
            out.resolutions.push_back({members[m], m == 0 ? 1 : 0, spec.start_ts + window_seconds});
        out.truth.negrisk[group_id] = truth;

        // Arb bots pair opposite-side legs across two members with asymmetric
        // notionals (directional enough to stay out of wash candidacy).
        for (std::uint64_t b = 0; b < spec.arb_bots; ++b) {
            const std::string bot = synth_address('d', g * 100 + b);
            std::uint64_t planted = 0;
            for (std::uint64_t p = 0; p < spec.arb_pairs_per_bot; ++p) {
                const std::int64_t ts = spec.start_ts + 3600 + static_cast<std::int64_t>(
                                            (b * 5077 + p * 977) % (window_seconds / 2));
                emitter.emit(out.corpus, ts, emitter.throwaway(), bot, members[0], Side::BUY,
                             spec.negrisk_prices[0], 100.0);
                emitter.emit(out.corpus, ts + spec.arb_gap_seconds, emitter.throwaway(), bot,
                             members[1 % members.size()], Side::SELL, spec.negrisk_prices[1], 60.0);
                ++planted;
            }
            out.truth.arb_pairs[bot] = planted;
        }
    }

    // ---- Hawkes market ------------------------------------------------------
    if (spec.hawkes_market) {
        const std::string market = synth_market(market_pool_base++);
        out.truth.hawkes_eta[market] = spec.hawkes_alpha / spec.hawkes_beta;
        const auto times = simulate_hawkes(spec.hawkes_mu, spec.hawkes_alpha, spec.hawkes_beta,
                                           static_cast<double>(window_seconds),
                                           stats::derive_seed(spec.seed, 1001));
        for (double t : times) {
            const std::int64_t ts = spec.start_ts + static_cast<std::int64_t>(t);
            emitter.emit(out.corpus, ts, emitter.throwaway(), emitter.throwaway(), market,
                         rng.uniform01() < 0.5 ? Side::BUY : Side::SELL, 0.5, 10.0);
        }
    }

    // ---- Linear-impact market ------------------------------------------------
    if (spec.impact_market) {
        const std::string market = synth_market(market_pool_base++);
        out.truth.impact_lambda[market] = spec.impact_lambda;
        const auto series =
            simulate_impact_series(spec.impact_lambda, spec.impact_bins, spec.impact_bin_seconds,
                                   spec.impact_noise, stats::derive_seed(spec.seed, 1002));
        for (const auto& f : series.fills) {
            emitter.emit(out.corpus, spec.start_ts + f.ts, emitter.throwaway(), emitter.throwaway(),
                         market, f.taker_side, static_cast<double>(f.price) / kMicro,
                         static_cast<double>(f.notional) / kMicro);
        }
        const double last_price = static_cast<double>(series.fills.back().price) / kMicro;
        out.resolutions.push_back({market, last_price > 0.5 ? 1 : 0, spec.start_ts + window_seconds});
    }

    // ---- Book snapshot markets ------------------------------------------------
    for (std::uint64_t b = 0; b < spec.book_markets; ++b) {
        const std::string market = synth_market(market_pool_base + b);
        const bool swing = b < spec.book_swing_markets;
        out.truth.planted_swings[market] = swing ? 1 : 0;
        const std::int64_t swing_ts = spec.start_ts + 7200;
        for (std::int64_t t = 0; t <= 3600 * 4; t += 60) {
            const std::int64_t ts = spec.start_ts + t;
            double mid = 0.5;
            if (swing && ts >= swing_ts) mid += spec.book_step;
            out.books.push_back({market, ts,
                                 static_cast<MicroPrice>(std::llround((mid - 0.01) * kMicro)),
                                 static_cast<MicroPrice>(std::llround((mid + 0.01) * kMicro))});
        }
        // A few fills so the market exists in the corpus.
        for (int f = 0; f < 6; ++f)
            emitter.emit(out.corpus, spec.start_ts + f * 1800, emitter.throwaway(),
                         emitter.throwaway(), market, f % 2 == 0 ? Side::BUY : Side::SELL, 0.5, 20.0);
    }
    market_pool_base += spec.book_markets;

    std::sort(out.corpus.records.begin(), out.corpus.records.end(), corpus_order);
    return out;
}

// --------------------------------------------------------------------------
// Aux files
// --------------------------------------------------------------------------

void write_books(const std::vector<BookRow>& books, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write books: " + path);
    f << "#market_token\tts\tbest_bid\tbest_ask\n";
    for (const auto& b : books)
        f << b.market_token << '\t' << b.ts << '\t' << format_micro(b.best_bid) << '\t'
          << format_micro(b.best_ask) << '\n';
}

void write_resolutions(const std::vector<ResolutionRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write resolutions: " + path);
    f << "#market_token\toutcome\tts\n";
    for (const auto& r : rows) f << r.market_token << '\t' << r.outcome << '\t' << r.ts << '\n';
}

void write_related_map(const std::map<std::string, std::vector<std::string>>& groups,
                       const std::string& path) {
    json j;
    for (const auto& [group, members] : groups) j[group] = members;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write related map: " + path);
    f << j.dump(2) << '\n';
}

std::map<std::string, std::vector<std::string>> read_related_map(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open related map: " + path);
    json j = json::parse(f);
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [group, members] : j.items())
        out[group] = members.get<std::vector<std::string>>();
    return out;
}

// --------------------------------------------------------------------------
// Direct generators
// --------------------------------------------------------------------------

Blobs make_blobs(const std::vector<std::array<double, 6>>& centers,
                 const std::vector<std::size_t>& counts, double sigma, std::uint64_t seed) {
    if (centers.size() != counts.size())
        throw std::invalid_argument("make_blobs: centers/counts mismatch");
    Blobs out;
    out.points.dim = 6;
    Rng rng(seed);
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            for (std::size_t d = 0; d < 6; ++d)
                out.points.x.push_back(centers[c][d] + sigma * rng.normal());
            out.labels.push_back(static_cast<int>(c));
            ++out.points.n;
        }
    }
    return out;
}

std::vector<double> simulate_hawkes(double mu, double alpha, double beta, double horizon,
                                    std::uint64_t seed) {
    if (mu <= 0 || alpha < 0 || beta <= 0 || alpha >= beta)
        throw std::invalid_argument("simulate_hawkes needs mu>0, beta>0, 0<=alpha<beta");
    Rng rng(seed);
    std::vector<double> times;
    double t = 0;
    double decayed = 0; // alpha * sum exp(-beta (t - t_i)) at current t
    while (true) {
        const double intensity_bound = mu + decayed;
        const double w = rng.exponential(intensity_bound);
        decayed *= std::exp(-beta * w);
        t += w;
        if (t > horizon) break;
        const double intensity = mu + decayed;
        if (rng.uniform01() * intensity_bound <= intensity) {
            times.push_back(t);
            decayed += alpha;
        }
    }
    return times;
}

micro::MarketSeries simulate_impact_series(double lambda, std::size_t n_bins,
                                           std::int64_t bin_seconds, double noise_sigma,
                                           std::uint64_t seed) {
    Rng rng(seed);
    micro::MarketSeries s;
    s.market_token = "impact";
    double price = 0.5;
    for (std::size_t b = 0; b < n_bins; ++b) {
        // Signed volume alternates with a pull toward mid when price drifts,
        // keeping the path inside [0,1] without breaking linearity.
        double q = rng.uniform(10.0, 20.0);
        if (std::abs(price - 0.5) > 0.15)
            q *= price > 0.5 ? -1.0 : 1.0;
        else if (b % 2 == 1)
            q = -q;
        price += lambda * q + noise_sigma * rng.normal();
        price = std::clamp(price, 0.01, 0.99);
        micro::SeriesFill f;
        f.ts = static_cast<std::int64_t>(b) * bin_seconds + 1;
        f.price = static_cast<MicroPrice>(std::llround(price * kMicro));
        f.notional = static_cast<Usdc>(std::llround(std::abs(q) * kMicro));
        f.taker_side = q > 0 ? Side::BUY : Side::SELL;
        s.fills.push_back(f);
    }
    return s;
}

// --------------------------------------------------------------------------
// JSON round-trips
// --------------------------------------------------------------------------

std::string SynthSpec::to_json() const {
    json j;
    j["seed"] = seed;
    j["start_ts"] = start_ts;
    j["window_hours"] = window_hours;
    for (const auto& [name, t] : tiers) {
        json tj;
        tj["count"] = t.count;
        tj["rate"] = {t.rate_lo, t.rate_hi};
        tj["hours"] = {t.hours_lo, t.hours_hi};
        tj["markets"] = {t.markets_lo, t.markets_hi};
        tj["notional_total"] = {t.notional_total_lo, t.notional_total_hi};
        tj["market_pool"] = t.market_pool;
        j["tiers"][name] = tj;
    }
    j["whales"] = {{"count", whale_count}, {"total", {whale_total_lo, whale_total_hi}}};
    j["wash"] = {{"count", wash_count},
                 {"pairs", wash_pairs},
                 {"fill_notional", wash_fill_notional},
                 {"gap_seconds", wash_gap_seconds}};
    j["arb"] = {{"bots", arb_bots}, {"pairs_per_bot", arb_pairs_per_bot}, {"gap_seconds", arb_gap_seconds}};
    j["hawkes"] = {{"enabled", hawkes_market}, {"mu", hawkes_mu}, {"alpha", hawkes_alpha}, {"beta", hawkes_beta}};
    j["impact"] = {{"enabled", impact_market},
                   {"lambda", impact_lambda},
                   {"bins", impact_bins},
                   {"bin_seconds", impact_bin_seconds},
                   {"noise", impact_noise}};
    j["negrisk"] = {{"groups", negrisk_groups},
                    {"prices", negrisk_prices},
                    {"pulse_offset", negrisk_pulse_offset},
                    {"pulse_width", negrisk_pulse_width},
                    {"pulse_magnitude", negrisk_pulse_magnitude}};
    j["books"] = {{"markets", book_markets}, {"swing_markets", book_swing_markets}, {"step", book_step}};
    return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    SynthSpec s = SynthSpec::standard();
    s.seed = j.value("seed", s.seed);
    s.start_ts = j.value("start_ts", s.start_ts);
    s.window_hours = j.value("window_hours", s.window_hours);
    if (j.contains("tiers")) {
        s.tiers.clear();
        for (const auto& [name, tj] : j["tiers"].items()) {
            TierPlant t;
            t.count = tj.value("count", 0ull);
            t.rate_lo = tj["rate"][0].get<double>();
            t.rate_hi = tj["rate"][1].get<double>();
            t.hours_lo = tj["hours"][0].get<std::uint64_t>();
            t.hours_hi = tj["hours"][1].get<std::uint64_t>();
            t.markets_lo = tj["markets"][0].get<std::uint64_t>();
            t.markets_hi = tj["markets"][1].get<std::uint64_t>();
            t.notional_total_lo = tj["notional_total"][0].get<double>();
            t.notional_total_hi = tj["notional_total"][1].get<double>();
            t.market_pool = tj.value("market_pool", 100ull);
            s.tiers[name] = t;
        }
    }
    if (j.contains("whales")) {
        s.whale_count = j["whales"].value("count", s.whale_count);
        if (j["whales"].contains("total")) {
            s.whale_total_lo = j["whales"]["total"][0].get<double>();
            s.whale_total_hi = j["whales"]["total"][1].get<double>();
        }
    }
    if (j.contains("wash")) {
        s.wash_count = j["wash"].value("count", s.wash_count);
        s.wash_pairs = j["wash"].value("pairs", s.wash_pairs);
        s.wash_fill_notional = j["wash"].value("fill_notional", s.wash_fill_notional);
        s.wash_gap_seconds = j["wash"].value("gap_seconds", s.wash_gap_seconds);
    }
    if (j.contains("arb")) {
        s.arb_bots = j["arb"].value("bots", s.arb_bots);
        s.arb_pairs_per_bot = j["arb"].value("pairs_per_bot", s.arb_pairs_per_bot);
        s.arb_gap_seconds = j["arb"].value("gap_seconds", s.arb_gap_seconds);
    }
    if (j.contains("hawkes")) {
        s.hawkes_market = j["hawkes"].value("enabled", s.hawkes_market);
        s.hawkes_mu = j["hawkes"].value("mu", s.hawkes_mu);
        s.hawkes_alpha = j["hawkes"].value("alpha", s.hawkes_alpha);
        s.hawkes_beta = j["hawkes"].value("beta", s.hawkes_beta);
    }
    if (j.contains("impact")) {
        s.impact_market = j["impact"].value("enabled", s.impact_market);
        s.impact_lambda = j["impact"].value("lambda", s.impact_lambda);
        s.impact_bins = j["impact"].value("bins", s.impact_bins);
        s.impact_bin_seconds = j["impact"].value("bin_seconds", s.impact_bin_seconds);
        s.impact_noise = j["impact"].value("noise", s.impact_noise);
    }
    if (j.contains("negrisk")) {
        s.negrisk_groups = j["negrisk"].value("groups", s.negrisk_groups);
        if (j["negrisk"].contains("prices"))
            s.negrisk_prices = j["negrisk"]["prices"].get<std::vector<double>>();
        s.negrisk_pulse_offset = j["negrisk"].value("pulse_offset", s.negrisk_pulse_offset);
        s.negrisk_pulse_width = j["negrisk"].value("pulse_width", s.negrisk_pulse_width);
        s.negrisk_pulse_magnitude = j["negrisk"].value("pulse_magnitude", s.negrisk_pulse_magnitude);
    }
    if (j.contains("books")) {
        s.book_markets = j["books"].value("markets", s.book_markets);
        s.book_swing_markets = j["books"].value("swing_markets", s.book_swing_markets);
        s.book_step = j["books"].value("step", s.book_step);
    }
    return s;
}

std::string GroundTruth::to_json() const {
    json j;
    j["tier"] = tier;
    j["whales"] = whales;
    j["wash_addresses"] = wash_addresses;
    j["directional_addresses"] = directional_addresses;
    j["arb_pairs"] = arb_pairs;
    j["impact_lambda"] = impact_lambda;
    j["hawkes_eta"] = hawkes_eta;
    j["planted_swings"] = planted_swings;
    for (const auto& [group, t] : negrisk) {
        json g;
        g["members"] = t.members;
        g["pulse_t0"] = t.pulse_t0;
        g["pulse_width"] = t.pulse_width;
        g["pulse_magnitude"] = t.pulse_magnitude;
        j["negrisk"][group] = g;
    }
    return j.dump(2);
}

GroundTruth GroundTruth::from_json(const std::string& text) {
    json j = json::parse(text);
    GroundTruth t;
    if (j.contains("tier")) t.tier = j["tier"].get<std::map<std::string, std::string>>();
    if (j.contains("whales")) t.whales = j["whales"].get<std::set<std::string>>();
    if (j.contains("wash_addresses"))
        t.wash_addresses = j["wash_addresses"].get<std::set<std::string>>();
    if (j.contains("directional_addresses"))
        t.directional_addresses = j["directional_addresses"].get<std::set<std::string>>();
    if (j.contains("arb_pairs"))
        t.arb_pairs = j["arb_pairs"].get<std::map<std::string, std::uint64_t>>();
    if (j.contains("impact_lambda"))
        t.impact_lambda = j["impact_lambda"].get<std::map<std::string, double>>();
    if (j.contains("hawkes_eta")) t.hawkes_eta = j["hawkes_eta"].get<std::map<std::string, double>>();
    if (j.contains("planted_swings"))
        t.planted_swings = j["planted_swings"].get<std::map<std::string, std::uint64_t>>();
    if (j.contains("negrisk")) {
        for (const auto& [group, g] : j["negrisk"].items()) {
            NegRiskTruth nt;
            nt.members = g["members"].get<std::vector<std::string>>();
            nt.pulse_t0 = g["pulse_t0"].get<std::int64_t>();
            nt.pulse_width = g["pulse_width"].get<std::int64_t>();
            nt.pulse_magnitude = g["pulse_magnitude"].get<double>();
            t.negrisk[group] = nt;
        }
    }
    return t;
}

} // namespace fillside::synth
