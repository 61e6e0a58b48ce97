#include "fillside/micropanel.hpp"

#include "fillside/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fillside::micro {

double MarketSeries::open_price() const {
    if (fills.empty()) throw std::invalid_argument("open_price of empty series");
    return static_cast<double>(fills.front().price) / kMicro;
}

std::vector<MarketSeries> build_series(const std::vector<FillRecord>& records) {
    std::map<std::string, MarketSeries> by_market;
    for (const auto& r : records) {
        auto& s = by_market[r.market_token];
        s.market_token = r.market_token;
        s.fills.push_back({r.timestamp, r.price, r.notional, r.side});
    }
    std::vector<MarketSeries> out;
    out.reserve(by_market.size());
    for (auto& [token, s] : by_market) {
        std::stable_sort(s.fills.begin(), s.fills.end(),
                         [](const SeriesFill& a, const SeriesFill& b) { return a.ts < b.ts; });
        out.push_back(std::move(s));
    }
    return out;
}

void attach_books(std::vector<MarketSeries>& series, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open book file: " + path);
    std::map<std::string, std::vector<BookSnap>> by_market;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string token, bid, ask;
        std::int64_t ts;
        if (!(ss >> token >> ts >> bid >> ask)) continue;
        by_market[token].push_back({ts, parse_micro(bid), parse_micro(ask)});
    }
    for (auto& s : series) {
        auto it = by_market.find(s.market_token);
        if (it == by_market.end()) continue;
        s.books = std::move(it->second);
        std::stable_sort(s.books.begin(), s.books.end(),
                         [](const BookSnap& a, const BookSnap& b) { return a.ts < b.ts; });
    }
}

void attach_resolutions(std::vector<MarketSeries>& series, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open resolutions file: " + path);
    std::map<std::string, std::pair<int, std::int64_t>> res;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string token;
        int outcome;
        std::int64_t ts;
        if (!(ss >> token >> outcome >> ts)) continue;
        res[token] = {outcome, ts};
    }
    for (auto& s : series) {
        auto it = res.find(s.market_token);
        if (it == res.end()) continue;
        s.resolution_price = it->second.first ? kMicro : 0;
        s.resolution_ts = it->second.second;
    }
}

// --------------------------------------------------------------------------
// Windowed flow metrics
// --------------------------------------------------------------------------

namespace {

struct WindowFlow {
    double buy = 0;
    double sell = 0;
};

std::vector<WindowFlow> window_flows(const MarketSeries& s, std::int64_t window_seconds) {
    std::vector<WindowFlow> flows;
    const std::int64_t t0 = s.start_ts();
    for (const auto& f : s.fills) {
        const auto w = static_cast<std::size_t>((f.ts - t0) / window_seconds);
        if (w >= flows.size()) flows.resize(w + 1);
        const double v = static_cast<double>(f.notional) / kMicro;
        if (f.taker_side == Side::BUY)
            flows[w].buy += v;
        else
            flows[w].sell += v;
    }
    return flows;
}

inline double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double logit(double p) {
    const double c = std::clamp(p, kLogitClip, 1.0 - kLogitClip);
    return std::log(c / (1.0 - c));
}

} // namespace

std::optional<double> order_imbalance(const MarketSeries& series, std::int64_t window_seconds) {
    if (series.fills.empty()) return std::nullopt;
    const auto flows = window_flows(series, window_seconds);
    double weighted = 0, total_vol = 0, net = 0;
    for (const auto& w : flows) {
        const double vol = w.buy + w.sell;
        if (vol <= 0) continue;
        weighted += vol * std::abs((w.buy - w.sell) / vol);
        total_vol += vol;
        net += w.buy - w.sell;
    }
    if (total_vol <= 0) return std::nullopt;
    const double magnitude = weighted / total_vol;
    const double sign = net > 0 ? 1.0 : (net < 0 ? -1.0 : 0.0);
    return sign * magnitude;
}

std::optional<double> two_sidedness(const MarketSeries& series, std::int64_t window_seconds) {
    if (series.fills.empty()) return std::nullopt;
    if (window_seconds <= 0) {
        double buy = 0, sell = 0;
        for (const auto& f : series.fills) {
            const double v = static_cast<double>(f.notional) / kMicro;
            (f.taker_side == Side::BUY ? buy : sell) += v;
        }
        const double vol = buy + sell;
        if (vol <= 0) return std::nullopt;
        return 1.0 - std::abs(buy - sell) / vol;
    }
    const auto flows = window_flows(series, window_seconds);
    double weighted = 0, total_vol = 0;
    for (const auto& w : flows) {
        const double vol = w.buy + w.sell;
        if (vol <= 0) continue;
        weighted += vol * (1.0 - std::abs(w.buy - w.sell) / vol);
        total_vol += vol;
    }
    if (total_vol <= 0) return std::nullopt;
    return weighted / total_vol;
}

std::optional<double> persistence_ratio(const MarketSeries& series, std::int64_t window_seconds) {
    if (series.fills.size() < 2) return std::nullopt;
    const std::int64_t t0 = series.start_ts();
    double total_net = 0, total_abs = 0;
    std::size_t i = 0;
    while (i < series.fills.size()) {
        const auto w = (series.fills[i].ts - t0) / window_seconds;
        double net = 0, abs_sum = 0;
        double prev_logit = logit(static_cast<double>(series.fills[i].price) / kMicro);
        std::size_t j = i + 1;
        for (; j < series.fills.size() && (series.fills[j].ts - t0) / window_seconds == w; ++j) {
            const double cur = logit(static_cast<double>(series.fills[j].price) / kMicro);
            const double r = cur - prev_logit;
            net += r;
            abs_sum += std::abs(r);
            prev_logit = cur;
        }
        total_net += std::abs(net);
        total_abs += abs_sum;
        i = j;
    }
    if (total_abs <= 0) return std::nullopt; // no price movement to measure
    return clip01(total_net / total_abs);
}

std::optional<double> vpin(const MarketSeries& series, std::size_t n_buckets) {
    if (series.fills.empty() || n_buckets == 0) return std::nullopt;
    double total = 0;
    for (const auto& f : series.fills) total += static_cast<double>(f.notional) / kMicro;
    if (total <= 0) return std::nullopt;
    const double bucket = total / static_cast<double>(n_buckets);

    std::vector<double> imbalances;
    imbalances.reserve(n_buckets + 1);
    double cur_buy = 0, cur_sell = 0, cur_vol = 0;
    for (const auto& f : series.fills) {
        double remaining = static_cast<double>(f.notional) / kMicro;
        while (remaining > 0) {
            const double room = bucket - cur_vol;
            const double take = std::min(remaining, room);
            if (f.taker_side == Side::BUY)
                cur_buy += take;
            else
                cur_sell += take;
            cur_vol += take;
            remaining -= take;
            if (cur_vol >= bucket - 1e-9) {
                imbalances.push_back(std::abs(cur_buy - cur_sell) / cur_vol);
                cur_buy = cur_sell = cur_vol = 0;
            }
        }
    }
    if (cur_vol >= bucket / 2)
        imbalances.push_back(std::abs(cur_buy - cur_sell) / cur_vol);
    if (imbalances.empty()) return std::nullopt;
    double s = 0;
    for (double v : imbalances) s += v;
    return clip01(s / static_cast<double>(imbalances.size()));
}

std::optional<double> order_flow_imbalance(const MarketSeries& series) {
    if (series.fills.empty()) return std::nullopt;
    double buy = 0, sell = 0;
    for (const auto& f : series.fills) {
        const double v = static_cast<double>(f.notional) / kMicro;
        (f.taker_side == Side::BUY ? buy : sell) += v;
    }
    return buy - sell;
}

KyleLambda kyle_lambda(const MarketSeries& series, std::int64_t bin_seconds) {
    KyleLambda out;
    if (series.fills.empty()) return out;
    const std::int64_t t0 = series.start_ts();

    // Per non-empty bin: last trade price and net signed USDC volume.
    std::map<std::int64_t, std::pair<double, double>> bins; // bin -> (last price, signed vol)
    for (const auto& f : series.fills) {
        const std::int64_t b = (f.ts - t0) / bin_seconds;
        auto& [price, qty] = bins[b];
        price = static_cast<double>(f.price) / kMicro;
        qty += (f.taker_side == Side::BUY ? 1.0 : -1.0) * static_cast<double>(f.notional) / kMicro;
    }
    out.n_bins = bins.size();

    std::vector<double> q, dp;
    bool have_prev = false;
    double prev_price = 0;
    for (const auto& [b, pv] : bins) {
        if (have_prev) {
            q.push_back(pv.second);
            dp.push_back(pv.first - prev_price);
        }
        prev_price = pv.first;
        have_prev = true;
    }
    if (q.size() < 3) return out; // under-determined
    const double mq = stats::mean(q);
    double var = 0;
    for (double v : q) var += (v - mq) * (v - mq);
    if (var <= 0) return out;
    out.raw = stats::ols_slope(q, dp);
    return out;
}

WinsorSpec fit_winsor(const std::vector<double>& values, double lower_q, double upper_q) {
    if (values.empty()) throw std::invalid_argument("fit_winsor on empty sample");
    if (lower_q >= upper_q) throw std::invalid_argument("winsor quantiles out of order");
    WinsorSpec spec;
    spec.lower_q = lower_q;
    spec.upper_q = upper_q;
    spec.lo = stats::quantile_nearest_rank(values, lower_q);
    spec.hi = stats::quantile_nearest_rank(values, upper_q);
    return spec;
}

std::pair<std::vector<double>, std::uint64_t> winsorize(const std::vector<double>& values,
                                                        const WinsorSpec& spec) {
    std::vector<double> out;
    out.reserve(values.size());
    std::uint64_t outliers = 0;
    for (double v : values) {
        if (v < spec.lo || v > spec.hi) ++outliers;
        out.push_back(std::clamp(v, spec.lo, spec.hi));
    }
    return {std::move(out), outliers};
}

std::optional<double> trade_size_kurtosis(const MarketSeries& series) {
    if (series.fills.size() < 2) return std::nullopt;
    std::vector<double> sizes;
    sizes.reserve(series.fills.size());
    for (const auto& f : series.fills) sizes.push_back(static_cast<double>(f.notional) / kMicro);
    const double m = stats::mean(sizes);
    double m2 = 0;
    for (double s : sizes) m2 += (s - m) * (s - m);
    if (m2 <= 0) return std::nullopt; // constant sizes
    return stats::excess_kurtosis(sizes);
}

// --------------------------------------------------------------------------
// Book diagnostics
// --------------------------------------------------------------------------

BookDiagnostics book_diagnostics(const MarketSeries& series, double swing_threshold,
                                 std::int64_t window_seconds) {
    BookDiagnostics out;
    out.mid.reserve(series.books.size());
    std::deque<std::pair<std::int64_t, double>> window;
    for (const auto& b : series.books) {
        const double mid = (static_cast<double>(b.best_bid) + static_cast<double>(b.best_ask)) /
                           (2.0 * kMicro);
        const double spread =
            (static_cast<double>(b.best_ask) - static_cast<double>(b.best_bid)) / kMicro;
        out.mid.emplace_back(b.ts, mid);
        out.spread.emplace_back(b.ts, spread);

        while (!window.empty() && b.ts - window.front().first > window_seconds) window.pop_front();
        window.emplace_back(b.ts, mid);
        double lo = mid, hi = mid;
        for (const auto& [ts, m] : window) {
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        if (hi - lo > swing_threshold) {
            out.swings.push_back({b.ts, window.front().second, mid});
            window.clear();
            window.emplace_back(b.ts, mid); // scan restarts at the event
        }
    }
    return out;
}

void adverse_selection_profile_not_implemented() {
    throw std::logic_error(
        "per-address post-fill adverse-selection profiles are not implemented in this release");
}

// --------------------------------------------------------------------------
// ILS
// --------------------------------------------------------------------------

bool ils_in_scope(const MarketSeries& series, double scope_threshold) {
    if (!series.resolution_price || series.fills.empty()) return false;
    const double p_res = static_cast<double>(*series.resolution_price) / kMicro;
    return std::abs(p_res - series.open_price()) > scope_threshold;
}

std::array<std::optional<double>, 4> ils_values(const MarketSeries& series,
                                                const std::array<std::int64_t, 4>& anchors) {
    std::array<std::optional<double>, 4> out{};
    if (!series.resolution_price || !series.resolution_ts || series.fills.empty()) return out;
    const double p_open = series.open_price();
    const double p_res = static_cast<double>(*series.resolution_price) / kMicro;
    const double denom = p_res - p_open;
    if (denom == 0) return out;

    for (std::size_t a = 0; a < anchors.size(); ++a) {
        const std::int64_t t_anchor = *series.resolution_ts - anchors[a];
        // Last fill at or before the anchor time.
        auto it = std::upper_bound(series.fills.begin(), series.fills.end(), t_anchor,
                                   [](std::int64_t t, const SeriesFill& f) { return t < f.ts; });
        if (it == series.fills.begin()) continue; // no price at this anchor
        const double p = static_cast<double>(std::prev(it)->price) / kMicro;
        out[a] = clip01((p - p_open) / denom);
    }
    return out;
}

// --------------------------------------------------------------------------
// Panel
// --------------------------------------------------------------------------

const char* to_string(SciScheme s) {
    switch (s) {
        case SciScheme::UNIFORM: return "uniform";
        case SciScheme::TOXICITY: return "toxicity";
        case SciScheme::PERSISTENCE: return "persistence";
    }
    return "uniform";
}

std::array<double, 4> sci_weights(SciScheme s) {
    switch (s) {
        case SciScheme::UNIFORM: return {0.25, 0.25, 0.25, 0.25};
        case SciScheme::TOXICITY: return {0.2, 0.2, 0.2, 0.4};
        case SciScheme::PERSISTENCE: return {0.4, 0.2, 0.2, 0.2};
    }
    return {0.25, 0.25, 0.25, 0.25};
}

const std::array<std::string, kPanelMetrics>& panel_metric_names() {
    static const std::array<std::string, kPanelMetrics> names = {
        "oi_5m",          "oi_15m",          "oi_1h",
        "ofi",            "ts_60m",          "ts_full",
        "pr_60m",         "pr_240m",         "vpin_50",
        "kyle_lambda_w",  "sci_uniform_60m", "sci_uniform_240m",
        "sci_toxicity_60m", "sci_toxicity_240m", "sci_persistence_60m",
        "sci_persistence_240m", "ils_a1",    "ils_a2",
        "ils_a3",         "ils_a4",          "trade_size_kurtosis",
        "hawkes_branching"};
    return names;
}

std::optional<double> MarketMetricsRow::metric(std::size_t i) const {
    switch (i) {
        case 0: return oi_5m;
        case 1: return oi_15m;
        case 2: return oi_1h;
        case 3: return ofi;
        case 4: return ts_60m;
        case 5: return ts_full;
        case 6: return pr_60m;
        case 7: return pr_240m;
        case 8: return vpin_50;
        case 9: return kyle_lambda_winsorized;
        case 10: return sci[0][0];
        case 11: return sci[0][1];
        case 12: return sci[1][0];
        case 13: return sci[1][1];
        case 14: return sci[2][0];
        case 15: return sci[2][1];
        case 16: return ils[0];
        case 17: return ils[1];
        case 18: return ils[2];
        case 19: return ils[3];
        case 20: return kurtosis;
        case 21: return hawkes;
        default: throw std::out_of_range("panel metric index");
    }
}

namespace {

struct SciComponents {
    // [window][component]; windows {60m, 240m}, components {PR, TS, OI, VPIN}.
    std::array<std::array<std::optional<double>, 4>, 2> value{};
};

} // namespace

PanelResult compute_panel(const std::vector<MarketSeries>& series, const PanelConfig& cfg) {
    PanelResult out;
    out.rows.resize(series.size());
    std::vector<SciComponents> comps(series.size());

    // Phase 1: per-market metrics, parallel.
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(series.size()); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto& s = series[i];
        auto& row = out.rows[i];
        row.market_token = s.market_token;
        row.fill_count = s.fills.size();
        for (const auto& f : s.fills) row.notional_total += f.notional;

        row.oi_5m = order_imbalance(s, 300);
        row.oi_15m = order_imbalance(s, 900);
        row.oi_1h = order_imbalance(s, 3600);
        row.ofi = order_flow_imbalance(s);
        row.ts_60m = two_sidedness(s, 3600);
        row.ts_full = two_sidedness(s, 0);
        row.pr_60m = persistence_ratio(s, 3600);
        row.pr_240m = persistence_ratio(s, 14400);
        row.vpin_50 = vpin(s, cfg.vpin_buckets);
        row.kyle_lambda_raw = kyle_lambda(s, cfg.kyle_bin_seconds).raw;
        row.kurtosis = trade_size_kurtosis(s);
        const HawkesFit hf = hawkes_branching(s, cfg.hawkes_seed, cfg.hawkes_min_events);
        row.hawkes = hf.eta;
        row.ils = ils_values(s, cfg.ils_anchors);
        row.ils_in_scope = ils_in_scope(s, cfg.ils_scope_threshold);

        comps[i].value[0] = {row.pr_60m, row.ts_60m, row.oi_1h, row.vpin_50};
        comps[i].value[1] = {row.pr_240m, two_sidedness(s, 14400), order_imbalance(s, 14400),
                             row.vpin_50};
    }

    // Phase 2: cross-market fits, sequential.
    std::vector<double> raw;
    for (const auto& r : out.rows)
        if (r.kyle_lambda_raw) raw.push_back(*r.kyle_lambda_raw);
    if (!raw.empty())
        out.kyle_winsor = fit_winsor(raw, cfg.winsor_lower_q, cfg.winsor_upper_q);

    std::array<std::array<std::pair<double, double>, 4>, 2> zstats{}; // (mean, std), std 0 => drop
    for (std::size_t w = 0; w < 2; ++w) {
        for (std::size_t c = 0; c < 4; ++c) {
            std::vector<double> vals;
            for (const auto& cc : comps)
                if (cc.value[w][c]) vals.push_back(*cc.value[w][c]);
            if (vals.size() < 2) {
                zstats[w][c] = {0.0, 0.0};
                continue;
            }
            zstats[w][c] = {stats::mean(vals), stats::sample_std(vals)};
        }
    }

    // Phase 3: re-application, parallel.
    std::uint64_t outliers = 0;
#pragma omp parallel for schedule(static) reduction(+ : outliers)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(out.rows.size()); ++ii) {
        auto& row = out.rows[static_cast<std::size_t>(ii)];
        if (row.kyle_lambda_raw) {
            const double v = *row.kyle_lambda_raw;
            row.kyle_outlier = v < out.kyle_winsor.lo || v > out.kyle_winsor.hi;
            if (row.kyle_outlier) ++outliers;
            row.kyle_lambda_winsorized = std::clamp(v, out.kyle_winsor.lo, out.kyle_winsor.hi);
        }
        const auto& cc = comps[static_cast<std::size_t>(ii)];
        for (std::size_t scheme = 0; scheme < 3; ++scheme) {
            const auto weights = sci_weights(static_cast<SciScheme>(scheme));
            for (std::size_t w = 0; w < 2; ++w) {
                double acc = 0, wsum = 0;
                for (std::size_t c = 0; c < 4; ++c) {
                    if (!cc.value[w][c] || zstats[w][c].second <= 0) continue;
                    const double z = (*cc.value[w][c] - zstats[w][c].first) / zstats[w][c].second;
                    acc += weights[c] * z;
                    wsum += weights[c];
                }
                if (wsum > 0) row.sci[scheme][w] = acc / wsum * 1.0; // renormalized weights sum to 1
            }
        }
    }
    out.kyle_winsor.outlier_count = outliers;
    return out;
}

// --------------------------------------------------------------------------
// Metrics table
// --------------------------------------------------------------------------

namespace {

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", *v);
    return buf;
}

std::optional<double> parse_opt(const std::string& s) {
    if (s == "null") return std::nullopt;
    return std::stod(s);
}

} // namespace

void write_metrics_table(const PanelResult& panel, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write metrics table: " + path);
    out << "market_token\tfill_count\tnotional_total";
    for (const auto& name : panel_metric_names()) out << '\t' << name;
    out << "\tkyle_lambda_raw\tkyle_outlier\tils_in_scope\n";
    for (const auto& r : panel.rows) {
        out << r.market_token << '\t' << r.fill_count << '\t' << format_micro(r.notional_total);
        for (std::size_t i = 0; i < kPanelMetrics; ++i) out << '\t' << fmt_opt(r.metric(i));
        out << '\t' << fmt_opt(r.kyle_lambda_raw) << '\t' << (r.kyle_outlier ? 1 : 0) << '\t'
            << (r.ils_in_scope ? 1 : 0) << '\n';
    }
}

std::vector<MarketMetricsRow> read_metrics_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty metrics table");
    std::vector<MarketMetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, '\t')) f.push_back(tok);
        if (f.size() != 3 + kPanelMetrics + 3) throw std::runtime_error("bad metrics row width");
        MarketMetricsRow r;
        r.market_token = f[0];
        r.fill_count = std::stoull(f[1]);
        r.notional_total = parse_micro(f[2]);
        std::size_t col = 3;
        r.oi_5m = parse_opt(f[col++]);
        r.oi_15m = parse_opt(f[col++]);
        r.oi_1h = parse_opt(f[col++]);
        r.ofi = parse_opt(f[col++]);
        r.ts_60m = parse_opt(f[col++]);
        r.ts_full = parse_opt(f[col++]);
        r.pr_60m = parse_opt(f[col++]);
        r.pr_240m = parse_opt(f[col++]);
        r.vpin_50 = parse_opt(f[col++]);
        r.kyle_lambda_winsorized = parse_opt(f[col++]);
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t w = 0; w < 2; ++w) r.sci[s][w] = parse_opt(f[col++]);
        for (std::size_t a = 0; a < 4; ++a) r.ils[a] = parse_opt(f[col++]);
        r.kurtosis = parse_opt(f[col++]);
        r.hawkes = parse_opt(f[col++]);
        r.kyle_lambda_raw = parse_opt(f[col++]);
        r.kyle_outlier = f[col++] == "1";
        r.ils_in_scope = f[col++] == "1";
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace fillside::micro
