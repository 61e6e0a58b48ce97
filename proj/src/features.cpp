#include "fillside/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fillside::features {

using nlohmann::json;

void AddressAggregate::add(const FillRecord& fill, Side side_for_this_party) {
    if (n_fills == 0) {
        first_ts = fill.timestamp;
        last_ts = fill.timestamp;
    } else {
        first_ts = std::min(first_ts, fill.timestamp);
        last_ts = std::max(last_ts, fill.timestamp);
    }
    ++n_fills;
    if (side_for_this_party == Side::BUY)
        buy_volume += fill.notional;
    else
        sell_volume += fill.notional;
    total_notional += fill.notional;
    ++per_market_fill_counts[fill.market_token];
    per_market_notional[fill.market_token] += fill.notional;
    const std::int64_t hour_id = fill.timestamp / 3600 - (fill.timestamp % 3600 < 0 ? 1 : 0);
    active_hour_set.insert(hour_id);
    const auto hod = static_cast<std::size_t>(((hour_id % 24) + 24) % 24);
    ++hourly_histogram[hod];
}

void AddressAggregate::merge(const AddressAggregate& other) {
    if (other.n_fills == 0) return;
    if (n_fills == 0) {
        first_ts = other.first_ts;
        last_ts = other.last_ts;
    } else {
        first_ts = std::min(first_ts, other.first_ts);
        last_ts = std::max(last_ts, other.last_ts);
    }
    n_fills += other.n_fills;
    buy_volume += other.buy_volume;
    sell_volume += other.sell_volume;
    total_notional += other.total_notional;
    for (const auto& [m, c] : other.per_market_fill_counts) per_market_fill_counts[m] += c;
    for (const auto& [m, v] : other.per_market_notional) per_market_notional[m] += v;
    for (std::size_t h = 0; h < 24; ++h) hourly_histogram[h] += other.hourly_histogram[h];
    active_hour_set.insert(other.active_hour_set.begin(), other.active_hour_set.end());
}

void apply_fill(AggregateMap& aggregates, const FillRecord& fill) {
    auto& taker = aggregates[fill.taker];
    if (taker.address.empty()) taker.address = fill.taker;
    taker.add(fill, fill.side);

    auto& maker = aggregates[fill.maker];
    if (maker.address.empty()) maker.address = fill.maker;
    maker.add(fill, opposite(fill.side));
}

AggregateMap merge(AggregateMap a, const AggregateMap& b) {
    for (const auto& [addr, agg] : b) {
        auto it = a.find(addr);
        if (it == a.end()) {
            a.emplace(addr, agg);
        } else {
            it->second.merge(agg);
        }
    }
    return a;
}

namespace {

// Thread-local partials only pay when addresses repeat heavily; with
// near-unique counterparties the merge costs more than the fold saves.
bool high_address_cardinality(const std::vector<FillRecord>& records) {
    const std::size_t sample = std::min<std::size_t>(records.size(), 4096);
    std::set<std::string> distinct;
    for (std::size_t i = 0; i < sample; ++i) {
        distinct.insert(records[i].taker);
        distinct.insert(records[i].maker);
    }
    return distinct.size() > sample;
}

} // namespace

AggregateMap aggregate(const std::vector<FillRecord>& records) {
#ifdef _OPENMP
    const int n_threads = omp_get_max_threads();
#else
    const int n_threads = 1;
#endif
    if (n_threads <= 1 || records.size() < 65536 || high_address_cardinality(records)) {
        AggregateMap out;
        for (const auto& r : records) apply_fill(out, r);
        return out;
    }
    // Partial maps per fill slice; all updates are integer or set unions, so
    // the merged result is bit-identical to the sequential pass.
    std::vector<AggregateMap> partial(static_cast<std::size_t>(n_threads));
#pragma omp parallel num_threads(n_threads)
    {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        auto& local = partial[static_cast<std::size_t>(tid)];
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i)
            apply_fill(local, records[static_cast<std::size_t>(i)]);
    }
    AggregateMap out = std::move(partial[0]);
    for (std::size_t t = 1; t < partial.size(); ++t) out = merge(std::move(out), partial[t]);
    return out;
}

FilterResult activity_filter(AggregateMap aggregates, std::uint64_t min_fills) {
    if (min_fills < 1) throw std::invalid_argument("min_fills must be >= 1");
    FilterResult out;
    for (auto it = aggregates.begin(); it != aggregates.end();) {
        if (it->second.n_fills < min_fills) {
            it = aggregates.erase(it);
            ++out.removed;
        } else {
            ++it;
        }
    }
    out.survivors = aggregates.size();
    out.aggregates = std::move(aggregates);
    return out;
}

FeatureVector compute_features(const AddressAggregate& agg, const FeatureOptions& opts) {
    if (agg.n_fills < 1) throw std::invalid_argument("compute_features needs n_fills >= 1");
    FeatureVector f;
    const double n = static_cast<double>(agg.n_fills);
    const double hours = static_cast<double>(agg.active_hours());
    f.f2 = std::log1p(n / hours);

    const double mean_notional =
        static_cast<double>(agg.total_notional) / static_cast<double>(kMicro) / n;
    if (mean_notional > 0) {
        f.f3 = std::log10(mean_notional);
    } else {
        f.f3 = std::log10(1.0 + mean_notional);
        f.degenerate_notional = true;
    }

    const double vb = static_cast<double>(agg.buy_volume);
    const double vs = static_cast<double>(agg.sell_volume);
    f.f5 = (vb + vs) > 0 ? (vb - vs) / (vb + vs) : 0.0;

    if (opts.notional_weighted_hhi) {
        const double total = static_cast<double>(agg.total_notional);
        double hhi = 0;
        for (const auto& [m, v] : agg.per_market_notional) {
            const double s = static_cast<double>(v) / total;
            hhi += s * s;
        }
        f.f6 = hhi;
    } else {
        double hhi = 0;
        for (const auto& [m, c] : agg.per_market_fill_counts) {
            const double s = static_cast<double>(c) / n;
            hhi += s * s;
        }
        f.f6 = hhi;
    }

    double entropy = 0;
    for (std::uint64_t c : agg.hourly_histogram) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        entropy -= p * std::log(p);
    }
    f.f7 = entropy;

    f.f9 = std::log1p(static_cast<double>(agg.n_markets()));
    return f;
}

// --------------------------------------------------------------------------
// Scaler
// --------------------------------------------------------------------------

namespace {

double nearest_rank(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    rank = std::clamp<std::size_t>(rank, 1, xs.size());
    return xs[rank - 1];
}

} // namespace

ScalerState fit_scaler(const std::vector<std::array<double, kNumFeatures>>& rows, ScalerMode mode,
                       double winsor_quantile) {
    if (rows.size() < 2) throw DegenerateFeature("fit_scaler needs >= 2 rows");
    ScalerState st;
    st.mode = mode;
    st.winsor_quantile = winsor_quantile;
    st.sample_size = rows.size();
    const double n = static_cast<double>(rows.size());

    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        std::vector<double> col(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][k];

        if (mode == ScalerMode::ROBUST) {
            std::vector<double> sorted = col;
            std::sort(sorted.begin(), sorted.end());
            const auto at = [&](double q) {
                std::size_t r = static_cast<std::size_t>(std::ceil(q * n));
                r = std::clamp<std::size_t>(r, 1, sorted.size());
                return sorted[r - 1];
            };
            st.cap[k] = sorted.back();
            st.center[k] = at(0.5);
            st.scale[k] = at(0.75) - at(0.25);
            if (st.scale[k] <= 0)
                throw DegenerateFeature(std::string("zero IQR for feature ") + kFeatureNames[k]);
            continue;
        }

        const double cap = nearest_rank(col, winsor_quantile);
        for (auto& x : col) x = std::min(x, cap);
        double m = 0;
        for (double x : col) m += x;
        m /= n;
        double ss = 0;
        for (double x : col) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / (n - 1.0));
        if (sd <= 0)
            throw DegenerateFeature(std::string("zero variance for feature ") + kFeatureNames[k]);
        st.cap[k] = cap;
        st.center[k] = m;
        st.scale[k] = sd;
    }
    return st;
}

std::array<double, kNumFeatures> apply_scaler(const ScalerState& st,
                                              const std::array<double, kNumFeatures>& raw) {
    std::array<double, kNumFeatures> out{};
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const double x = st.mode == ScalerMode::WINSOR_Z ? std::min(raw[k], st.cap[k]) : raw[k];
        out[k] = (x - st.center[k]) / st.scale[k];
    }
    return out;
}

std::string ScalerState::to_json() const {
    json j;
    j["mode"] = mode == ScalerMode::WINSOR_Z ? "winsor_z" : "robust";
    j["winsor_quantile"] = winsor_quantile;
    j["sample_size"] = sample_size;
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        json f;
        f["cap"] = cap[k];
        f["center"] = center[k];
        f["scale"] = scale[k];
        j["features"][kFeatureNames[k]] = f;
    }
    return j.dump(2);
}

ScalerState ScalerState::from_json(const std::string& text) {
    json j = json::parse(text);
    ScalerState st;
    st.mode = j.value("mode", "winsor_z") == "robust" ? ScalerMode::ROBUST : ScalerMode::WINSOR_Z;
    st.winsor_quantile = j.value("winsor_quantile", 0.995);
    st.sample_size = j.value("sample_size", 0ull);
    for (std::size_t k = 0; k < kNumFeatures; ++k) {
        const auto& f = j["features"][kFeatureNames[k]];
        st.cap[k] = f["cap"].get<double>();
        st.center[k] = f["center"].get<double>();
        st.scale[k] = f["scale"].get<double>();
    }
    return st;
}

// --------------------------------------------------------------------------
// Feature table
// --------------------------------------------------------------------------

std::map<std::string, Usdc> market_notional_totals(const std::vector<FillRecord>& records) {
    std::map<std::string, Usdc> totals;
    for (const auto& r : records) totals[r.market_token] += r.notional;
    return totals;
}

std::vector<FeatureRow> build_feature_rows(const AggregateMap& aggregates,
                                           const std::map<std::string, Usdc>& market_totals,
                                           const ScalerState& scaler, const FeatureOptions& opts) {
    std::vector<FeatureRow> rows;
    rows.reserve(aggregates.size());
    for (const auto& [addr, agg] : aggregates) {
        FeatureRow row;
        row.address = addr;
        row.n_fills = agg.n_fills;
        row.active_hours = agg.active_hours();
        row.n_markets = agg.n_markets();
        row.buy_volume = agg.buy_volume;
        row.sell_volume = agg.sell_volume;
        row.total_notional = agg.total_notional;
        double max_share = 0;
        for (const auto& [m, v] : agg.per_market_notional) {
            auto it = market_totals.find(m);
            if (it == market_totals.end() || it->second <= 0) continue;
            max_share = std::max(max_share, static_cast<double>(v) / static_cast<double>(it->second));
        }
        row.max_market_share = max_share;
        row.raw = compute_features(agg, opts).as_array();
        row.scaled = apply_scaler(scaler, row.raw);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {
constexpr const char* kTableHeader =
    "address\tn_fills\tactive_hours\tn_markets\tbuy_volume\tsell_volume\ttotal_notional\t"
    "max_market_share\tf2\tf3\tf5\tf6\tf7\tf9\tz2\tz3\tz5\tz6\tz7\tz9";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}
} // namespace

void write_feature_table(const std::vector<FeatureRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write feature table: " + path);
    out << kTableHeader << '\n';
    for (const auto& r : rows) {
        out << r.address << '\t' << r.n_fills << '\t' << r.active_hours << '\t' << r.n_markets << '\t'
            << format_micro(r.buy_volume) << '\t' << format_micro(r.sell_volume) << '\t'
            << format_micro(r.total_notional) << '\t' << fmt(r.max_market_share);
        for (double v : r.raw) out << '\t' << fmt(v);
        for (double v : r.scaled) out << '\t' << fmt(v);
        out << '\n';
    }
}

std::vector<FeatureRow> read_feature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty feature table");
    std::vector<FeatureRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> f;
        std::string tok;
        while (std::getline(ss, tok, '\t')) f.push_back(tok);
        if (f.size() != 20) throw std::runtime_error("bad feature-table row width");
        FeatureRow r;
        r.address = f[0];
        r.n_fills = std::stoull(f[1]);
        r.active_hours = std::stoull(f[2]);
        r.n_markets = std::stoull(f[3]);
        r.buy_volume = parse_micro(f[4]);
        r.sell_volume = parse_micro(f[5]);
        r.total_notional = parse_micro(f[6]);
        r.max_market_share = std::stod(f[7]);
        for (std::size_t k = 0; k < kNumFeatures; ++k) r.raw[k] = std::stod(f[8 + k]);
        for (std::size_t k = 0; k < kNumFeatures; ++k) r.scaled[k] = std::stod(f[14 + k]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace fillside::features
