#include "fillside/digest.hpp"
#include "fillside/hex.hpp"
#include "fillside/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fillside {

const char* to_string(BookGranularity g) {
    switch (g) {
        case BookGranularity::NONE: return "NONE";
        case BookGranularity::MARKET_LEVEL: return "MARKET_LEVEL";
        case BookGranularity::ADDRESS_LEVEL: return "ADDRESS_LEVEL";
    }
    return "NONE";
}

BookGranularity book_granularity_from_string(const std::string& s) {
    if (s == "MARKET_LEVEL") return BookGranularity::MARKET_LEVEL;
    if (s == "ADDRESS_LEVEL") return BookGranularity::ADDRESS_LEVEL;
    if (s == "NONE") return BookGranularity::NONE;
    throw std::invalid_argument("unknown book granularity: " + s);
}

std::string format_micro(std::int64_t micro) {
    const bool neg = micro < 0;
    const std::uint64_t abs = neg ? static_cast<std::uint64_t>(-micro) : static_cast<std::uint64_t>(micro);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s%llu.%06llu", neg ? "-" : "",
                  static_cast<unsigned long long>(abs / kMicro),
                  static_cast<unsigned long long>(abs % kMicro));
    return buf;
}

std::int64_t parse_micro(const std::string& s) {
    const bool neg = !s.empty() && s[0] == '-';
    const std::string body = neg ? s.substr(1) : s;
    const auto dot = body.find('.');
    const std::string ip = dot == std::string::npos ? body : body.substr(0, dot);
    std::string fp = dot == std::string::npos ? "" : body.substr(dot + 1);
    if (fp.size() > 6) throw std::invalid_argument("more than 6 decimals: " + s);
    fp.resize(6, '0');
    std::int64_t whole = 0, frac = 0;
    auto rc1 = std::from_chars(ip.data(), ip.data() + ip.size(), whole);
    auto rc2 = std::from_chars(fp.data(), fp.data() + fp.size(), frac);
    if (rc1.ec != std::errc{} || rc2.ec != std::errc{})
        throw std::invalid_argument("bad fixed-point value: " + s);
    const std::int64_t v = whole * kMicro + frac;
    return neg ? -v : v;
}

} // namespace fillside

namespace fillside::ingest {

using nlohmann::json;

void LogFilterSpec::validate() const {
    if (from_block > to_block) throw std::invalid_argument("from_block > to_block");
    if (chunk_size < 1) throw std::invalid_argument("chunk_size must be >= 1");
    if (!hex::is_hex_string(contract_address, 40))
        throw std::invalid_argument("contract_address must be 40 hex chars");
    if (!event_topic.empty() && !hex::is_hex_string(event_topic, 64))
        throw std::invalid_argument("event_topic must be 64 hex chars");
}

const char* to_string(QuarantineReason r) {
    switch (r) {
        case QuarantineReason::UNKNOWN_ASSET_PAIR: return "unknown_asset_pair";
        case QuarantineReason::ZERO_TOKEN_AMOUNT: return "zero_token_amount";
        case QuarantineReason::MALFORMED_DATA: return "malformed_data";
        case QuarantineReason::PRICE_OUT_OF_RANGE: return "price_out_of_range";
    }
    return "unknown";
}

std::string DecodeRule::topic0() const {
    return "0x" + hex::keccak256_hex(event_signature);
}

DecodeOutcome decode_fill(const RawLogEntry& entry, const DecodeRule& rule) {
    DecodeOutcome out;
    // topics: [topic0, orderHash, maker, taker]; data: 5 x 32-byte words.
    if (entry.topics.size() < 4 || entry.data.size() < 5 * 32) {
        out.quarantine = QuarantineReason::MALFORMED_DATA;
        return out;
    }

    const auto word = [&](std::size_t i) {
        return std::span<const std::uint8_t>(entry.data).subspan(i * 32, 32);
    };

    std::uint64_t maker_amount = 0, taker_amount = 0;
    if (!hex::word_to_u64(word(rule.maker_amount_word), maker_amount) ||
        !hex::word_to_u64(word(rule.taker_amount_word), taker_amount)) {
        out.quarantine = QuarantineReason::MALFORMED_DATA;
        return out;
    }

    const auto maker_asset = word(rule.maker_asset_word);
    const auto taker_asset = word(rule.taker_asset_word);
    const bool maker_is_collateral = hex::is_zero_word(maker_asset);
    const bool taker_is_collateral = hex::is_zero_word(taker_asset);
    if (maker_is_collateral == taker_is_collateral) {
        // Both collateral (degenerate) or neither: no USDC leg to anchor price.
        out.quarantine = QuarantineReason::UNKNOWN_ASSET_PAIR;
        return out;
    }

    // The collateral leg fixes notional; price = collateral / token. The party
    // paying collateral is the buyer of the outcome token.
    const std::uint64_t collateral_amount = maker_is_collateral ? maker_amount : taker_amount;
    const std::uint64_t token_amount = maker_is_collateral ? taker_amount : maker_amount;
    if (token_amount == 0) {
        out.quarantine = QuarantineReason::ZERO_TOKEN_AMOUNT;
        return out;
    }

    const auto price_u128 =
        (static_cast<unsigned __int128>(collateral_amount) * kMicro + token_amount / 2) / token_amount;
    if (price_u128 > static_cast<unsigned __int128>(kMicro)) {
        out.quarantine = QuarantineReason::PRICE_OUT_OF_RANGE;
        return out;
    }

    FillRecord rec;
    rec.block_number = entry.block_number;
    rec.tx_hash = entry.tx_hash;
    rec.log_index = entry.log_index;
    rec.maker = hex::topic_to_address(std::span<const std::uint8_t>(hex::from_hex(entry.topics[2])));
    rec.taker = hex::topic_to_address(std::span<const std::uint8_t>(hex::from_hex(entry.topics[3])));
    rec.market_token = hex::word_to_decimal(maker_is_collateral ? taker_asset : maker_asset);
    // Maker paying collateral means the taker delivers tokens: taker SELL.
    rec.side = maker_is_collateral ? Side::SELL : Side::BUY;
    rec.price = static_cast<MicroPrice>(price_u128);
    rec.notional = static_cast<Usdc>(collateral_amount);
    rec.timestamp = entry.timestamp.value_or(0);
    out.record = rec;
    return out;
}

ExclusionResult exclude_venue(std::vector<FillRecord> records, const std::string& venue_address) {
    if (!hex::is_hex_string(venue_address, 40))
        throw std::invalid_argument("venue address must be 40 hex chars");
    std::string venue = venue_address;
    std::transform(venue.begin(), venue.end(), venue.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (venue.rfind("0x", 0) != 0) venue = "0x" + venue;

    ExclusionResult out;
    out.records.reserve(records.size());
    for (auto& r : records) {
        if (r.maker == venue || r.taker == venue) {
            ++out.removed;
        } else {
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Block timestamps
// --------------------------------------------------------------------------

BlockTimeTable BlockTimeTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open block-time table: " + path);
    std::vector<std::pair<std::uint64_t, std::int64_t>> anchors;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::uint64_t block;
        std::int64_t ts;
        if (ss >> block >> ts) anchors.emplace_back(block, ts);
    }
    return from_anchors(std::move(anchors));
}

BlockTimeTable BlockTimeTable::from_anchors(std::vector<std::pair<std::uint64_t, std::int64_t>> anchors) {
    if (anchors.empty()) throw std::invalid_argument("block-time table needs >= 1 anchor");
    std::sort(anchors.begin(), anchors.end());
    BlockTimeTable t;
    t.anchors_ = std::move(anchors);
    return t;
}

std::int64_t BlockTimeTable::timestamp_for(std::uint64_t block) {
    auto it = std::lower_bound(anchors_.begin(), anchors_.end(), block,
                               [](const auto& a, std::uint64_t b) { return a.first < b; });
    if (it != anchors_.end() && it->first == block) return it->second;
    if (anchors_.size() == 1) return anchors_.front().second;

    // Interpolate between surrounding anchors; extrapolate from the nearest pair.
    const auto* lo = &anchors_.front();
    const auto* hi = &anchors_[1];
    if (it == anchors_.end()) {
        lo = &anchors_[anchors_.size() - 2];
        hi = &anchors_.back();
    } else if (it != anchors_.begin()) {
        hi = &*it;
        lo = &*(it - 1);
    }
    const double slope = static_cast<double>(hi->second - lo->second) /
                         static_cast<double>(hi->first - lo->first);
    return lo->second +
           static_cast<std::int64_t>(slope * (static_cast<double>(block) - static_cast<double>(lo->first)));
}

// --------------------------------------------------------------------------
// Corpus files
// --------------------------------------------------------------------------

std::string record_line(const FillRecord& r) {
    std::string line;
    line += std::to_string(r.block_number);
    line += '\t';
    line += r.tx_hash;
    line += '\t';
    line += std::to_string(r.log_index);
    line += '\t';
    line += r.maker;
    line += '\t';
    line += r.taker;
    line += '\t';
    line += r.market_token;
    line += '\t';
    line += to_string(r.side);
    line += '\t';
    line += format_micro(r.price);
    line += '\t';
    line += format_micro(r.notional);
    line += '\t';
    line += std::to_string(r.timestamp);
    return line;
}

namespace {

FillRecord parse_record_line(const std::string& line) {
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t') {
            f.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (f.size() != 10) throw CorruptCorpus("bad field count in corpus line");
    FillRecord r;
    r.block_number = std::stoull(f[0]);
    r.tx_hash = f[1];
    r.log_index = static_cast<std::uint32_t>(std::stoul(f[2]));
    r.maker = f[3];
    r.taker = f[4];
    r.market_token = f[5];
    if (f[6] == "BUY")
        r.side = Side::BUY;
    else if (f[6] == "SELL")
        r.side = Side::SELL;
    else
        throw CorruptCorpus("bad side in corpus line: " + f[6]);
    r.price = parse_micro(f[7]);
    r.notional = parse_micro(f[8]);
    r.timestamp = std::stoll(f[9]);
    if (r.price < 0 || r.price > kMicro) throw CorruptCorpus("price outside [0,1]");
    if (r.notional < 0) throw CorruptCorpus("negative notional");
    return r;
}

std::string header_line(const CorpusCapabilities& caps) {
    std::string h = "#";
    h += kCorpusSchemaVersion;
    h += "\tfill_attribution=";
    h += caps.has_fill_attribution ? '1' : '0';
    h += "\tquote_lifecycle=";
    h += caps.has_quote_lifecycle ? '1' : '0';
    h += "\tbook_snapshots=";
    h += caps.has_book_snapshots ? '1' : '0';
    h += "\tbook_granularity=";
    h += to_string(caps.book_granularity);
    return h;
}

CorpusCapabilities parse_header(const std::string& line) {
    if (line.rfind("#" + std::string(kCorpusSchemaVersion), 0) != 0)
        throw CorruptCorpus("missing or unknown corpus header");
    CorpusCapabilities caps;
    std::istringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "fill_attribution") caps.has_fill_attribution = val == "1";
        if (key == "quote_lifecycle") caps.has_quote_lifecycle = val == "1";
        if (key == "book_snapshots") caps.has_book_snapshots = val == "1";
        if (key == "book_granularity") caps.book_granularity = book_granularity_from_string(val);
    }
    if (caps.has_book_snapshots && caps.book_granularity == BookGranularity::NONE)
        throw CorruptCorpus("book_snapshots declared without granularity");
    return caps;
}

} // namespace

std::string corpus_content_hash(const std::vector<FillRecord>& records) {
    std::vector<const FillRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const FillRecord* a, const FillRecord* b) { return corpus_order(*a, *b); });
    digest::Sha256 h;
    for (const auto* r : sorted) {
        h.update(record_line(*r));
        h.update(std::string(1, '\n'));
    }
    return h.finish_hex();
}

IngestManifest write_corpus(const Corpus& corpus, const std::string& path,
                            const std::string& input_descriptor, const std::string& filter_json) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<FillRecord> sorted = corpus.records;
    std::sort(sorted.begin(), sorted.end(), corpus_order);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write corpus: " + path);
    out << header_line(corpus.caps) << '\n';
    digest::Sha256 h;
    for (const auto& r : sorted) {
        const std::string line = record_line(r);
        h.update(line);
        h.update(std::string(1, '\n'));
        out << line << '\n';
    }
    out.close();

    IngestManifest m;
    m.input_descriptor = input_descriptor;
    m.filter_json = filter_json;
    m.record_count = sorted.size();
    m.content_hash = h.finish_hex();
    m.parameter_hash = digest::sha256_hex(filter_json);
    m.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

Corpus read_corpus(const std::string& path, const std::string& expected_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus: " + path);
    std::string line;
    if (!std::getline(in, line)) throw CorruptCorpus("empty corpus file");
    Corpus c;
    c.caps = parse_header(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        c.records.push_back(parse_record_line(line));
    }
    if (!expected_hash.empty()) {
        const std::string got = corpus_content_hash(c.records);
        if (got != expected_hash)
            throw CorruptCorpus("content hash mismatch: expected " + expected_hash + ", got " + got);
    }
    return c;
}

void write_manifest(const IngestManifest& m, const std::string& path) {
    json j;
    j["input_descriptor"] = m.input_descriptor;
    j["filter"] = json::parse(m.filter_json.empty() ? "{}" : m.filter_json);
    j["record_count"] = m.record_count;
    j["quarantined_count"] = m.quarantined_count;
    j["venue_excluded_count"] = m.venue_excluded_count;
    j["content_hash"] = m.content_hash;
    j["parameter_hash"] = m.parameter_hash;
    j["wall_time_seconds"] = m.wall_time_seconds;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

IngestManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    json j = json::parse(in);
    IngestManifest m;
    m.input_descriptor = j.value("input_descriptor", "");
    m.filter_json = j.contains("filter") ? j["filter"].dump() : "{}";
    m.record_count = j.value("record_count", 0ull);
    m.quarantined_count = j.value("quarantined_count", 0ull);
    m.venue_excluded_count = j.value("venue_excluded_count", 0ull);
    m.content_hash = j.value("content_hash", "");
    m.parameter_hash = j.value("parameter_hash", "");
    m.wall_time_seconds = j.value("wall_time_seconds", 0.0);
    return m;
}

void append_quarantine(const std::string& corpus_path, const RawLogEntry& entry,
                       QuarantineReason reason) {
    std::ofstream out(corpus_path + ".quarantine", std::ios::app);
    json j;
    j["blockNumber"] = entry.block_number;
    j["transactionHash"] = entry.tx_hash;
    j["logIndex"] = entry.log_index;
    j["topics"] = entry.topics;
    j["data"] = hex::to_lower_hex(entry.data);
    j["reason"] = to_string(reason);
    out << j.dump() << '\n';
}

IngestResult build_corpus(const std::vector<RawLogEntry>& entries, const DecodeRule& rule,
                          const std::string& venue_address, BlockTimeSource* block_times,
                          std::uint64_t& venue_removed) {
    IngestResult out;
    std::vector<FillRecord> decoded;
    decoded.reserve(entries.size());
    for (const auto& e : entries) {
        auto d = decode_fill(e, rule);
        if (d.quarantine) {
            out.quarantined.emplace_back(e, *d.quarantine);
            continue;
        }
        FillRecord r = std::move(*d.record);
        if (!e.timestamp && block_times) r.timestamp = block_times->timestamp_for(r.block_number);
        decoded.push_back(std::move(r));
    }
    auto excl = exclude_venue(std::move(decoded), venue_address);
    venue_removed = excl.removed;
    std::sort(excl.records.begin(), excl.records.end(), corpus_order);
    out.corpus.records = std::move(excl.records);
    out.corpus.caps = CorpusCapabilities{true, false, false, BookGranularity::NONE};
    return out;
}

} // namespace fillside::ingest
