#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fillside {

// All USDC amounts and prices are 6-decimal fixed point. Floating point
// enters only after aggregation.
using Usdc = std::int64_t;       // micro-USDC
using MicroPrice = std::int64_t; // micro-price, valid range [0, 1'000'000]

inline constexpr std::int64_t kMicro = 1'000'000;

// Side of the taker on the outcome token. The maker is always the
// opposite side of the same fill.
enum class Side : std::uint8_t { BUY, SELL };

inline Side opposite(Side s) { return s == Side::BUY ? Side::SELL : Side::BUY; }
inline const char* to_string(Side s) { return s == Side::BUY ? "BUY" : "SELL"; }

// One decoded executed order.
struct FillRecord {
    std::uint64_t block_number = 0;
    std::string tx_hash;       // 0x + 64 lowercase hex
    std::uint32_t log_index = 0;
    std::string maker;         // 0x + 40 lowercase hex
    std::string taker;
    std::string market_token;  // decimal string of the outcome-token id
    Side side = Side::BUY;     // taker perspective
    MicroPrice price = 0;
    Usdc notional = 0;
    std::int64_t timestamp = 0; // UTC seconds
};

// Canonical corpus order: (block_number, log_index).
inline bool corpus_order(const FillRecord& a, const FillRecord& b) {
    if (a.block_number != b.block_number) return a.block_number < b.block_number;
    return a.log_index < b.log_index;
}

enum class BookGranularity : std::uint8_t { NONE, MARKET_LEVEL, ADDRESS_LEVEL };

const char* to_string(BookGranularity g);
BookGranularity book_granularity_from_string(const std::string& s);

// Declared in the corpus header, never sniffed from the sample: absence of
// quote events in a window cannot distinguish "venue lacks them" from
// "none occurred".
struct CorpusCapabilities {
    bool has_fill_attribution = true;
    bool has_quote_lifecycle = false;
    bool has_book_snapshots = false;
    BookGranularity book_granularity = BookGranularity::NONE;
};

struct Corpus {
    CorpusCapabilities caps;
    std::vector<FillRecord> records;
};

std::string format_micro(std::int64_t micro); // 500000 -> "0.500000"
std::int64_t parse_micro(const std::string& s);

} // namespace fillside
