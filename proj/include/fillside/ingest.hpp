#pragma once

#include "fillside/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fillside::ingest {

// Default venue: the CTFExchange contract on Polygon.
inline constexpr const char* kDefaultContract = "0x4bfb41d5b3570defd03c39a9a4d8de6bd8b8982e";
// Event signature for the shipped decode rule; topic0 is derived from it at
// runtime. Verify against the deployed contract before live runs.
inline constexpr const char* kOrderFilledSignature =
    "OrderFilled(bytes32,address,address,uint256,uint256,uint256,uint256,uint256)";

struct LogFilterSpec {
    std::string contract_address = kDefaultContract;
    std::uint64_t from_block = 0;
    std::uint64_t to_block = 0;
    std::string event_topic; // 0x + 64 hex; empty -> derived from signature
    std::uint64_t chunk_size = 2000;

    void validate() const; // throws std::invalid_argument on violated invariants
};

struct RawLogEntry {
    std::uint64_t block_number = 0;
    std::string tx_hash;
    std::uint32_t log_index = 0;
    std::vector<std::string> topics; // 0x + 64 hex each
    std::vector<std::uint8_t> data;
    std::optional<std::int64_t> timestamp; // fixtures may embed it
};

struct IngestManifest {
    std::string input_descriptor;
    std::string filter_json;
    std::uint64_t record_count = 0;
    std::uint64_t quarantined_count = 0;
    std::uint64_t venue_excluded_count = 0;
    std::string content_hash;   // sha256 over the canonical sorted record lines
    std::string parameter_hash; // sha256 over the canonical parameter JSON
    double wall_time_seconds = 0.0;
};

struct AllEndpointsFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MalformedResponse : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CorruptCorpus : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Decoding
// --------------------------------------------------------------------------

enum class QuarantineReason : std::uint8_t {
    UNKNOWN_ASSET_PAIR, // neither leg is the collateral asset
    ZERO_TOKEN_AMOUNT,
    MALFORMED_DATA,     // wrong topic/data layout or oversized amounts
    PRICE_OUT_OF_RANGE,
};
const char* to_string(QuarantineReason r);

struct DecodeRule {
    std::string event_signature = kOrderFilledSignature;
    // Data layout: word indices into the 5-word payload.
    std::size_t maker_asset_word = 0;
    std::size_t taker_asset_word = 1;
    std::size_t maker_amount_word = 2;
    std::size_t taker_amount_word = 3;

    std::string topic0() const; // keccak256 of the signature
};

struct DecodeOutcome {
    std::optional<FillRecord> record;
    std::optional<QuarantineReason> quarantine;
};

// Pure per-entry decode; timestamps are resolved separately.
DecodeOutcome decode_fill(const RawLogEntry& entry, const DecodeRule& rule);

struct ExclusionResult {
    std::vector<FillRecord> records;
    std::uint64_t removed = 0;
};
ExclusionResult exclude_venue(std::vector<FillRecord> records, const std::string& venue_address);

// --------------------------------------------------------------------------
// Block timestamps (logs carry none)
// --------------------------------------------------------------------------

class BlockTimeSource {
public:
    virtual ~BlockTimeSource() = default;
    virtual std::int64_t timestamp_for(std::uint64_t block) = 0;
};

// Table file: one "block<TAB>timestamp" row per line; blocks between anchors
// interpolate linearly, outside extrapolate from the nearest pair.
class BlockTimeTable : public BlockTimeSource {
public:
    static BlockTimeTable from_file(const std::string& path);
    static BlockTimeTable from_anchors(std::vector<std::pair<std::uint64_t, std::int64_t>> anchors);
    std::int64_t timestamp_for(std::uint64_t block) override;

private:
    std::vector<std::pair<std::uint64_t, std::int64_t>> anchors_;
};

// eth_getBlockByNumber lookups with an in-process cache, avoiding per-log
// RPC amplification.
class RpcBlockTimeSource : public BlockTimeSource {
public:
    explicit RpcBlockTimeSource(std::vector<std::string> endpoints, int timeout_seconds = 30);
    std::int64_t timestamp_for(std::uint64_t block) override;

private:
    std::vector<std::string> endpoints_;
    int timeout_seconds_;
    std::unordered_map<std::uint64_t, std::int64_t> cache_;
};

// --------------------------------------------------------------------------
// Corpus files
// --------------------------------------------------------------------------
// UTF-8, header line with schema version and declared capabilities, then one
// record per line with tab-separated fields in declared order. The content
// hash covers the canonical (block, log_index)-sorted record lines only, so
// it is collection-order invariant.

inline constexpr const char* kCorpusSchemaVersion = "fillside-corpus/1";

std::string corpus_content_hash(const std::vector<FillRecord>& records);
std::string record_line(const FillRecord& r);

IngestManifest write_corpus(const Corpus& corpus, const std::string& path,
                            const std::string& input_descriptor = "",
                            const std::string& filter_json = "{}");
Corpus read_corpus(const std::string& path, const std::string& expected_hash = "");

void write_manifest(const IngestManifest& m, const std::string& path);
IngestManifest read_manifest(const std::string& path);

// Quarantine sidecar: raw entries that failed decoding, one JSON per line.
void append_quarantine(const std::string& corpus_path, const RawLogEntry& entry,
                       QuarantineReason reason);

// --------------------------------------------------------------------------
// Log collection
// --------------------------------------------------------------------------

struct FetchOptions {
    int retry_budget = 3;      // per endpoint, per chunk
    int max_in_flight = 4;     // concurrent chunk requests
    int timeout_seconds = 30;
};

using LogSink = std::function<void(RawLogEntry)>;

// Collects every log matching (contract, topic, block range) exactly once.
// On endpoint failure the chunk rotates to the next endpoint; oversized
// chunks (provider-limit errors) are bisected recursively. Results are
// delivered in (block, log_index) order regardless of parallelism.
std::vector<RawLogEntry> fetch_logs(const LogFilterSpec& filter,
                                    const std::vector<std::string>& endpoints,
                                    const FetchOptions& options = {});

// Replays a fixture file (one JSON log entry per line) through the same
// interface as the live path.
std::vector<RawLogEntry> read_fixture_logs(const std::string& path);

struct IngestResult {
    Corpus corpus;
    std::vector<std::pair<RawLogEntry, QuarantineReason>> quarantined;
};

// decode -> venue-exclude -> sort; the exclusion count is reported via the
// manifest written by write_corpus.
IngestResult build_corpus(const std::vector<RawLogEntry>& entries, const DecodeRule& rule,
                          const std::string& venue_address, BlockTimeSource* block_times,
                          std::uint64_t& venue_removed);

} // namespace fillside::ingest
