#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fillside/digest.hpp"
#include "fillside/hex.hpp"
#include "fillside/ingest.hpp"
#include "fillside/stats.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace fillside;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string word_hex(std::uint64_t v) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%064llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string addr_topic(const std::string& addr40) {
    return "0x" + std::string(24, '0') + addr40;
}

ingest::RawLogEntry make_entry(std::uint64_t maker_asset, std::uint64_t taker_asset,
                               std::uint64_t maker_amount, std::uint64_t taker_amount,
                               std::uint64_t block = 100, std::uint32_t log_index = 0) {
    ingest::RawLogEntry e;
    e.block_number = block;
    e.tx_hash = "0x" + word_hex(block * 1000 + log_index);
    e.log_index = log_index;
    e.topics = {ingest::DecodeRule{}.topic0(), "0x" + word_hex(1),
                addr_topic("00000000000000000000000000000000000000aa"),
                addr_topic("00000000000000000000000000000000000000bb")};
    for (std::uint64_t w : {maker_asset, taker_asset, maker_amount, taker_amount,
                            std::uint64_t{0}}) {
        auto bytes = hex::from_hex(word_hex(w));
        e.data.insert(e.data.end(), bytes.begin(), bytes.end());
    }
    e.timestamp = 1766275200 + static_cast<std::int64_t>(block);
    return e;
}

FillRecord make_fill(std::uint64_t block, std::uint32_t idx, const std::string& maker,
                     const std::string& taker, MicroPrice price = 500000, Usdc notional = kMicro) {
    FillRecord r;
    r.block_number = block;
    r.tx_hash = "0x" + word_hex(block * 7 + idx);
    r.log_index = idx;
    r.maker = maker;
    r.taker = taker;
    r.market_token = "42";
    r.side = Side::BUY;
    r.price = price;
    r.notional = notional;
    r.timestamp = 1766275200;
    return r;
}

} // namespace

TEST_CASE("keccak256 known vectors") {
    CHECK(hex::keccak256_hex("") ==
          "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470");
    CHECK(hex::keccak256_hex("abc") ==
          "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45");
    // The canonical ERC-20 Transfer topic, as a cross-check of event-topic
    // derivation from a signature string.
    CHECK(hex::keccak256_hex("Transfer(address,address,uint256)") ==
          "ddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef");
}

TEST_CASE("uint256 word to decimal string") {
    std::vector<std::uint8_t> w(32, 0);
    CHECK(hex::word_to_decimal(w) == "0");
    w[31] = 255;
    CHECK(hex::word_to_decimal(w) == "255");
    // 2^128 = 340282366920938463463374607431768211456
    std::fill(w.begin(), w.end(), 0);
    w[15] = 1;
    CHECK(hex::word_to_decimal(w) == "340282366920938463463374607431768211456");
}

TEST_CASE("decode: collateral maker leg gives taker SELL at collateral/token price") {
    // 0.5 USDC (500000 micro) against 1.0 token (1000000 micro).
    const auto out = ingest::decode_fill(make_entry(0, 777, 500000, 1000000), {});
    REQUIRE(out.record.has_value());
    CHECK(out.record->price == 500000);
    CHECK(out.record->notional == 500000);
    CHECK(out.record->side == Side::SELL);
    CHECK(out.record->market_token == "777");
    CHECK(out.record->maker == "0x00000000000000000000000000000000000000aa");
    CHECK(out.record->taker == "0x00000000000000000000000000000000000000bb");
}

TEST_CASE("decode: collateral taker leg gives taker BUY") {
    const auto out = ingest::decode_fill(make_entry(777, 0, 2000000, 700000), {});
    REQUIRE(out.record.has_value());
    CHECK(out.record->side == Side::BUY);
    CHECK(out.record->notional == 700000);
    // price = 700000 / 2000000 = 0.35
    CHECK(out.record->price == 350000);
}

TEST_CASE("decode: both asset ids nonzero quarantines as unknown pair") {
    const auto out = ingest::decode_fill(make_entry(5, 6, 100, 100), {});
    CHECK(!out.record.has_value());
    CHECK(out.quarantine == ingest::QuarantineReason::UNKNOWN_ASSET_PAIR);
}

TEST_CASE("decode: zero token amount quarantined") {
    const auto out = ingest::decode_fill(make_entry(0, 777, 500000, 0), {});
    CHECK(out.quarantine == ingest::QuarantineReason::ZERO_TOKEN_AMOUNT);
}

TEST_CASE("decode never emits price outside [0,1] when collateral <= token") {
    stats::Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const std::uint64_t token = 1 + rng.uniform_int(1'000'000'000);
        const std::uint64_t collateral = rng.uniform_int(token + 1);
        const auto out = ingest::decode_fill(make_entry(0, 9, collateral, token), {});
        REQUIRE(out.record.has_value());
        CHECK(out.record->price >= 0);
        CHECK(out.record->price <= kMicro);
    }
}

TEST_CASE("decode: price above 1 is quarantined") {
    const auto out = ingest::decode_fill(make_entry(0, 9, 2'000'000, 1'000'000), {});
    CHECK(out.quarantine == ingest::QuarantineReason::PRICE_OUT_OF_RANGE);
}

TEST_CASE("venue exclusion removes both maker- and taker-side hits") {
    const std::string venue = "0x4bfb41d5b3570defd03c39a9a4d8de6bd8b8982e";
    std::vector<FillRecord> records;
    for (std::uint32_t i = 0; i < 7; ++i)
        records.push_back(make_fill(1, i, "0x" + std::string(39, '0') + "1",
                                    "0x" + std::string(39, '0') + "2"));
    records.push_back(make_fill(2, 0, venue, "0x" + std::string(39, '0') + "2"));
    records.push_back(make_fill(2, 1, "0x" + std::string(39, '0') + "1", venue));
    records.push_back(make_fill(2, 2, venue, venue));

    const auto out = ingest::exclude_venue(records, venue);
    CHECK(out.records.size() == 7);
    CHECK(out.removed == 3);

    const auto identity = ingest::exclude_venue(out.records, venue);
    CHECK(identity.records.size() == 7);
    CHECK(identity.removed == 0);
}

TEST_CASE("corpus round-trip is lossless, order-normalized, hash-stable") {
    stats::Rng rng(11);
    Corpus corpus;
    corpus.caps = {true, false, false, BookGranularity::NONE};
    for (std::uint32_t i = 0; i < 1000; ++i) {
        auto r = make_fill(1000 + rng.uniform_int(100), i, "0x" + std::string(39, 'a') + "1",
                           "0x" + std::string(39, 'b') + "2",
                           static_cast<MicroPrice>(rng.uniform_int(kMicro + 1)),
                           static_cast<Usdc>(rng.uniform_int(1'000'000'000)));
        corpus.records.push_back(r);
    }

    const auto dir = fs::temp_directory_path() / "fillside_test_corpus";
    fs::create_directories(dir);
    const std::string path = (dir / "corpus.tsv").string();

    const auto manifest = ingest::write_corpus(corpus, path, "test", "{}");
    CHECK(manifest.record_count == 1000);

    const Corpus back = ingest::read_corpus(path, manifest.content_hash);
    CHECK(back.records.size() == 1000);
    CHECK(ingest::corpus_content_hash(back.records) == manifest.content_hash);

    // Permuted input order produces the same content hash.
    Corpus shuffled = corpus;
    for (std::size_t i = shuffled.records.size() - 1; i > 0; --i)
        std::swap(shuffled.records[i], shuffled.records[rng.uniform_int(i + 1)]);
    const auto manifest2 = ingest::write_corpus(shuffled, path, "test", "{}");
    CHECK(manifest2.content_hash == manifest.content_hash);

    // One flipped byte fails verification.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(200);
        f.put('9');
    }
    CHECK_THROWS_AS(ingest::read_corpus(path, manifest.content_hash), ingest::CorruptCorpus);
}

TEST_CASE("fixture replay returns entries in block order") {
    const auto dir = fs::temp_directory_path() / "fillside_test_fixture";
    fs::create_directories(dir);
    const std::string path = (dir / "logs.jsonl").string();
    std::ofstream f(path);
    for (int i = 11; i >= 0; --i) {
        const auto e = make_entry(0, 5, 100000, 200000, 100 + static_cast<std::uint64_t>(i), 0);
        json j;
        j["blockNumber"] = e.block_number;
        j["transactionHash"] = e.tx_hash;
        j["logIndex"] = e.log_index;
        j["topics"] = e.topics;
        j["data"] = hex::to_lower_hex(e.data);
        j["timestamp"] = *e.timestamp;
        f << j.dump() << '\n';
    }
    f.close();

    const auto entries = ingest::read_fixture_logs(path);
    REQUIRE(entries.size() == 12);
    for (std::size_t i = 1; i < entries.size(); ++i)
        CHECK(entries[i - 1].block_number < entries[i].block_number);
}

TEST_CASE("block-time table interpolates and extrapolates") {
    auto table = ingest::BlockTimeTable::from_anchors({{100, 1000}, {200, 1200}});
    CHECK(table.timestamp_for(100) == 1000);
    CHECK(table.timestamp_for(200) == 1200);
    CHECK(table.timestamp_for(150) == 1100);
    CHECK(table.timestamp_for(250) == 1300);
    CHECK(table.timestamp_for(50) == 900);
}

// ---------------------------------------------------------------------------
// Mock-endpoint fetch tests
// ---------------------------------------------------------------------------

namespace {

struct MockChain {
    // 30 logs across blocks 1000..1029
    std::vector<ingest::RawLogEntry> logs;
    std::atomic<int> calls{0};
    std::uint64_t fail_above_span = ~0ull; // JSON-RPC error for wider ranges
    std::atomic<bool> always_rpc_error{false};

    MockChain() {
        for (std::uint32_t i = 0; i < 30; ++i)
            logs.push_back(make_entry(0, 5, 100000, 200000, 1000 + i, i % 3));
    }

    json handle(const json& req) {
        ++calls;
        const auto& params = req["params"][0];
        const std::uint64_t from = hex::parse_quantity(params["fromBlock"].get<std::string>());
        const std::uint64_t to = hex::parse_quantity(params["toBlock"].get<std::string>());
        json resp{{"jsonrpc", "2.0"}, {"id", req["id"]}};
        if (always_rpc_error || to - from + 1 > fail_above_span) {
            resp["error"] = {{"code", -32005}, {"message", "query returned more than allowed"}};
            return resp;
        }
        json result = json::array();
        for (const auto& e : logs) {
            if (e.block_number < from || e.block_number > to) continue;
            json j;
            j["blockNumber"] = hex::to_quantity(e.block_number);
            j["transactionHash"] = e.tx_hash;
            j["logIndex"] = hex::to_quantity(e.log_index);
            j["topics"] = e.topics;
            j["data"] = hex::to_lower_hex(e.data);
            result.push_back(j);
        }
        resp["result"] = result;
        return resp;
    }
};

struct MockServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit MockServer(MockChain& chain) {
        server.Post("/", [&chain](const httplib::Request& req, httplib::Response& res) {
            res.set_content(chain.handle(json::parse(req.body)).dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

} // namespace

TEST_CASE("fetch_logs delivers exactly the logs an unbounded query would") {
    MockChain chain;
    MockServer server(chain);

    ingest::LogFilterSpec filter;
    filter.from_block = 1000;
    filter.to_block = 1029;
    filter.chunk_size = 7;
    const auto got = ingest::fetch_logs(filter, {server.url()});
    REQUIRE(got.size() == chain.logs.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].block_number == chain.logs[i].block_number);
        CHECK(got[i].tx_hash == chain.logs[i].tx_hash);
    }
}

TEST_CASE("oversized chunks bisect until the provider accepts them") {
    MockChain chain;
    chain.fail_above_span = 4;
    MockServer server(chain);

    ingest::LogFilterSpec filter;
    filter.from_block = 1000;
    filter.to_block = 1029;
    filter.chunk_size = 30; // forces recursive bisection
    const auto got = ingest::fetch_logs(filter, {server.url()});
    CHECK(got.size() == chain.logs.size());
}

TEST_CASE("empty block range yields an empty stream") {
    MockChain chain;
    MockServer server(chain);
    ingest::LogFilterSpec filter;
    filter.from_block = 5000; // no events there
    filter.to_block = 5000;
    CHECK(ingest::fetch_logs(filter, {server.url()}).empty());
}

TEST_CASE("persistent size-1 rejection exhausts the rotation and fails") {
    MockChain chain;
    chain.always_rpc_error = true;
    MockServer server(chain);
    ingest::LogFilterSpec filter;
    filter.from_block = 1000;
    filter.to_block = 1001;
    filter.chunk_size = 2;
    ingest::FetchOptions opts;
    opts.retry_budget = 2;
    CHECK_THROWS_AS(ingest::fetch_logs(filter, {server.url()}, opts), ingest::AllEndpointsFailed);
    // Bisection terminated: bounded call count, not an infinite split loop.
    CHECK(chain.calls.load() <= 16);
}

TEST_CASE("non-JSON-RPC payload raises MalformedResponse") {
    httplib::Server server;
    server.Post("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("<html>not json</html>", "text/html");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ingest::LogFilterSpec filter;
    filter.from_block = 1;
    filter.to_block = 1;
    CHECK_THROWS_AS(ingest::fetch_logs(filter, {"http://127.0.0.1:" + std::to_string(port)}),
                    ingest::MalformedResponse);
    server.stop();
    t.join();
}

TEST_CASE("build_corpus quarantines undecodable entries and excludes the venue") {
    std::vector<ingest::RawLogEntry> entries;
    entries.push_back(make_entry(0, 5, 100000, 200000, 100, 0));
    entries.push_back(make_entry(3, 5, 100000, 200000, 100, 1)); // unknown pair
    entries.push_back(make_entry(0, 5, 100000, 0, 100, 2));      // zero token

    std::uint64_t venue_removed = 0;
    const auto out = ingest::build_corpus(entries, {}, ingest::kDefaultContract, nullptr,
                                          venue_removed);
    CHECK(out.corpus.records.size() == 1);
    CHECK(out.quarantined.size() == 2);
    CHECK(venue_removed == 0);
}
