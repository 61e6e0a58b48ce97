#include <httplib.h>

#include "fillside/hex.hpp"
#include "fillside/ingest.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

namespace fillside::ingest {

using nlohmann::json;

namespace {

struct SplitUrl {
    std::string origin; // scheme://host[:port]
    std::string path;   // "/" when absent
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint needs scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::uint64_t parse_number_field(const json& v) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_string()) return hex::parse_quantity(v.get<std::string>());
    throw MalformedResponse("unparseable numeric field: " + v.dump());
}

RawLogEntry parse_log_object(const json& v) {
    if (!v.is_object() || !v.contains("blockNumber") || !v.contains("transactionHash") ||
        !v.contains("logIndex") || !v.contains("topics") || !v.contains("data"))
        throw MalformedResponse("log object missing required fields: " + v.dump());
    RawLogEntry e;
    e.block_number = parse_number_field(v["blockNumber"]);
    e.tx_hash = v["transactionHash"].get<std::string>();
    e.log_index = static_cast<std::uint32_t>(parse_number_field(v["logIndex"]));
    for (const auto& t : v["topics"]) e.topics.push_back(t.get<std::string>());
    e.data = hex::from_hex(v["data"].get<std::string>());
    if (v.contains("timestamp")) e.timestamp = static_cast<std::int64_t>(parse_number_field(v["timestamp"]));
    return e;
}

struct Chunk {
    std::uint64_t from;
    std::uint64_t to;
};

// Shared work state for the bounded-concurrency fetch. Bisection pushes the
// two halves back onto the queue, so the union of completed chunks always
// partitions the requested range.
struct FetchState {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Chunk> queue;
    std::size_t outstanding = 0; // queued + in-flight chunks
    std::exception_ptr error;
    std::vector<RawLogEntry> results;
};

class RpcClient {
public:
    RpcClient(const std::string& url, int timeout_seconds) : split_(split_url(url)) {
        client_ = std::make_unique<httplib::Client>(split_.origin);
        client_->set_connection_timeout(timeout_seconds);
        client_->set_read_timeout(timeout_seconds);
    }

    // Returns the parsed "result" on success; sets rpc_error=true when the
    // provider answered with a JSON-RPC error (limit exceeded etc.); throws
    // MalformedResponse on non-JSON-RPC payloads; returns nullopt on
    // transport failure.
    std::optional<json> call(const std::string& method, const json& params, bool& rpc_error) {
        rpc_error = false;
        json req{{"jsonrpc", "2.0"}, {"id", 1}, {"method", method}, {"params", params}};
        auto res = client_->Post(split_.path, req.dump(), "application/json");
        if (!res || res->status != 200) return std::nullopt;
        json body = json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.is_object())
            throw MalformedResponse("non-JSON-RPC payload from endpoint");
        if (body.contains("error")) {
            rpc_error = true;
            return std::nullopt;
        }
        if (!body.contains("result")) throw MalformedResponse("JSON-RPC response without result");
        return body["result"];
    }

private:
    SplitUrl split_;
    std::unique_ptr<httplib::Client> client_;
};

void run_chunk(FetchState& st, const LogFilterSpec& filter, const std::string& topic0,
               std::vector<RpcClient>& clients, const FetchOptions& options, Chunk chunk) {
    json params = json::array({json{{"address", filter.contract_address},
                                    {"topics", json::array({topic0})},
                                    {"fromBlock", hex::to_quantity(chunk.from)},
                                    {"toBlock", hex::to_quantity(chunk.to)}}});

    const std::size_t n_endpoints = clients.size();
    for (int attempt = 0; attempt < options.retry_budget; ++attempt) {
        for (std::size_t ei = 0; ei < n_endpoints; ++ei) {
            bool rpc_error = false;
            std::optional<json> result;
            result = clients[ei].call("eth_getLogs", params, rpc_error);
            if (rpc_error) {
                if (chunk.to > chunk.from) {
                    // Provider rejected the span; bisect and requeue.
                    const std::uint64_t mid = chunk.from + (chunk.to - chunk.from) / 2;
                    std::lock_guard lk(st.mu);
                    st.queue.push_back({chunk.from, mid});
                    st.queue.push_back({mid + 1, chunk.to});
                    st.outstanding += 2;
                    st.cv.notify_all();
                    return;
                }
                continue; // size-1 chunk: burn a rotation slot
            }
            if (!result) continue; // transport failure: rotate
            if (!result->is_array()) throw MalformedResponse("eth_getLogs result is not an array");
            std::vector<RawLogEntry> entries;
            entries.reserve(result->size());
            for (const auto& v : *result) entries.push_back(parse_log_object(v));
            std::lock_guard lk(st.mu);
            for (auto& e : entries) st.results.push_back(std::move(e));
            return;
        }
    }
    throw AllEndpointsFailed("chunk " + std::to_string(chunk.from) + "-" + std::to_string(chunk.to) +
                             " failed on every endpoint after " +
                             std::to_string(options.retry_budget) + " rotations");
}

} // namespace

std::vector<RawLogEntry> fetch_logs(const LogFilterSpec& filter,
                                    const std::vector<std::string>& endpoints,
                                    const FetchOptions& options) {
    filter.validate();
    if (endpoints.empty()) throw std::invalid_argument("endpoint list is empty");
    const std::string topic0 =
        filter.event_topic.empty() ? DecodeRule{}.topic0()
                                   : (filter.event_topic.rfind("0x", 0) == 0 ? filter.event_topic
                                                                             : "0x" + filter.event_topic);

    FetchState st;
    for (std::uint64_t from = filter.from_block; from <= filter.to_block;) {
        const std::uint64_t to = std::min(filter.to_block, from + filter.chunk_size - 1);
        st.queue.push_back({from, to});
        ++st.outstanding;
        if (to == filter.to_block) break;
        from = to + 1;
    }

    const std::size_t n_workers =
        std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(options.max_in_flight),
                                                       st.queue.size()));
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            // Each worker owns one client per endpoint; httplib clients are
            // not thread-safe across concurrent requests.
            std::vector<RpcClient> clients;
            clients.reserve(endpoints.size());
            for (const auto& url : endpoints) clients.emplace_back(url, options.timeout_seconds);
            for (;;) {
                Chunk chunk{};
                {
                    std::unique_lock lk(st.mu);
                    st.cv.wait(lk, [&] { return !st.queue.empty() || st.outstanding == 0 || st.error; });
                    if (st.error || (st.queue.empty() && st.outstanding == 0)) return;
                    if (st.queue.empty()) continue;
                    chunk = st.queue.front();
                    st.queue.pop_front();
                }
                try {
                    run_chunk(st, filter, topic0, clients, options, chunk);
                } catch (...) {
                    std::lock_guard lk(st.mu);
                    if (!st.error) st.error = std::current_exception();
                    st.cv.notify_all();
                    return;
                }
                std::lock_guard lk(st.mu);
                --st.outstanding;
                if (st.outstanding == 0 || !st.queue.empty()) st.cv.notify_all();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (st.error) std::rethrow_exception(st.error);

    std::sort(st.results.begin(), st.results.end(), [](const RawLogEntry& a, const RawLogEntry& b) {
        if (a.block_number != b.block_number) return a.block_number < b.block_number;
        return a.log_index < b.log_index;
    });
    return st.results;
}

std::vector<RawLogEntry> read_fixture_logs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fixture: " + path);
    std::vector<RawLogEntry> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        json v = json::parse(line, nullptr, false);
        if (v.is_discarded()) throw MalformedResponse("fixture line is not JSON");
        out.push_back(parse_log_object(v));
    }
    std::sort(out.begin(), out.end(), [](const RawLogEntry& a, const RawLogEntry& b) {
        if (a.block_number != b.block_number) return a.block_number < b.block_number;
        return a.log_index < b.log_index;
    });
    return out;
}

RpcBlockTimeSource::RpcBlockTimeSource(std::vector<std::string> endpoints, int timeout_seconds)
    : endpoints_(std::move(endpoints)), timeout_seconds_(timeout_seconds) {
    if (endpoints_.empty()) throw std::invalid_argument("endpoint list is empty");
}

std::int64_t RpcBlockTimeSource::timestamp_for(std::uint64_t block) {
    if (auto it = cache_.find(block); it != cache_.end()) return it->second;
    json params = json::array({hex::to_quantity(block), false});
    for (const auto& url : endpoints_) {
        RpcClient client(url, timeout_seconds_);
        bool rpc_error = false;
        auto result = client.call("eth_getBlockByNumber", params, rpc_error);
        if (!result || rpc_error || !result->is_object() || !result->contains("timestamp")) continue;
        const auto ts = static_cast<std::int64_t>(parse_number_field((*result)["timestamp"]));
        cache_[block] = ts;
        return ts;
    }
    throw AllEndpointsFailed("block timestamp lookup failed for block " + std::to_string(block));
}

} // namespace fillside::ingest
