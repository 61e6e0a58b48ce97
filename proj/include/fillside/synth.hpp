#pragma once

#include "fillside/cluster.hpp"
#include "fillside/micropanel.hpp"
#include "fillside/types.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fillside::synth {

// Planted tier band. Bands are disjoint with wide separation so percentile
// thresholds land between them and recovery is unambiguous; rate is fills
// per active hour (>= 1 by construction, an address cannot have more active
// hours than fills).
struct TierPlant {
    std::uint64_t count = 0;
    double rate_lo = 1, rate_hi = 1;
    std::uint64_t hours_lo = 1, hours_hi = 1;
    std::uint64_t markets_lo = 1, markets_hi = 1;
    double notional_total_lo = 0, notional_total_hi = 0; // USDC
    std::uint64_t market_pool = 100;
};

struct SynthSpec {
    std::uint64_t seed = 42;
    std::int64_t start_ts = 1766275200; // window start, UTC seconds
    std::int64_t window_hours = 168;

    std::map<std::string, TierPlant> tiers; // keys: hfo, hbo, power, active, episodic

    std::uint64_t whale_count = 12; // power-tier members re-scaled to whale notionals
    double whale_total_lo = 1'200'000, whale_total_hi = 3'000'000;

    std::uint64_t wash_count = 8;
    std::uint64_t wash_pairs = 2;
    double wash_fill_notional = 2'000;
    std::int64_t wash_gap_seconds = 20;

    std::uint64_t arb_bots = 3;
    std::uint64_t arb_pairs_per_bot = 10;
    std::int64_t arb_gap_seconds = 10;

    bool hawkes_market = true;
    double hawkes_mu = 0.05, hawkes_alpha = 0.03, hawkes_beta = 0.06;

    bool impact_market = true;
    double impact_lambda = 0.001;
    std::uint64_t impact_bins = 120;
    std::int64_t impact_bin_seconds = 300;
    double impact_noise = 0;

    std::uint64_t negrisk_groups = 1;
    std::vector<double> negrisk_prices = {0.5, 0.3, 0.2};
    std::int64_t negrisk_pulse_offset = 7200;
    std::int64_t negrisk_pulse_width = 600;
    double negrisk_pulse_magnitude = 0.08;

    std::uint64_t book_markets = 2;       // markets with book snapshots
    std::uint64_t book_swing_markets = 1; // of which this many carry one planted swing
    double book_step = 0.12;

    static SynthSpec standard(); // the default desk-scale plant
    std::string to_json() const;
    static SynthSpec from_json(const std::string& text);
};

struct NegRiskTruth {
    std::vector<std::string> members;
    std::int64_t pulse_t0 = 0;
    std::int64_t pulse_width = 0;
    double pulse_magnitude = 0;
};

struct GroundTruth {
    std::map<std::string, std::string> tier; // planted address -> tier name
    std::set<std::string> whales;
    std::set<std::string> wash_addresses;
    std::set<std::string> directional_addresses; // tier-planted, one-sided flow
    std::map<std::string, std::uint64_t> arb_pairs;     // address -> planted pair count
    std::map<std::string, double> impact_lambda;        // market -> planted slope
    std::map<std::string, double> hawkes_eta;           // market -> planted branching ratio
    std::map<std::string, std::uint64_t> planted_swings; // market -> swing count
    std::map<std::string, NegRiskTruth> negrisk;

    std::string to_json() const;
    static GroundTruth from_json(const std::string& text);
};

struct BookRow {
    std::string market_token;
    std::int64_t ts = 0;
    MicroPrice best_bid = 0;
    MicroPrice best_ask = 0;
};

struct ResolutionRow {
    std::string market_token;
    int outcome = 0; // 0 or 1
    std::int64_t ts = 0;
};

struct SynthOutput {
    Corpus corpus;
    GroundTruth truth;
    std::vector<BookRow> books;
    std::vector<ResolutionRow> resolutions;
    std::map<std::string, std::vector<std::string>> related_map; // group -> members
};

// Deterministic given spec.seed: the same spec always produces a
// byte-identical corpus.
SynthOutput generate(const SynthSpec& spec);

void write_books(const std::vector<BookRow>& books, const std::string& path);
void write_resolutions(const std::vector<ResolutionRow>& rows, const std::string& path);
void write_related_map(const std::map<std::string, std::vector<std::string>>& groups,
                       const std::string& path);
std::map<std::string, std::vector<std::string>> read_related_map(const std::string& path);

// --------------------------------------------------------------------------
// Direct generators for tests
// --------------------------------------------------------------------------

struct Blobs {
    cluster::PointMatrix points;
    std::vector<int> labels;
};
Blobs make_blobs(const std::vector<std::array<double, 6>>& centers,
                 const std::vector<std::size_t>& counts, double sigma, std::uint64_t seed);

// Ogata thinning for the exponential-kernel self-exciting process.
std::vector<double> simulate_hawkes(double mu, double alpha, double beta, double horizon,
                                    std::uint64_t seed);

// One fill per time bin with linear price impact dp = lambda * q + noise.
micro::MarketSeries simulate_impact_series(double lambda, std::size_t n_bins,
                                           std::int64_t bin_seconds, double noise_sigma,
                                           std::uint64_t seed);

} // namespace fillside::synth
