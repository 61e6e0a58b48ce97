#include "fillside/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

namespace {

using fillside::pipeline::GateWithdrawal;
using fillside::pipeline::RunConfig;

RunConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return RunConfig::from_file(config_path);
}

// Endpoint list from the environment when no --rpc-url was given.
void apply_env_endpoints(RunConfig& cfg) {
    if (!cfg.rpc_urls.empty()) return;
    const char* env = std::getenv("FILLSIDE_RPC_URLS");
    if (!env) return;
    std::istringstream ss(env);
    std::string url;
    while (std::getline(ss, url, ',')) {
        if (!url.empty()) cfg.rpc_urls.push_back(url);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fill-side prediction-market microstructure analytics"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "run configuration JSON")->envname("FILLSIDE_CONFIG");
    std::string workdir;
    app.add_option("--workdir", workdir, "stage output directory");
    bool private_output = false;
    app.add_flag("--private", private_output, "include address-level tables in outputs");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "collect and decode fill logs");
    std::vector<std::string> rpc_urls;
    ingest->add_option("--rpc-url", rpc_urls, "JSON-RPC endpoint (repeatable)");
    std::string contract, fixture, block_times, out_corpus;
    std::uint64_t from_block = 0, to_block = 0, chunk = 2000;
    ingest->add_option("--contract", contract, "venue contract address");
    ingest->add_option("--from-block", from_block, "first block");
    ingest->add_option("--to-block", to_block, "last block");
    ingest->add_option("--chunk", chunk, "blocks per eth_getLogs request");
    ingest->add_option("--fixture", fixture, "replay a JSON-lines log fixture");
    ingest->add_option("--block-times", block_times, "block->timestamp table file");
    ingest->add_option("--out", out_corpus, "corpus output path");

    auto* gates_cmd = app.add_subcommand("gates", "evaluate validity gates");

    auto* features_cmd = app.add_subcommand("features", "per-address aggregates and features");
    std::uint64_t min_fills = 0;
    features_cmd->add_option("--min-fills", min_fills, "activity filter threshold");
    bool robust_scaling = false;
    features_cmd->add_flag("--robust-scaling", robust_scaling,
                           "median/IQR scaling instead of winsorize+z-score");

    auto* cluster_cmd = app.add_subcommand("cluster", "DBSCAN grid and k-means fallback");
    std::vector<double> grid;
    cluster_cmd->add_option("--grid", grid, "epsilon grid override");
    bool fallback_kmeans = false; // accepted for interface compatibility; fallback is protocol-driven
    cluster_cmd->add_flag("--fallback-kmeans", fallback_kmeans, "run k-means when the protocol directs");
    bool fifteen = false;
    cluster_cmd->add_flag("--fifteen-pair-preset", fifteen, "central 5 epsilons x 3 minPts");
    std::uint64_t seed = 0;
    cluster_cmd->add_option("--seed", seed, "clustering seed");

    auto* tiers_cmd = app.add_subcommand("tiers", "feature-tier stratification");

    auto* metrics_cmd = app.add_subcommand("metrics", "per-market microstructure panel");
    std::string anchors, books, resolutions;
    metrics_cmd->add_option("--anchors", anchors, "ILS anchors, e.g. 1h,6h,24h,72h");
    metrics_cmd->add_option("--books", books, "book snapshot table");
    metrics_cmd->add_option("--resolutions", resolutions, "market resolution table");

    auto* bilateral_cmd = app.add_subcommand("bilateral", "group-share x metric correlations");
    double alpha = 0;
    std::size_t boot = 0;
    std::uint64_t bseed = 0;
    std::string group_axis;
    bilateral_cmd->add_option("--alpha", alpha, "BH-FDR level");
    bilateral_cmd->add_option("--boot", boot, "bootstrap iterations");
    bilateral_cmd->add_option("--seed", bseed, "bootstrap master seed");
    bilateral_cmd->add_option("--group-axis", group_axis, "cluster or tier");

    auto* detect_cmd = app.add_subcommand("detect", "manipulation-candidate reports");
    bool detect_wash = false, detect_negrisk = false, detect_swings = false;
    detect_cmd->add_flag("--wash", detect_wash, "wash-volume candidates");
    detect_cmd->add_flag("--negrisk", detect_negrisk, "group-sum deviations");
    detect_cmd->add_flag("--swings", detect_swings, "book-depth swings");
    std::string related;
    detect_cmd->add_option("--related", related, "related-markets map JSON");

    auto* report_cmd = app.add_subcommand("report", "feedback tests and summaries");
    auto* bundle_cmd = app.add_subcommand("bundle", "privacy-scrubbed aggregate bundle");

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string spec_path;
    synth_cmd->add_option("--spec", spec_path, "synth spec JSON (defaults to the standard plant)");

    auto* pipeline_cmd = app.add_subcommand("pipeline", "run stages in dependency order");
    std::vector<std::string> stages = {"gates",     "features", "cluster", "tiers", "metrics",
                                       "bilateral", "detect",   "report",  "bundle"};
    pipeline_cmd->add_option("--stages", stages, "stage list override");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (!workdir.empty()) cfg.workdir = workdir;
        if (private_output) cfg.privacy = false;

        bool withdrawals = false;
        if (*ingest) {
            if (!rpc_urls.empty()) cfg.rpc_urls = rpc_urls;
            apply_env_endpoints(cfg);
            if (!contract.empty()) cfg.filter.contract_address = contract;
            if (from_block) cfg.filter.from_block = from_block;
            if (to_block) cfg.filter.to_block = to_block;
            if (chunk) cfg.filter.chunk_size = chunk;
            if (!fixture.empty()) cfg.fixture_path = fixture;
            if (!block_times.empty()) cfg.block_time_table = block_times;
            if (!out_corpus.empty()) {
                // --out points at the corpus file; stage outputs stay beside it.
                const auto slash = out_corpus.find_last_of('/');
                if (slash != std::string::npos) cfg.workdir = out_corpus.substr(0, slash);
            }
            fillside::pipeline::stage_ingest(cfg);
        } else if (*gates_cmd) {
            withdrawals = fillside::pipeline::stage_gates(cfg).withdrawals;
        } else if (*features_cmd) {
            if (min_fills) cfg.min_fills = min_fills;
            if (robust_scaling) cfg.scaler_mode = fillside::features::ScalerMode::ROBUST;
            withdrawals = fillside::pipeline::stage_features(cfg).withdrawals;
        } else if (*cluster_cmd) {
            if (!grid.empty()) cfg.eps_grid = grid;
            cfg.fifteen_pair_preset = fifteen;
            if (seed) cfg.seed = seed;
            withdrawals = fillside::pipeline::stage_cluster(cfg).withdrawals;
        } else if (*tiers_cmd) {
            withdrawals = fillside::pipeline::stage_tiers(cfg).withdrawals;
        } else if (*metrics_cmd) {
            if (!books.empty()) cfg.books_path = books;
            if (!resolutions.empty()) cfg.resolutions_path = resolutions;
            if (!anchors.empty()) {
                std::istringstream ss(anchors);
                std::string tok;
                std::size_t i = 0;
                while (std::getline(ss, tok, ',') && i < 4) {
                    std::int64_t mult = 1;
                    if (!tok.empty() && (tok.back() == 'h' || tok.back() == 'm' || tok.back() == 's')) {
                        mult = tok.back() == 'h' ? 3600 : (tok.back() == 'm' ? 60 : 1);
                        tok.pop_back();
                    }
                    cfg.panel.ils_anchors[i++] = std::stoll(tok) * mult;
                }
            }
            withdrawals = fillside::pipeline::stage_metrics(cfg).withdrawals;
        } else if (*bilateral_cmd) {
            if (alpha > 0) cfg.bilateral.alpha = alpha;
            if (boot > 0) cfg.bilateral.bootstrap_iterations = boot;
            if (bseed) cfg.bilateral.seed = bseed;
            if (!group_axis.empty()) cfg.group_axis = group_axis;
            withdrawals = fillside::pipeline::stage_bilateral(cfg).withdrawals;
        } else if (*detect_cmd) {
            if (!related.empty()) cfg.related_map_path = related;
            withdrawals = fillside::pipeline::stage_detect(cfg).withdrawals;
        } else if (*report_cmd) {
            withdrawals = fillside::pipeline::stage_report(cfg).withdrawals;
        } else if (*bundle_cmd) {
            withdrawals = fillside::pipeline::stage_bundle(cfg).withdrawals;
        } else if (*synth_cmd) {
            fillside::synth::SynthSpec spec = fillside::synth::SynthSpec::standard();
            if (!spec_path.empty()) {
                std::ifstream in(spec_path);
                if (!in) throw std::runtime_error("cannot open spec: " + spec_path);
                std::stringstream ss;
                ss << in.rdbuf();
                spec = fillside::synth::SynthSpec::from_json(ss.str());
            }
            fillside::pipeline::stage_synth(cfg, spec);
        } else if (*pipeline_cmd) {
            withdrawals = fillside::pipeline::run_pipeline(cfg, stages);
        }

        if (withdrawals) {
            std::cerr << "note: gate-driven analysis withdrawals apply; see " << cfg.gates_file()
                      << "\n";
            return 2;
        }
        return 0;
    } catch (const GateWithdrawal& e) {
        std::cerr << "withdrawn: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
