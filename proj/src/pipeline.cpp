#include "fillside/pipeline.hpp"

#include "fillside/digest.hpp"
#include "fillside/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fillside::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

// --------------------------------------------------------------------------
// RunConfig
// --------------------------------------------------------------------------

std::string RunConfig::to_json() const {
    json j;
    j["workdir"] = workdir;
    j["rpc_urls"] = rpc_urls;
    j["fixture_path"] = fixture_path;
    j["filter"] = {{"contract", filter.contract_address},
                   {"from_block", filter.from_block},
                   {"to_block", filter.to_block},
                   {"event_topic", filter.event_topic},
                   {"chunk", filter.chunk_size}};
    j["block_time_table"] = block_time_table;
    j["min_fills"] = min_fills;
    j["scaler_mode"] = scaler_mode == features::ScalerMode::ROBUST ? "robust" : "winsor_z";
    j["winsor_quantile"] = winsor_quantile;
    j["eps_grid"] = eps_grid;
    j["min_pts_grid"] = min_pts_grid;
    j["fifteen_pair_preset"] = fifteen_pair_preset;
    j["cluster_cap"] = cluster_cap;
    j["noise_threshold"] = noise_threshold;
    j["k_range"] = k_range;
    j["seed"] = seed;
    j["tier_thresholds"] = {{"whale_notional", tier_thresholds.whale_notional},
                            {"whale_single_market_share", tier_thresholds.whale_single_market_share},
                            {"hfo_f2_percentile", tier_thresholds.hfo_f2_percentile},
                            {"hfo_f9_percentile", tier_thresholds.hfo_f9_percentile},
                            {"hbo_f9_percentile", tier_thresholds.hbo_f9_percentile},
                            {"power_f2_percentile", tier_thresholds.power_f2_percentile},
                            {"power_notional_percentile", tier_thresholds.power_notional_percentile},
                            {"episodic_cap", tier_thresholds.episodic_cap}};
    j["sensitivity_grid"] = sensitivity_grid;
    j["panel"] = {{"kyle_bin_seconds", panel.kyle_bin_seconds},
                  {"vpin_buckets", panel.vpin_buckets},
                  {"winsor_lower_q", panel.winsor_lower_q},
                  {"winsor_upper_q", panel.winsor_upper_q},
                  {"ils_anchors", panel.ils_anchors},
                  {"ils_scope_threshold", panel.ils_scope_threshold},
                  {"swing_threshold", panel.swing_threshold},
                  {"swing_window_seconds", panel.swing_window_seconds},
                  {"hawkes_min_events", panel.hawkes_min_events},
                  {"hawkes_seed", panel.hawkes_seed}};
    j["books_path"] = books_path;
    j["resolutions_path"] = resolutions_path;
    j["bilateral"] = {{"alpha", bilateral.alpha},
                      {"boot", bilateral.bootstrap_iterations},
                      {"ci_level", bilateral.ci_level},
                      {"seed", bilateral.seed}};
    j["group_axis"] = group_axis;
    j["wash"] = {{"gross_min", wash.gross_min},
                 {"net_ratio_max", wash.net_ratio_max},
                 {"delta_wash_seconds", wash.delta_wash_seconds}};
    j["delta_arb_seconds"] = delta_arb_seconds;
    j["negrisk_threshold"] = negrisk_threshold;
    j["related_map_path"] = related_map_path;
    j["synthetic_retail_notional"] = synthetic_retail_notional;
    j["privacy"] = privacy;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    c.workdir = j.value("workdir", c.workdir);
    if (j.contains("rpc_urls")) c.rpc_urls = j["rpc_urls"].get<std::vector<std::string>>();
    c.fixture_path = j.value("fixture_path", c.fixture_path);
    if (j.contains("filter")) {
        const auto& f = j["filter"];
        c.filter.contract_address = f.value("contract", c.filter.contract_address);
        c.filter.from_block = f.value("from_block", c.filter.from_block);
        c.filter.to_block = f.value("to_block", c.filter.to_block);
        c.filter.event_topic = f.value("event_topic", c.filter.event_topic);
        c.filter.chunk_size = f.value("chunk", c.filter.chunk_size);
    }
    c.block_time_table = j.value("block_time_table", c.block_time_table);
    c.min_fills = j.value("min_fills", c.min_fills);
    c.scaler_mode = j.value("scaler_mode", "winsor_z") == "robust" ? features::ScalerMode::ROBUST
                                                                   : features::ScalerMode::WINSOR_Z;
    c.winsor_quantile = j.value("winsor_quantile", c.winsor_quantile);
    if (j.contains("eps_grid")) c.eps_grid = j["eps_grid"].get<std::vector<double>>();
    if (j.contains("min_pts_grid"))
        c.min_pts_grid = j["min_pts_grid"].get<std::vector<std::size_t>>();
    c.fifteen_pair_preset = j.value("fifteen_pair_preset", c.fifteen_pair_preset);
    c.cluster_cap = j.value("cluster_cap", c.cluster_cap);
    c.noise_threshold = j.value("noise_threshold", c.noise_threshold);
    if (j.contains("k_range")) c.k_range = j["k_range"].get<std::vector<std::size_t>>();
    c.seed = j.value("seed", c.seed);
    if (j.contains("tier_thresholds")) {
        const auto& t = j["tier_thresholds"];
        c.tier_thresholds.whale_notional = t.value("whale_notional", c.tier_thresholds.whale_notional);
        c.tier_thresholds.whale_single_market_share =
            t.value("whale_single_market_share", c.tier_thresholds.whale_single_market_share);
        c.tier_thresholds.hfo_f2_percentile =
            t.value("hfo_f2_percentile", c.tier_thresholds.hfo_f2_percentile);
        c.tier_thresholds.hfo_f9_percentile =
            t.value("hfo_f9_percentile", c.tier_thresholds.hfo_f9_percentile);
        c.tier_thresholds.hbo_f9_percentile =
            t.value("hbo_f9_percentile", c.tier_thresholds.hbo_f9_percentile);
        c.tier_thresholds.power_f2_percentile =
            t.value("power_f2_percentile", c.tier_thresholds.power_f2_percentile);
        c.tier_thresholds.power_notional_percentile =
            t.value("power_notional_percentile", c.tier_thresholds.power_notional_percentile);
        c.tier_thresholds.episodic_cap = t.value("episodic_cap", c.tier_thresholds.episodic_cap);
    }
    if (j.contains("sensitivity_grid"))
        c.sensitivity_grid = j["sensitivity_grid"].get<std::vector<double>>();
    if (j.contains("panel")) {
        const auto& p = j["panel"];
        c.panel.kyle_bin_seconds = p.value("kyle_bin_seconds", c.panel.kyle_bin_seconds);
        c.panel.vpin_buckets = p.value("vpin_buckets", c.panel.vpin_buckets);
        c.panel.winsor_lower_q = p.value("winsor_lower_q", c.panel.winsor_lower_q);
        c.panel.winsor_upper_q = p.value("winsor_upper_q", c.panel.winsor_upper_q);
        if (p.contains("ils_anchors")) {
            const auto anchors = p["ils_anchors"].get<std::vector<std::int64_t>>();
            for (std::size_t i = 0; i < std::min<std::size_t>(4, anchors.size()); ++i)
                c.panel.ils_anchors[i] = anchors[i];
        }
        c.panel.ils_scope_threshold = p.value("ils_scope_threshold", c.panel.ils_scope_threshold);
        c.panel.swing_threshold = p.value("swing_threshold", c.panel.swing_threshold);
        c.panel.swing_window_seconds = p.value("swing_window_seconds", c.panel.swing_window_seconds);
        c.panel.hawkes_min_events = p.value("hawkes_min_events", c.panel.hawkes_min_events);
        c.panel.hawkes_seed = p.value("hawkes_seed", c.panel.hawkes_seed);
    }
    c.books_path = j.value("books_path", c.books_path);
    c.resolutions_path = j.value("resolutions_path", c.resolutions_path);
    if (j.contains("bilateral")) {
        const auto& b = j["bilateral"];
        c.bilateral.alpha = b.value("alpha", c.bilateral.alpha);
        c.bilateral.bootstrap_iterations = b.value("boot", c.bilateral.bootstrap_iterations);
        c.bilateral.ci_level = b.value("ci_level", c.bilateral.ci_level);
        c.bilateral.seed = b.value("seed", c.bilateral.seed);
    }
    c.group_axis = j.value("group_axis", c.group_axis);
    if (j.contains("wash")) {
        const auto& w = j["wash"];
        c.wash.gross_min = w.value("gross_min", c.wash.gross_min);
        c.wash.net_ratio_max = w.value("net_ratio_max", c.wash.net_ratio_max);
        c.wash.delta_wash_seconds = w.value("delta_wash_seconds", c.wash.delta_wash_seconds);
    }
    c.delta_arb_seconds = j.value("delta_arb_seconds", c.delta_arb_seconds);
    c.negrisk_threshold = j.value("negrisk_threshold", c.negrisk_threshold);
    c.related_map_path = j.value("related_map_path", c.related_map_path);
    c.synthetic_retail_notional = j.value("synthetic_retail_notional", c.synthetic_retail_notional);
    c.privacy = j.value("privacy", c.privacy);
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

// --------------------------------------------------------------------------
// Manifest helpers
// --------------------------------------------------------------------------

namespace {

class StageTimer {
public:
    StageTimer(const RunConfig& cfg, std::string stage) : cfg_(cfg) {
        manifest_.stage = std::move(stage);
        manifest_.parameter_hash = digest::sha256_hex(cfg.to_json());
        start_ = std::chrono::steady_clock::now();
        fs::create_directories(cfg.workdir);
    }

    void input(const std::string& path) {
        if (fs::exists(path)) manifest_.input_hashes[path] = digest::sha256_file_hex(path);
    }
    void output(const std::string& path) {
        if (fs::exists(path)) manifest_.output_hashes[path] = digest::sha256_file_hex(path);
    }

    StageResult finish(bool withdrawals = false) {
        manifest_.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        append_run_manifest(cfg_, manifest_);
        return {manifest_, withdrawals};
    }

private:
    const RunConfig& cfg_;
    StageManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

gates::GateReport load_gates(const RunConfig& cfg) {
    return gates::GateReport::from_json(read_text(cfg.gates_file()));
}

std::string books_input(const RunConfig& cfg) {
    if (!cfg.books_path.empty()) return cfg.books_path;
    const std::string def = cfg.workdir + "/books.tsv";
    return fs::exists(def) ? def : "";
}

std::string resolutions_input(const RunConfig& cfg) {
    if (!cfg.resolutions_path.empty()) return cfg.resolutions_path;
    const std::string def = cfg.workdir + "/resolutions.tsv";
    return fs::exists(def) ? def : "";
}

std::string related_input(const RunConfig& cfg) {
    if (!cfg.related_map_path.empty()) return cfg.related_map_path;
    const std::string def = cfg.workdir + "/related.json";
    return fs::exists(def) ? def : "";
}

} // namespace

void append_run_manifest(const RunConfig& cfg, const StageManifest& m) {
    json doc = json::array();
    if (fs::exists(cfg.run_manifest_file())) {
        std::ifstream in(cfg.run_manifest_file());
        doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_array()) doc = json::array();
    }
    json e;
    e["stage"] = m.stage;
    e["inputs"] = m.input_hashes;
    e["parameter_hash"] = m.parameter_hash;
    e["outputs"] = m.output_hashes;
    e["wall_seconds"] = m.wall_seconds;
    doc.push_back(e);
    write_text(cfg.run_manifest_file(), doc.dump(2));
}

// --------------------------------------------------------------------------
// Stages
// --------------------------------------------------------------------------

StageResult stage_synth(const RunConfig& cfg, const synth::SynthSpec& spec) {
    StageTimer timer(cfg, "synth");
    auto out = synth::generate(spec);
    const auto manifest =
        ingest::write_corpus(out.corpus, cfg.corpus_file(), "synth:seed=" + std::to_string(spec.seed),
                             spec.to_json());
    ingest::write_manifest(manifest, cfg.corpus_manifest_file());
    write_text(cfg.workdir + "/groundtruth.json", out.truth.to_json());
    synth::write_books(out.books, cfg.workdir + "/books.tsv");
    synth::write_resolutions(out.resolutions, cfg.workdir + "/resolutions.tsv");
    synth::write_related_map(out.related_map, cfg.workdir + "/related.json");
    timer.output(cfg.corpus_file());
    timer.output(cfg.corpus_manifest_file());
    timer.output(cfg.workdir + "/groundtruth.json");
    timer.output(cfg.workdir + "/books.tsv");
    timer.output(cfg.workdir + "/resolutions.tsv");
    timer.output(cfg.workdir + "/related.json");
    return timer.finish();
}

StageResult stage_ingest(const RunConfig& cfg) {
    StageTimer timer(cfg, "ingest");
    std::vector<ingest::RawLogEntry> entries;
    std::string descriptor;
    if (!cfg.fixture_path.empty()) {
        timer.input(cfg.fixture_path);
        entries = ingest::read_fixture_logs(cfg.fixture_path);
        descriptor = "fixture:" + cfg.fixture_path;
    } else {
        if (cfg.rpc_urls.empty())
            throw std::invalid_argument("ingest needs --rpc-url or a fixture file");
        entries = ingest::fetch_logs(cfg.filter, cfg.rpc_urls);
        descriptor = "rpc:" + std::to_string(cfg.rpc_urls.size()) + " endpoints";
    }

    std::unique_ptr<ingest::BlockTimeSource> block_times;
    if (!cfg.block_time_table.empty()) {
        timer.input(cfg.block_time_table);
        block_times = std::make_unique<ingest::BlockTimeTable>(
            ingest::BlockTimeTable::from_file(cfg.block_time_table));
    } else if (!cfg.rpc_urls.empty()) {
        block_times = std::make_unique<ingest::RpcBlockTimeSource>(cfg.rpc_urls);
    }

    std::uint64_t venue_removed = 0;
    auto result = ingest::build_corpus(entries, ingest::DecodeRule{}, cfg.filter.contract_address,
                                       block_times.get(), venue_removed);
    json filter_json = json::parse(cfg.to_json())["filter"];
    auto manifest =
        ingest::write_corpus(result.corpus, cfg.corpus_file(), descriptor, filter_json.dump());
    manifest.venue_excluded_count = venue_removed;
    manifest.quarantined_count = result.quarantined.size();
    for (const auto& [entry, reason] : result.quarantined)
        ingest::append_quarantine(cfg.corpus_file(), entry, reason);
    ingest::write_manifest(manifest, cfg.corpus_manifest_file());
    timer.output(cfg.corpus_file());
    timer.output(cfg.corpus_manifest_file());
    return timer.finish();
}

StageResult stage_gates(const RunConfig& cfg) {
    StageTimer timer(cfg, "gates");
    timer.input(cfg.corpus_file());
    const Corpus corpus = ingest::read_corpus(cfg.corpus_file());
    const auto report = gates::evaluate_gates(corpus.caps);
    write_text(cfg.gates_file(), report.to_json());
    timer.output(cfg.gates_file());
    return timer.finish(!report.withdrawn_analyses.empty());
}

StageResult stage_features(const RunConfig& cfg) {
    StageTimer timer(cfg, "features");
    timer.input(cfg.corpus_file());
    timer.input(cfg.gates_file());
    const auto gate_report = load_gates(cfg);
    if (gate_report.g_fill != gates::Verdict::PASS)
        throw GateWithdrawal("G-FILL failed: fill-side features are not constructable");

    const Corpus corpus = ingest::read_corpus(cfg.corpus_file());
    auto filtered = features::activity_filter(features::aggregate(corpus.records), cfg.min_fills);

    std::vector<std::array<double, features::kNumFeatures>> raw;
    raw.reserve(filtered.aggregates.size());
    for (const auto& [addr, agg] : filtered.aggregates)
        raw.push_back(features::compute_features(agg).as_array());
    const auto scaler = features::fit_scaler(raw, cfg.scaler_mode, cfg.winsor_quantile);

    const auto market_totals = features::market_notional_totals(corpus.records);
    const auto rows = features::build_feature_rows(filtered.aggregates, market_totals, scaler);
    features::write_feature_table(rows, cfg.features_file());
    write_text(cfg.scaler_file(), scaler.to_json());
    timer.output(cfg.features_file());
    timer.output(cfg.scaler_file());
    // The three quote-side features stay withdrawn on fill-only corpora.
    return timer.finish(!gate_report.feature_enabled("f1"));
}

StageResult stage_cluster(const RunConfig& cfg) {
    StageTimer timer(cfg, "cluster");
    timer.input(cfg.features_file());
    const auto rows = features::read_feature_table(cfg.features_file());
    if (rows.empty()) throw std::runtime_error("empty feature table");

    std::vector<std::array<double, features::kNumFeatures>> scaled;
    scaled.reserve(rows.size());
    for (const auto& r : rows) scaled.push_back(r.scaled);
    const auto points = cluster::PointMatrix::from_rows(scaled);

    const auto eps_grid =
        cfg.fifteen_pair_preset ? cluster::fifteen_pair_epsilon_grid() : cfg.eps_grid;
    const auto outcomes = cluster::dbscan_grid(points, eps_grid, cfg.min_pts_grid);
    const auto verdict =
        cluster::evaluate_protocol(outcomes, cfg.cluster_cap, cfg.noise_threshold);

    json j;
    j["grid"] = json::array();
    for (const auto& o : outcomes)
        j["grid"].push_back({{"epsilon", o.config.epsilon},
                             {"min_pts", o.config.min_pts},
                             {"n_clusters", o.n_clusters},
                             {"noise_fraction", o.noise_fraction}});
    j["all_agree_on_n_clusters"] = verdict.all_agree_on_n_clusters;
    j["verdict"] = {{"stage", cluster::to_string(verdict.stage_reached)}};
    json evals = json::array();
    for (const auto& e : verdict.evaluations)
        evals.push_back(
            {{"index", e.index}, {"unimodal", e.unimodal}, {"accepted", e.accepted}, {"reasons", e.rejection_reasons}});
    j["verdict"]["evaluations"] = evals;

    std::map<std::string, std::string> final_labels;
    if (verdict.stage_reached == cluster::Stage::DBSCAN_ACCEPTED) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const int l = verdict.final_labeling[i];
            final_labels[rows[i].address] = l < 0 ? "NOISE" : "C" + std::to_string(l);
        }
        j["method"] = "dbscan";
    } else {
        const auto sel = cluster::select_k(points, cfg.k_range, cfg.seed);
        json sil;
        for (const auto& [k, s] : sel.silhouettes) sil[std::to_string(k)] = s;
        j["kmeans"] = {{"k", sel.best_k},
                       {"silhouettes", sil},
                       {"inertia", sel.best.inertia},
                       {"silhouette", sel.best.silhouette},
                       {"seed", cfg.seed},
                       {"empty_cluster_repairs", sel.best.empty_cluster_repairs}};
        json centroids = json::array();
        for (std::size_t c = 0; c < sel.best_k; ++c) {
            json row = json::array();
            for (std::size_t d = 0; d < points.dim; ++d)
                row.push_back(sel.best.centroids[c * points.dim + d]);
            centroids.push_back(row);
        }
        j["kmeans"]["centroids"] = centroids;
        for (std::size_t i = 0; i < rows.size(); ++i)
            final_labels[rows[i].address] = "K" + std::to_string(sel.best.labels[i]);
        j["method"] = "kmeans";
    }
    j["labels"] = final_labels;
    write_text(cfg.clusters_file(), j.dump(2));
    timer.output(cfg.clusters_file());
    return timer.finish();
}

StageResult stage_tiers(const RunConfig& cfg) {
    StageTimer timer(cfg, "tiers");
    timer.input(cfg.features_file());
    const auto rows = features::read_feature_table(cfg.features_file());
    const auto result = tiers::classify_tiers(rows, cfg.tier_thresholds);
    const auto counts = tiers::tier_counts(rows, result.labels);

    json j;
    j["cutoffs"] = {{"f2_p_hfo", result.cutoffs.f2_p_hfo},
                    {"f9_p_hfo", result.cutoffs.f9_p_hfo},
                    {"f9_p_hbo", result.cutoffs.f9_p_hbo},
                    {"f2_p_power", result.cutoffs.f2_p_power},
                    {"notional_p_power", result.cutoffs.notional_p_power}};
    for (tiers::Tier t : tiers::kAllTiers) {
        j["counts"][tiers::to_string(t)] = {
            {"population", counts.population.at(t)},
            {"notional", format_micro(counts.notional.at(t))}};
    }
    j["whales"] = counts.whales;

    const auto grid =
        tiers::tier_sensitivity(rows, cfg.sensitivity_grid, cfg.sensitivity_grid, cfg.tier_thresholds);
    json sens = json::array();
    for (const auto& cell : grid) {
        json c;
        c["f2_percentile"] = cell.f2_percentile;
        c["f9_percentile"] = cell.f9_percentile;
        for (tiers::Tier t : tiers::kAllTiers)
            c["population"][tiers::to_string(t)] = cell.counts.population.at(t);
        c["whales"] = cell.counts.whales;
        sens.push_back(c);
    }
    j["sensitivity"] = sens;

    std::vector<double> notionals;
    notionals.reserve(rows.size());
    for (const auto& r : rows) notionals.push_back(static_cast<double>(r.total_notional) / kMicro);
    const auto conc = tiers::concentration(notionals, {0.01, 0.05, 0.126});
    j["concentration"]["gini"] = conc.gini;
    for (const auto& [f, share] : conc.top_shares)
        j["concentration"]["top_shares"][std::to_string(f)] = share;
    // Lorenz points downsampled to at most 200 for the report.
    json lorenz = json::array();
    const std::size_t stride = std::max<std::size_t>(1, conc.lorenz.size() / 200);
    for (std::size_t i = 0; i < conc.lorenz.size(); i += stride)
        lorenz.push_back({conc.lorenz[i].first, conc.lorenz[i].second});
    if (conc.lorenz.back() != std::pair<double, double>(lorenz.back()[0].get<double>(),
                                                        lorenz.back()[1].get<double>()))
        lorenz.push_back({conc.lorenz.back().first, conc.lorenz.back().second});
    j["concentration"]["lorenz"] = lorenz;

    // Cross-tab against cluster labels when the cluster stage has run.
    if (fs::exists(cfg.clusters_file())) {
        timer.input(cfg.clusters_file());
        json cj = json::parse(read_text(cfg.clusters_file()));
        std::map<std::string, std::string> cluster_labels;
        for (const auto& [addr, label] : cj["labels"].items())
            cluster_labels[addr] = label.get<std::string>();
        std::map<std::string, std::string> tier_labels;
        std::map<std::string, std::string> whale_labels;
        for (const auto& [addr, label] : result.labels) {
            tier_labels[addr] = tiers::to_string(label.tier);
            if (label.whale) whale_labels[addr] = "WHALE";
        }
        const auto tab = tiers::crosstab(tier_labels, cluster_labels);
        const auto whale_tab = tiers::crosstab(whale_labels, cluster_labels);
        json cells;
        for (const auto& [key, count] : tab.cells) cells[key.first][key.second] = count;
        for (const auto& [key, count] : whale_tab.cells) cells["WHALE"][key.second] = count;
        j["crosstab"] = cells;
    }

    write_text(cfg.tiers_file(), j.dump(2));
    // Address-level table is a pipeline intermediate; the public bundle
    // excludes it unless privacy is off.
    std::ofstream table(cfg.tiers_table_file(), std::ios::trunc);
    table << "address\ttier\twhale\n";
    for (const auto& [addr, label] : result.labels)
        table << addr << '\t' << tiers::to_string(label.tier) << '\t' << (label.whale ? 1 : 0)
              << '\n';
    table.close();
    timer.output(cfg.tiers_file());
    timer.output(cfg.tiers_table_file());
    return timer.finish();
}

StageResult stage_metrics(const RunConfig& cfg) {
    StageTimer timer(cfg, "metrics");
    timer.input(cfg.corpus_file());
    const Corpus corpus = ingest::read_corpus(cfg.corpus_file());
    auto series = micro::build_series(corpus.records);

    bool withdrawals = false;
    if (fs::exists(cfg.gates_file())) {
        const auto gate_report = load_gates(cfg);
        if (gate_report.g_fill != gates::Verdict::PASS)
            throw GateWithdrawal("G-FILL failed: no fill series to compute metrics on");
        withdrawals = gate_report.g_book != gates::Verdict::PASS;
    }

    const std::string books = books_input(cfg);
    if (!books.empty()) {
        timer.input(books);
        micro::attach_books(series, books);
    }
    const std::string resolutions = resolutions_input(cfg);
    if (!resolutions.empty()) {
        timer.input(resolutions);
        micro::attach_resolutions(series, resolutions);
    }

    const auto panel = micro::compute_panel(series, cfg.panel);
    micro::write_metrics_table(panel, cfg.metrics_file());
    json wj;
    wj["lower_q"] = panel.kyle_winsor.lower_q;
    wj["upper_q"] = panel.kyle_winsor.upper_q;
    wj["lo"] = panel.kyle_winsor.lo;
    wj["hi"] = panel.kyle_winsor.hi;
    wj["outlier_count"] = panel.kyle_winsor.outlier_count;
    write_text(cfg.winsor_file(), wj.dump(2));
    timer.output(cfg.metrics_file());
    timer.output(cfg.winsor_file());
    return timer.finish(withdrawals);
}

namespace {

std::map<std::string, std::string> load_group_labels(const RunConfig& cfg) {
    std::map<std::string, std::string> labels;
    if (cfg.group_axis == "tier") {
        std::ifstream in(cfg.tiers_table_file());
        if (!in) throw std::runtime_error("tier labels missing; run the tiers stage first");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::istringstream ss(line);
            std::string addr, tier, whale;
            if (std::getline(ss, addr, '\t') && std::getline(ss, tier, '\t')) labels[addr] = tier;
        }
        return labels;
    }
    json cj = json::parse(read_text(cfg.clusters_file()));
    for (const auto& [addr, label] : cj["labels"].items()) labels[addr] = label.get<std::string>();
    return labels;
}

} // namespace

StageResult stage_bilateral(const RunConfig& cfg) {
    StageTimer timer(cfg, "bilateral");
    timer.input(cfg.corpus_file());
    timer.input(cfg.metrics_file());
    timer.input(cfg.group_axis == "tier" ? cfg.tiers_table_file() : cfg.clusters_file());

    const Corpus corpus = ingest::read_corpus(cfg.corpus_file());
    const auto labels = load_group_labels(cfg);
    const auto shares = bilateral::archetype_shares(corpus.records, labels);
    const auto metrics = micro::read_metrics_table(cfg.metrics_file());
    const auto results = bilateral::run_bilateral(shares, metrics, cfg.bilateral);
    bilateral::write_bilateral_table(results, cfg.bilateral_file());
    write_text(cfg.bilateral_summary_file(), bilateral::bilateral_summary_json(results, cfg.bilateral));
    timer.output(cfg.bilateral_file());
    timer.output(cfg.bilateral_summary_file());
    return timer.finish();
}

StageResult stage_detect(const RunConfig& cfg) {
    StageTimer timer(cfg, "detect");
    timer.input(cfg.corpus_file());
    const Corpus corpus = ingest::read_corpus(cfg.corpus_file());
    const auto aggregates = features::aggregate(corpus.records);

    json j;

    const auto wash = patterns::detect_wash(aggregates, corpus.records, cfg.wash);
    Usdc wash_gross = 0;
    std::uint64_t wash_pairs = 0;
    for (const auto& c : wash) {
        wash_gross += c.gross_volume;
        wash_pairs += c.intra_window_pairs;
    }
    j["wash"] = {{"candidates", wash.size()},
                 {"gross_volume", format_micro(wash_gross)},
                 {"intra_window_pairs", wash_pairs},
                 {"gross_min", format_micro(cfg.wash.gross_min)},
                 {"net_ratio_max", cfg.wash.net_ratio_max},
                 {"delta_wash_seconds", cfg.wash.delta_wash_seconds},
                 {"note", "upper-bound candidates, not established wash trades"}};
    if (!cfg.privacy) {
        json list = json::array();
        for (const auto& c : wash)
            list.push_back({{"address", c.address},
                            {"gross_volume", format_micro(c.gross_volume)},
                            {"net_ratio", c.net_ratio},
                            {"intra_window_pairs", c.intra_window_pairs}});
        j["wash"]["addresses"] = list;
    }

    const auto graph = patterns::co_occurrence(corpus.records);
    const auto components = patterns::connected_components(graph, 2);
    std::size_t nontrivial = 0;
    for (const auto& comp : components)
        if (comp.size() >= 2) ++nontrivial;
    j["co_occurrence"] = {{"nodes", graph.nodes.size()},
                          {"edges", graph.edges.size()},
                          {"components_min_weight_2", nontrivial}};

    const std::string related = related_input(cfg);
    if (!related.empty()) {
        timer.input(related);
        const auto groups = synth::read_related_map(related);
        json negrisk = json::array();
        for (const auto& [group, members] : groups) {
            const auto series =
                patterns::negrisk_deviation(group, members, corpus.records, cfg.negrisk_threshold);
            json episodes = json::array();
            for (const auto& e : series.episodes)
                episodes.push_back({{"crossing_ts", e.crossing_ts},
                                    {"recovery_ts", e.recovery_ts},
                                    {"correction_seconds", e.correction_seconds()},
                                    {"peak", e.peak}});
            negrisk.push_back(
                {{"group", group}, {"samples", series.samples.size()}, {"episodes", episodes}});
        }
        j["negrisk"] = negrisk;

        const auto pairs =
            patterns::cross_market_pairs(corpus.records, groups, cfg.delta_arb_seconds);
        std::map<std::string, std::uint64_t> per_address;
        for (const auto& p : pairs) ++per_address[p.address];
        j["cross_market_pairs"] = {{"events", pairs.size()},
                                   {"addresses", per_address.size()},
                                   {"delta_arb_seconds", cfg.delta_arb_seconds}};
        if (!cfg.privacy) {
            json addrs;
            for (const auto& [addr, n] : per_address) addrs[addr] = n;
            j["cross_market_pairs"]["per_address"] = addrs;
        }
    }

    const std::string books = books_input(cfg);
    if (!books.empty()) {
        timer.input(books);
        auto series = micro::build_series(corpus.records);
        micro::attach_books(series, books);
        const auto report = patterns::book_swing_scan(series, cfg.panel.swing_threshold,
                                                      cfg.panel.swing_window_seconds);
        j["book_swings"] = {{"markets_with_swings", report.markets_with_swings},
                            {"total_events", report.total_events},
                            {"threshold", cfg.panel.swing_threshold}};
    }

    write_text(cfg.detect_file(), j.dump(2));
    timer.output(cfg.detect_file());
    return timer.finish();
}

StageResult stage_report(const RunConfig& cfg) {
    StageTimer timer(cfg, "report");
    timer.input(cfg.features_file());
    timer.input(cfg.tiers_file());
    const auto rows = features::read_feature_table(cfg.features_file());

    FeedbackReport fb;

    // T3: retail-proximate partitions = clusters whose centroid f3 falls
    // below the population median f3.
    if (fs::exists(cfg.clusters_file())) {
        timer.input(cfg.clusters_file());
        json cj = json::parse(read_text(cfg.clusters_file()));
        std::map<std::string, std::string> labels;
        for (const auto& [addr, label] : cj["labels"].items()) labels[addr] = label.get<std::string>();

        std::map<std::string, std::pair<double, std::uint64_t>> f3_by_cluster; // sum, count
        for (const auto& r : rows) {
            auto it = labels.find(r.address);
            if (it == labels.end()) continue;
            f3_by_cluster[it->second].first += r.raw[1];
            ++f3_by_cluster[it->second].second;
        }
        std::vector<double> all_f3;
        all_f3.reserve(rows.size());
        for (const auto& r : rows) all_f3.push_back(r.raw[1]);
        const double median_f3 = stats::quantile_nearest_rank(all_f3, 0.5);

        std::set<std::string> retail_clusters;
        for (const auto& [label, sc] : f3_by_cluster)
            if (sc.second > 0 && sc.first / static_cast<double>(sc.second) < median_f3)
                retail_clusters.insert(label);

        Usdc retail_notional = 0;
        std::uint64_t retail_fills = 0;
        for (const auto& r : rows) {
            auto it = labels.find(r.address);
            if (it == labels.end() || !retail_clusters.count(it->second)) continue;
            retail_notional += r.total_notional;
            retail_fills += r.n_fills;
        }
        if (retail_fills > 0) {
            fb.t3_mean_retail_notional =
                static_cast<double>(retail_notional) / kMicro / static_cast<double>(retail_fills);
            fb.t3_ratio = *fb.t3_mean_retail_notional / cfg.synthetic_retail_notional;
            fb.t3_ratio_rounded = round3(*fb.t3_ratio);
        } else {
            fb.t3_reason = "no addresses in retail-proximate clusters";
        }
    } else {
        fb.t3_reason = "cluster stage has not run";
    }

    // T5: whale overlay summary.
    json tj = json::parse(read_text(cfg.tiers_file()));
    fb.t5_whale_count = tj["whales"].get<std::uint64_t>();
    fb.gini = tj["concentration"]["gini"].get<double>();
    {
        std::ifstream in(cfg.tiers_table_file());
        std::string line;
        std::getline(in, line);
        std::set<std::string> whales;
        while (std::getline(in, line)) {
            std::istringstream ss(line);
            std::string addr, tier, whale;
            std::getline(ss, addr, '\t');
            std::getline(ss, tier, '\t');
            std::getline(ss, whale, '\t');
            if (whale == "1") whales.insert(addr);
        }
        Usdc total = 0;
        for (const auto& r : rows) {
            total += r.total_notional;
            if (whales.count(r.address)) fb.t5_whale_notional += r.total_notional;
        }
        if (total > 0)
            fb.t5_whale_notional_share =
                static_cast<double>(fb.t5_whale_notional) / static_cast<double>(total);
    }

    json j;
    if (fb.t3_ratio) {
        j["t3"] = {{"mean_retail_notional", *fb.t3_mean_retail_notional},
                   {"synthetic_notional", cfg.synthetic_retail_notional},
                   {"ratio", *fb.t3_ratio},
                   {"ratio_rounded", *fb.t3_ratio_rounded}};
    } else {
        j["t3"] = {{"ratio", nullptr}, {"reason", fb.t3_reason}};
    }
    j["t5"] = {{"whale_count", fb.t5_whale_count},
               {"whale_notional", format_micro(fb.t5_whale_notional)},
               {"whale_notional_share", fb.t5_whale_notional_share}};
    j["concentration"] = {{"gini", fb.gini}};
    write_text(cfg.report_json_file(), j.dump(2));

    std::ostringstream md;
    md << "# Run report\n\n## Feedback tests\n\n";
    if (fb.t3_ratio) {
        md << "- T3 retail notional: measured mean per-fill notional $"
           << *fb.t3_mean_retail_notional << " vs synthetic $" << cfg.synthetic_retail_notional
           << " -> ratio " << *fb.t3_ratio_rounded << "\n";
    } else {
        md << "- T3 retail notional: not computable (" << fb.t3_reason << ")\n";
    }
    md << "- T5 whale overlay: " << fb.t5_whale_count << " whales holding "
       << format_micro(fb.t5_whale_notional) << " USDC ("
       << round3(fb.t5_whale_notional_share * 100) << "% of notional)\n";
    md << "\n## Concentration\n\n- Gini: " << fb.gini << "\n";
    write_text(cfg.report_md_file(), md.str());

    timer.output(cfg.report_json_file());
    timer.output(cfg.report_md_file());
    return timer.finish();
}

// --------------------------------------------------------------------------
// Bundle
// --------------------------------------------------------------------------

namespace {

// Scrub scan: no corpus address may appear anywhere in the public bundle.
void assert_no_addresses(const std::string& dir, const std::set<std::string>& addresses) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string text = read_text(entry.path().string());
        for (std::size_t pos = text.find("0x"); pos != std::string::npos;
             pos = text.find("0x", pos + 1)) {
            if (pos + 42 > text.size()) break;
            const std::string candidate = text.substr(pos, 42);
            if (addresses.count(candidate))
                throw std::runtime_error("privacy scrub: address " + candidate + " leaked into " +
                                         entry.path().string());
        }
    }
}

} // namespace

StageResult stage_bundle(const RunConfig& cfg) {
    StageTimer timer(cfg, "bundle");
    const std::string dir = cfg.bundle_dir();
    fs::remove_all(dir);
    fs::create_directories(dir);

    const auto copy_if_exists = [&](const std::string& src, const std::string& name) {
        if (!fs::exists(src)) return;
        fs::copy_file(src, dir + "/" + name, fs::copy_options::overwrite_existing);
    };
    copy_if_exists(cfg.gates_file(), "gates.json");
    copy_if_exists(cfg.tiers_file(), "tier_aggregates.json");
    copy_if_exists(cfg.bilateral_file(), "bilateral.tsv");
    copy_if_exists(cfg.bilateral_summary_file(), "bilateral_summary.json");
    copy_if_exists(cfg.detect_file(), "detection_aggregates.json");
    copy_if_exists(cfg.report_json_file(), "report.json");
    copy_if_exists(cfg.corpus_manifest_file(), "corpus_manifest.json");
    copy_if_exists(cfg.run_manifest_file(), "run_manifest.json");
    copy_if_exists(cfg.scaler_file(), "scaler.json");
    copy_if_exists(cfg.winsor_file(), "kyle_winsor.json");

    // Metric distributions instead of the raw per-market table.
    if (fs::exists(cfg.metrics_file())) {
        const auto metrics = micro::read_metrics_table(cfg.metrics_file());
        json dist;
        const auto& names = micro::panel_metric_names();
        for (std::size_t m = 0; m < names.size(); ++m) {
            std::vector<double> vals;
            for (const auto& row : metrics)
                if (auto v = row.metric(m)) vals.push_back(*v);
            if (vals.empty()) {
                dist[names[m]] = {{"n", 0}};
                continue;
            }
            std::sort(vals.begin(), vals.end());
            dist[names[m]] = {{"n", vals.size()},
                              {"mean", stats::mean(vals)},
                              {"min", vals.front()},
                              {"p25", stats::quantile_nearest_rank(vals, 0.25)},
                              {"p50", stats::quantile_nearest_rank(vals, 0.50)},
                              {"p75", stats::quantile_nearest_rank(vals, 0.75)},
                              {"max", vals.back()}};
        }
        write_text(dir + "/metric_distributions.json", dist.dump(2));
    }

    if (!cfg.privacy) {
        fs::create_directories(dir + "/address_tables");
        copy_if_exists(cfg.tiers_table_file(), "address_tables/tiers.tsv");
        copy_if_exists(cfg.features_file(), "address_tables/features.tsv");
    } else if (fs::exists(cfg.corpus_file())) {
        const Corpus corpus = ingest::read_corpus(cfg.corpus_file());
        std::set<std::string> addresses;
        for (const auto& r : corpus.records) {
            addresses.insert(r.maker);
            addresses.insert(r.taker);
        }
        assert_no_addresses(dir, addresses);
    }

    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) timer.output(entry.path().string());
    return timer.finish();
}

bool run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages) {
    bool withdrawals = false;
    for (const auto& stage : stages) {
        StageResult r;
        if (stage == "ingest") r = stage_ingest(cfg);
        else if (stage == "gates") r = stage_gates(cfg);
        else if (stage == "features") r = stage_features(cfg);
        else if (stage == "cluster") r = stage_cluster(cfg);
        else if (stage == "tiers") r = stage_tiers(cfg);
        else if (stage == "metrics") r = stage_metrics(cfg);
        else if (stage == "bilateral") r = stage_bilateral(cfg);
        else if (stage == "detect") r = stage_detect(cfg);
        else if (stage == "report") r = stage_report(cfg);
        else if (stage == "bundle") r = stage_bundle(cfg);
        else throw std::invalid_argument("unknown stage: " + stage);
        withdrawals = withdrawals || r.withdrawals;
    }
    return withdrawals;
}

} // namespace fillside::pipeline
