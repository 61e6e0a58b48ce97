#pragma once

#include "fillside/bilateral.hpp"
#include "fillside/cluster.hpp"
#include "fillside/features.hpp"
#include "fillside/gates.hpp"
#include "fillside/ingest.hpp"
#include "fillside/micropanel.hpp"
#include "fillside/patterns.hpp"
#include "fillside/synth.hpp"
#include "fillside/tiers.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fillside::pipeline {

// A stage completed but withdrew analyses per the gate report; mapped to
// exit code 2 by the CLI.
struct GateWithdrawal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string workdir = "out";

    // ingest
    std::vector<std::string> rpc_urls;
    std::string fixture_path;
    ingest::LogFilterSpec filter;
    std::string block_time_table;
    std::uint64_t min_fills = 5;

    // features
    features::ScalerMode scaler_mode = features::ScalerMode::WINSOR_Z;
    double winsor_quantile = 0.995;

    // cluster
    std::vector<double> eps_grid = cluster::default_epsilon_grid();
    std::vector<std::size_t> min_pts_grid = cluster::default_min_pts_grid();
    bool fifteen_pair_preset = false;
    std::size_t cluster_cap = 20;
    double noise_threshold = 0.5;
    std::vector<std::size_t> k_range = {3, 4, 5, 6, 7};
    std::uint64_t seed = 20260505;

    // tiers
    tiers::TierThresholds tier_thresholds;
    std::vector<double> sensitivity_grid = {0.90, 0.95, 0.99};

    // metrics
    micro::PanelConfig panel;
    std::string books_path;
    std::string resolutions_path;

    // bilateral
    bilateral::BilateralConfig bilateral;
    std::string group_axis = "cluster"; // or "tier"

    // detect
    patterns::WashConfig wash;
    std::int64_t delta_arb_seconds = 60;
    double negrisk_threshold = 0.02;
    std::string related_map_path;

    // report
    double synthetic_retail_notional = 1000.0;

    bool privacy = true;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig from_file(const std::string& path);

    // Conventional stage file locations under workdir.
    std::string corpus_file() const { return workdir + "/corpus.tsv"; }
    std::string corpus_manifest_file() const { return workdir + "/corpus.manifest.json"; }
    std::string gates_file() const { return workdir + "/gates.json"; }
    std::string features_file() const { return workdir + "/features.tsv"; }
    std::string scaler_file() const { return workdir + "/scaler.json"; }
    std::string clusters_file() const { return workdir + "/clusters.json"; }
    std::string tiers_file() const { return workdir + "/tiers.json"; }
    std::string tiers_table_file() const { return workdir + "/tiers.tsv"; }
    std::string metrics_file() const { return workdir + "/metrics.tsv"; }
    std::string winsor_file() const { return workdir + "/kyle_winsor.json"; }
    std::string bilateral_file() const { return workdir + "/bilateral.tsv"; }
    std::string bilateral_summary_file() const { return workdir + "/bilateral_summary.json"; }
    std::string detect_file() const { return workdir + "/detect.json"; }
    std::string report_json_file() const { return workdir + "/report.json"; }
    std::string report_md_file() const { return workdir + "/report.md"; }
    std::string run_manifest_file() const { return workdir + "/run_manifest.json"; }
    std::string bundle_dir() const { return workdir + "/bundle"; }
};

struct StageManifest {
    std::string stage;
    std::map<std::string, std::string> input_hashes;
    std::string parameter_hash;
    std::map<std::string, std::string> output_hashes;
    double wall_seconds = 0;
};

struct StageResult {
    StageManifest manifest;
    bool withdrawals = false; // stage completed but dropped gated analyses
};

// Stages, in dependency order. Each reads persisted outputs of its inputs,
// so any stage re-runs from intermediates.
StageResult stage_synth(const RunConfig& cfg, const synth::SynthSpec& spec);
StageResult stage_ingest(const RunConfig& cfg);
StageResult stage_gates(const RunConfig& cfg);
StageResult stage_features(const RunConfig& cfg);
StageResult stage_cluster(const RunConfig& cfg);
StageResult stage_tiers(const RunConfig& cfg);
StageResult stage_metrics(const RunConfig& cfg);
StageResult stage_bilateral(const RunConfig& cfg);
StageResult stage_detect(const RunConfig& cfg);
StageResult stage_report(const RunConfig& cfg);
StageResult stage_bundle(const RunConfig& cfg);

// Runs the listed stages in order, appending to the run manifest. Returns
// true when any stage reported gate-driven withdrawals.
bool run_pipeline(const RunConfig& cfg, const std::vector<std::string>& stages);

void append_run_manifest(const RunConfig& cfg, const StageManifest& m);

// Feedback arithmetic, exposed for tests: ratio of measured retail mean
// per-fill notional to the configured synthetic parameter.
struct FeedbackReport {
    std::optional<double> t3_mean_retail_notional;
    std::optional<double> t3_ratio;
    std::optional<double> t3_ratio_rounded; // 3 decimals, as printed
    std::string t3_reason;                  // set when null
    std::uint64_t t5_whale_count = 0;
    Usdc t5_whale_notional = 0;
    double t5_whale_notional_share = 0;
    double gini = 0;
};
double round3(double v);

} // namespace fillside::pipeline
