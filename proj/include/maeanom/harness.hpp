#pragma once

// Experiment orchestration. A run directory holds:
//   config.cfg        resolved configuration
//   data/             generated synthetic dataset (when no manifest is given)
//   checkpoints/      mae.ckpt, mae_last.ckpt (periodic), classifier.ckpt
//   logs/             per-stage metrics logs and baseline score files
//   scores.txt  roc.txt  roc.png  summary.txt
// Stages skip work whose outputs already exist, so an interrupted run
// continues from its last checkpoint.

#include "maeanom/config.hpp"
#include "maeanom/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace maeanom {

struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.cfg"; }
    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path mae_checkpoint() const { return checkpoints() / "mae.ckpt"; }
    std::filesystem::path mae_last() const { return checkpoints() / "mae_last.ckpt"; }
    std::filesystem::path classifier_checkpoint() const { return checkpoints() / "classifier.ckpt"; }
    std::filesystem::path logs() const { return root / "logs"; }
    std::filesystem::path baseline_scores(AnomalyMeasure m) const;
    std::filesystem::path scores() const { return root / "scores.txt"; }
    std::filesystem::path roc() const { return root / "roc.txt"; }
    std::filesystem::path roc_png() const { return root / "roc.png"; }
    std::filesystem::path summary() const { return root / "summary.txt"; }
};

struct RunOptions {
    std::ostream* log = nullptr;  // progress lines; null for silence
    int log_every = 10;           // epochs between progress lines
};

struct RunSummary {
    std::string score_method;
    double auroc = 0.0;
    std::map<std::string, double> baselines;  // measure name -> AUROC
    int test_normal = 0;
    int test_abnormal = 0;
    std::map<std::string, std::string> extra;
};

void write_summary(const std::filesystem::path& path, const RunSummary& summary);
RunSummary read_summary(const std::filesystem::path& path);

/// Creates the directory layout and writes config.cfg. An existing snapshot
/// must match the given config exactly.
RunPaths prepare_run(const ExperimentConfig& config, const std::filesystem::path& dir);

/// Reads the configured manifest, or generates (once) the synthetic dataset
/// under the run directory.
SliceManifest resolve_dataset(const ExperimentConfig& config, const RunPaths& paths);

/// Each stage loads what it needs from the run directory.
void stage_train_mae(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options = {});
void stage_train_classifier(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options = {});
ScoredSet stage_score(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options = {});
RunSummary stage_evaluate(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options = {});

/// All stages in order.
RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir,
                          const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Ablations

/// mask_ratio, mae_epochs, input_mode, k_range, per_pixel_beta,
/// loss_on_all_tokens, anomaly_measure, method.
const std::vector<std::string>& ablation_axes();

/// Base config changed along one axis. mask_ratio 0 selects the autoencoder
/// mode; method is one of mae, ae, no_mae; k_range values are "min-max".
ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis, const std::string& value);

struct AblationRow {
    std::string value;
    std::filesystem::path run_dir;
    RunSummary summary;
};

struct AblationResult {
    std::string axis;
    std::vector<AblationRow> rows;
};

struct AblationOptions {
    RunOptions run;
    int jobs = 1;  // >1 runs points concurrently
};

/// One run per value under out_dir/<axis>=<value>, then ablation.txt and
/// ablation.png in out_dir.
AblationResult run_ablation(const ExperimentConfig& base, const std::string& axis,
                            const std::vector<std::string>& values, const std::filesystem::path& out_dir,
                            const AblationOptions& options = {});

void write_ablation_table(const std::filesystem::path& path, const AblationResult& result);
AblationResult read_ablation_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Report

/// Single self-contained HTML file. Inputs are run directories or ablation
/// directories. Throws IncompleteRunError for a run without scores or summary.
void emit_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_path);

}  // namespace maeanom
