#pragma once

// Experiment configuration: a flat "key = value" text file with a schema
// version. Every key has a fixed type; unknown keys and malformed values are
// hard errors.

#include "maeanom/classifier.hpp"
#include "maeanom/data.hpp"
#include "maeanom/mae.hpp"
#include "maeanom/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maeanom {

inline constexpr int kConfigSchemaVersion = 1;

/// What produces the test-set anomaly score.
enum class ScoreMethod { classifier, mse, l1, ssim };

std::string to_string(ScoreMethod m);
ScoreMethod parse_score_method(const std::string& s);

struct ExperimentConfig {
    // data
    std::string manifest;  // empty: generate the synthetic dataset into the run directory
    SynthSpec synth;       // height/width are taken from image_height/image_width
    SynthCounts synth_counts;
    std::uint64_t synth_seed = 7;

    int image_height = 64;
    int image_width = 64;
    int patch_size = 8;

    // MAE
    int enc_dim = 64;
    int enc_depth = 2;
    int enc_heads = 4;
    int dec_dim = 64;
    int dec_depth = 2;
    int dec_heads = 4;
    double mae_mlp_ratio = 4.0;
    double mask_ratio = 0.75;
    int mae_epochs = 1600;
    int mae_batch_size = 16;
    double mae_lr = 1e-3;
    double mae_weight_decay = 0.05;
    int mae_warmup_epochs = 10;
    int mae_checkpoint_interval = 50;
    std::uint64_t mae_init_seed = 1;
    std::uint64_t mae_seed = 3;

    // reconstruction
    int num_passes = 4;
    std::uint64_t recon_seed = 11;

    // classifier
    int cls_dim = 64;
    int cls_depth = 2;
    int cls_heads = 4;
    double cls_mlp_ratio = 4.0;
    InputMode input_mode = InputMode::abs_diff;
    int cls_epochs = 100;
    int cls_batch_size = 16;
    double cls_lr = 1e-3;
    double cls_weight_decay = 0.05;
    int cls_warmup_epochs = 0;
    bool resample_per_epoch = true;
    std::uint64_t cls_init_seed = 2;
    std::uint64_t cls_seed = 5;

    // pseudo-abnormal boxes; size 0 picks the default for the image side
    int k_min = 1;
    int k_max = 10;
    int box_size_min = 0;
    int box_size_max = 0;
    bool per_pixel_beta = false;

    // ablation switches
    bool loss_on_all_tokens = false;
    bool no_mae = false;
    bool ae_mode = false;  // mask ratio 0, loss on all tokens, no visible-patch replacement

    // evaluation
    ScoreMethod score_method = ScoreMethod::classifier;
    std::uint64_t score_seed = 99;

    double effective_mask_ratio() const { return ae_mode ? 0.0 : mask_ratio; }
    LossScope effective_loss_scope() const;
    std::pair<int, int> effective_box_sizes() const;
    bool uses_mae() const { return !no_mae; }

    SynthSpec synth_spec() const;
    MaeArchitecture mae_architecture() const;
    ClassifierArchitecture classifier_architecture() const;
    MaeTrainConfig mae_train_config() const;
    ReconstructOptions reconstruct_options() const;
    ClassifierTrainConfig classifier_train_config() const;

    /// Cross-key consistency (architectures, ranges, switch combinations).
    void validate() const;
};

/// Sets one key from its textual value. Throws InvalidArgument for unknown
/// keys or values that do not parse as the key's type.
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value);

/// "key=value" override, as passed on the command line.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Textual value of one key.
std::string get_value(const ExperimentConfig& config, const std::string& key);

/// All keys in file order.
const std::vector<std::string>& config_keys();

std::string serialize(const ExperimentConfig& config);
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Keys whose values differ.
std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace maeanom
