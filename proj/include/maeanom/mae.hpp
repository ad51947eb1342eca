#pragma once

// Masked autoencoder: the encoder sees only visible tokens, a lightweight
// decoder fills masked positions with a shared learned mask token, and the
// reconstruction loss is taken over masked patches.

#include "maeanom/archive.hpp"
#include "maeanom/nn.hpp"
#include "maeanom/patchcore.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maeanom {

struct TrainingSample {
    std::string id;
    Image image;
    Label label = Label::normal;
};

/// Throws DataContaminationError if any sample is labeled abnormal.
void require_normal_only(std::span<const TrainingSample> samples, const std::string& stage);

struct MaeArchitecture {
    int image_height = 64;
    int image_width = 64;
    int patch_size = 8;
    int enc_dim = 64;
    int enc_depth = 2;
    int enc_heads = 4;
    int dec_dim = 64;
    int dec_depth = 2;
    int dec_heads = 4;
    double mlp_ratio = 4.0;

    int grid_rows() const { return image_height / patch_size; }
    int grid_cols() const { return image_width / patch_size; }
    int token_count() const { return grid_rows() * grid_cols(); }
    int patch_pixels() const { return patch_size * patch_size; }
    void validate() const;

    void write(std::map<std::string, std::string>& meta, const std::string& prefix) const;
    static MaeArchitecture read(const std::map<std::string, std::string>& meta, const std::string& prefix);
};

class MaeModel {
public:
    struct Cache {
        Matrix patches;
        MaskPlan plan;
        nn::TransformerStack::Cache encoder;
        Matrix encoded;
        nn::TransformerStack::Cache decoder;
        Matrix decoded;
    };

    MaeModel(const MaeArchitecture& arch, std::uint64_t init_seed);

    /// Predicted patches, one row per token position (n x p*p).
    Matrix forward(const PatchSequence& patches, const MaskPlan& plan, Cache* cache = nullptr) const;

    /// Decoder input Z: encoded rows at visible positions, the mask token at
    /// masked positions, plus the decoder position table.
    Matrix decoder_input(const Matrix& encoded, const MaskPlan& plan) const;

    /// Accumulates parameter gradients for dL/d(prediction).
    void backward(const Cache& cache, const Matrix& d_pred);

    nn::NamedParams parameters();
    const MaeArchitecture& architecture() const { return arch_; }

    void write_params(Archive& archive) const;
    void read_params(const Archive& archive);

    nn::Linear patch_embed;
    Matrix pos_encoder;
    nn::TransformerStack encoder;
    nn::Linear decoder_embed;
    nn::Param mask_token;  // 1 x dec_dim
    Matrix pos_decoder;
    nn::TransformerStack decoder;
    nn::Linear head;

    int trained_epochs = 0;

private:
    MaeArchitecture arch_;
};

enum class LossScope { masked, all_tokens };

/// Mean over the scoped patches of the per-patch mean squared pixel error.
/// Throws InvalidArgument when the scope is empty (no masked tokens).
double masked_loss(const Matrix& predicted, const Matrix& target, const MaskPlan& plan,
                   LossScope scope = LossScope::masked);

/// dL/d(predicted); rows outside the scope are exactly zero.
Matrix masked_loss_gradient(const Matrix& predicted, const Matrix& target, const MaskPlan& plan,
                            LossScope scope = LossScope::masked);

struct MaeTrainConfig {
    int epochs = 1600;
    int batch_size = 16;
    double lr = 1e-3;
    double weight_decay = 0.05;
    int warmup_epochs = 10;
    double mask_ratio = 0.75;
    LossScope loss_scope = LossScope::masked;
    std::uint64_t seed = 0;
    int checkpoint_interval = 0;          // epochs; 0 disables periodic checkpoints
    std::filesystem::path checkpoint_path;  // periodic checkpoint target
    std::filesystem::path metrics_log;    // line-delimited epoch metrics
    std::map<std::string, std::string> metadata;  // copied into checkpoints
    std::function<void(int epoch, double loss)> on_epoch;
};

struct MaeTrainState {
    int epochs_done = 0;
    std::vector<double> loss_history;
};

/// Trains in place. When `resume` holds a checkpoint written by this
/// function, optimizer state and history are restored and training continues
/// from the next epoch, giving the same result as an uninterrupted run.
MaeTrainState train_mae(MaeModel& model, std::span<const TrainingSample> samples, const MaeTrainConfig& config,
                        const Archive* resume = nullptr);

/// Checkpoint holding model params, architecture, and the given training state.
Archive make_mae_checkpoint(const MaeModel& model, const MaeTrainConfig& config, const MaeTrainState& state,
                            const nn::AdamW* optimizer);
MaeModel load_mae(const Archive& archive);

struct ReconstructOptions {
    int num_passes = 4;
    bool replace_visible = true;
    double mask_ratio = 0.75;
    std::uint64_t seed = 0;
};

struct Reconstruction {
    Image image;                // pixel-wise mean of passes, in [0, 1]
    std::vector<Image> passes;  // each clipped to [0, 1]
    int num_passes = 0;
    bool replace_visible = true;
};

/// Each pass draws an independent mask; with replace_visible, visible patches
/// are overwritten by the original pixels.
Reconstruction reconstruct(const MaeModel& model, const Image& image, const ReconstructOptions& options = {});

}  // namespace maeanom
