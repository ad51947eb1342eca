#pragma once

// Supervised anomaly classifier over difference images. Negatives are
// |recon - X|, positives are |pseudo_abnormal(recon) - X|; the anomaly score
// is the predicted probability of the positive class.

#include "maeanom/mae.hpp"
#include "maeanom/nn.hpp"
#include "maeanom/patchcore.hpp"
#include "maeanom/pseudoanom.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maeanom {

enum class InputMode { abs_diff, squared_diff, raw_recon };

std::string to_string(InputMode mode);
InputMode parse_input_mode(const std::string& s);

struct ClassifierInput {
    Image image;
    InputMode mode = InputMode::abs_diff;
};

/// abs_diff: |a - b|; squared_diff: (a - b)^2; raw_recon: b unchanged.
ClassifierInput make_input(const Image& original, const Image& recon_or_pseudo, InputMode mode);

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kBceEpsilon = 1e-7;

/// -[y log p + (1 - y) log(1 - p)]
double bce_loss(double label, double prob);
/// Batch mean.
double bce_loss(std::span<const double> labels, std::span<const double> probs);
/// d bce / d prob.
double bce_gradient(double label, double prob);

double sigmoid(double z);

struct ClassifierArchitecture {
    int image_height = 64;
    int image_width = 64;
    int patch_size = 8;
    int dim = 64;
    int depth = 2;
    int heads = 4;
    double mlp_ratio = 4.0;

    int grid_rows() const { return image_height / patch_size; }
    int grid_cols() const { return image_width / patch_size; }
    int token_count() const { return grid_rows() * grid_cols(); }
    void validate() const;
};

/// ViT with a learned class token; the class-token output feeds a linear
/// logit head.
class AnomalyClassifier {
public:
    struct Cache {
        Matrix patches;
        nn::TransformerStack::Cache body;
        Matrix features;  // class-token row after the body
    };

    AnomalyClassifier(const ClassifierArchitecture& arch, InputMode mode, std::uint64_t init_seed);

    double logit(const Image& input, Cache* cache = nullptr) const;
    /// Probability of the pseudo-abnormal class, strictly inside (0, 1).
    /// Throws InvalidArgument when the input mode differs from the trained one.
    double predict(const ClassifierInput& input) const;
    void backward(const Cache& cache, double d_logit);

    nn::NamedParams parameters();
    const ClassifierArchitecture& architecture() const { return arch_; }
    InputMode input_mode() const { return mode_; }

    Archive to_archive() const;
    static AnomalyClassifier from_archive(const Archive& archive);

    nn::Linear patch_embed;
    nn::Param cls_token;  // 1 x dim
    Matrix pos;           // (n + 1) x dim; class-token row is zero
    nn::TransformerStack body;
    nn::Linear head;      // dim -> 1

private:
    ClassifierArchitecture arch_;
    InputMode mode_;
};

struct ClassifierTrainConfig {
    int epochs = 100;
    int batch_size = 16;
    double lr = 1e-3;
    double weight_decay = 0.05;
    int warmup_epochs = 0;
    int k_min = 1;
    int k_max = 10;
    int size_min = 5;
    int size_max = 12;
    bool per_pixel_beta = false;
    bool resample_per_epoch = true;
    bool no_mae = false;           // classify raw images; no reconstruction
    ReconstructOptions recon;      // seed is combined with the sample index
    std::uint64_t seed = 0;
    std::filesystem::path metrics_log;
    std::function<void(int epoch, double loss, double accuracy)> on_epoch;
};

struct ClassifierHistory {
    std::vector<double> loss;
    std::vector<double> accuracy;  // fraction of pairs members classified correctly at 0.5
};

/// Reference image the classifier compares against: the MAE reconstruction,
/// or the image itself when no_mae is set.
Image reference_image(const MaeModel* mae, const Image& image, bool no_mae, const ReconstructOptions& recon);

/// Negative/positive training inputs for one normal image.
struct TrainingPair {
    ClassifierInput negative;
    ClassifierInput positive;
};
TrainingPair make_training_pair(const Image& original, const Image& reference, const PseudoAbnormalSpec& spec,
                                InputMode mode);

ClassifierHistory train_classifier(AnomalyClassifier& classifier, const MaeModel* mae,
                                   std::span<const TrainingSample> samples, const ClassifierTrainConfig& config);

struct ScoreOptions {
    ReconstructOptions recon;
    bool no_mae = false;
    std::optional<InputMode> requested_mode;
};

/// classifier(make_input(X, reconstruct(X), trained mode)).
double score(const AnomalyClassifier& classifier, const MaeModel* mae, const Image& image,
             const ScoreOptions& options = {});

}  // namespace maeanom
