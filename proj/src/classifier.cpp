#include "maeanom/classifier.hpp"

#include "maeanom/text.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace maeanom {

std::string to_string(InputMode mode) {
    switch (mode) {
        case InputMode::abs_diff: return "abs_diff";
        case InputMode::squared_diff: return "squared_diff";
        case InputMode::raw_recon: return "raw_recon";
    }
    return "?";
}

InputMode parse_input_mode(const std::string& s) {
    if (s == "abs_diff") return InputMode::abs_diff;
    if (s == "squared_diff") return InputMode::squared_diff;
    if (s == "raw_recon") return InputMode::raw_recon;
    throw InvalidArgument("unknown input mode '" + s + "' (abs_diff, squared_diff, raw_recon)");
}

ClassifierInput make_input(const Image& original, const Image& recon_or_pseudo, InputMode mode) {
    if (original.rows() != recon_or_pseudo.rows() || original.cols() != recon_or_pseudo.cols()) {
        throw DimensionError("make_input: image dimensions differ");
    }
    ClassifierInput in;
    in.mode = mode;
    switch (mode) {
        case InputMode::abs_diff: in.image = (recon_or_pseudo - original).cwiseAbs(); break;
        case InputMode::squared_diff: in.image = (recon_or_pseudo - original).array().square().matrix(); break;
        case InputMode::raw_recon: in.image = recon_or_pseudo; break;
    }
    return in;
}

// ---------------------------------------------------------------------------
// BCE

double bce_loss(double label, double prob) {
    const double p = std::clamp(prob, kBceEpsilon, 1.0 - kBceEpsilon);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

double bce_loss(std::span<const double> labels, std::span<const double> probs) {
    if (labels.size() != probs.size() || labels.empty()) throw InvalidArgument("bce_loss: batch sizes differ or empty");
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) total += bce_loss(labels[i], probs[i]);
    return total / static_cast<double>(labels.size());
}

double bce_gradient(double label, double prob) {
    const double p = std::clamp(prob, kBceEpsilon, 1.0 - kBceEpsilon);
    return -label / p + (1.0 - label) / (1.0 - p);
}

double sigmoid(double z) {
    const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    // keep strictly inside (0, 1)
    if (p >= 1.0) return std::nextafter(1.0, 0.0);
    if (p <= 0.0) return std::numeric_limits<double>::denorm_min();
    return p;
}

// ---------------------------------------------------------------------------
// Model

void ClassifierArchitecture::validate() const {
    if (patch_size <= 0 || image_height % patch_size != 0 || image_width % patch_size != 0) {
        throw DimensionError("classifier: image not divisible by patch size");
    }
    if (dim % 4 != 0 || heads <= 0 || dim % heads != 0) throw InvalidArgument("classifier: bad width/heads");
    if (depth < 0 || mlp_ratio <= 0) throw InvalidArgument("classifier: bad depth or mlp ratio");
}

AnomalyClassifier::AnomalyClassifier(const ClassifierArchitecture& arch, InputMode mode, std::uint64_t init_seed)
    : arch_(arch), mode_(mode) {
    arch_.validate();
    Rng rng(init_seed);
    patch_embed = nn::Linear(arch_.patch_size * arch_.patch_size, arch_.dim, rng);
    cls_token.value.resize(1, arch_.dim);
    for (Eigen::Index i = 0; i < cls_token.value.size(); ++i) cls_token.value(0, i) = 0.02 * rng.normal();
    cls_token.init_grad();
    pos = Matrix::Zero(arch_.token_count() + 1, arch_.dim);
    pos.bottomRows(arch_.token_count()) = sincos_position_table(arch_.grid_rows(), arch_.grid_cols(), arch_.dim);
    body = nn::TransformerStack(arch_.dim, arch_.depth, arch_.heads, arch_.mlp_ratio, rng);
    head = nn::Linear(arch_.dim, 1, rng);
}

double AnomalyClassifier::logit(const Image& input, Cache* cache) const {
    if (input.rows() != arch_.image_height || input.cols() != arch_.image_width) {
        throw DimensionError("classifier: input " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                             " does not match " + std::to_string(arch_.image_height) + "x" +
                             std::to_string(arch_.image_width));
    }
    const PatchSequence patches = patchify(input, arch_.patch_size);
    Matrix seq(arch_.token_count() + 1, arch_.dim);
    seq.row(0) = cls_token.value.row(0);
    seq.bottomRows(arch_.token_count()) = patch_embed.forward(patches.patches);
    seq += pos;
    const Matrix out = body.forward(seq, cache ? &cache->body : nullptr);
    Matrix features = out.topRows(1);
    const double z = head.forward(features)(0, 0);
    if (cache) {
        cache->patches = patches.patches;
        cache->features = std::move(features);
    }
    return z;
}

double AnomalyClassifier::predict(const ClassifierInput& input) const {
    if (input.mode != mode_) {
        throw InvalidArgument("classifier was trained on " + to_string(mode_) + " inputs, got " + to_string(input.mode));
    }
    return sigmoid(logit(input.image));
}

void AnomalyClassifier::backward(const Cache& cache, double d_logit) {
    const Matrix d_features = head.backward(cache.features, Matrix::Constant(1, 1, d_logit));
    Matrix d_out = Matrix::Zero(arch_.token_count() + 1, arch_.dim);
    d_out.row(0) = d_features.row(0);
    const Matrix d_seq = body.backward(cache.body, d_out);
    cls_token.grad.row(0) += d_seq.row(0);
    patch_embed.backward(cache.patches, d_seq.bottomRows(arch_.token_count()));
}

nn::NamedParams AnomalyClassifier::parameters() {
    nn::NamedParams out;
    patch_embed.collect("patch_embed", out);
    out.emplace_back("cls_token", &cls_token);
    body.collect("body", out);
    head.collect("head", out);
    return out;
}

Archive AnomalyClassifier::to_archive() const {
    Archive a;
    a.meta["kind"] = "classifier";
    a.meta["input_mode"] = to_string(mode_);
    a.meta["arch.image_height"] = std::to_string(arch_.image_height);
    a.meta["arch.image_width"] = std::to_string(arch_.image_width);
    a.meta["arch.patch_size"] = std::to_string(arch_.patch_size);
    a.meta["arch.dim"] = std::to_string(arch_.dim);
    a.meta["arch.depth"] = std::to_string(arch_.depth);
    a.meta["arch.heads"] = std::to_string(arch_.heads);
    a.meta["arch.mlp_ratio"] = text::format_double(arch_.mlp_ratio);
    for (const auto& [name, p] : const_cast<AnomalyClassifier*>(this)->parameters()) {
        a.arrays.emplace_back("param/" + name, p->value);
    }
    return a;
}

AnomalyClassifier AnomalyClassifier::from_archive(const Archive& a) {
    if (a.meta.count("kind") == 0 || a.get("kind") != "classifier") throw FormatError("archive is not a classifier checkpoint");
    auto get_int = [&](const std::string& k) { return static_cast<int>(text::parse_int(a.get(k), k)); };
    ClassifierArchitecture arch;
    arch.image_height = get_int("arch.image_height");
    arch.image_width = get_int("arch.image_width");
    arch.patch_size = get_int("arch.patch_size");
    arch.dim = get_int("arch.dim");
    arch.depth = get_int("arch.depth");
    arch.heads = get_int("arch.heads");
    arch.mlp_ratio = text::parse_double(a.get("arch.mlp_ratio"), "mlp_ratio");
    AnomalyClassifier c(arch, parse_input_mode(a.get("input_mode")), 0);
    for (auto& [name, p] : c.parameters()) {
        const Matrix& m = a.array("param/" + name);
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
            throw FormatError("checkpoint array '" + name + "' has wrong shape");
        }
        p->value = m;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Training and scoring

Image reference_image(const MaeModel* mae, const Image& image, bool no_mae, const ReconstructOptions& recon) {
    if (no_mae) return image;
    if (!mae) throw InvalidArgument("an MAE checkpoint is required unless no_mae is set");
    return reconstruct(*mae, image, recon).image;
}

TrainingPair make_training_pair(const Image& original, const Image& reference, const PseudoAbnormalSpec& spec,
                                InputMode mode) {
    return {make_input(original, reference, mode), make_input(original, apply(reference, spec), mode)};
}

ClassifierHistory train_classifier(AnomalyClassifier& classifier, const MaeModel* mae,
                                   std::span<const TrainingSample> samples, const ClassifierTrainConfig& config) {
    require_normal_only(samples, "train_classifier");
    if (samples.empty()) throw InvalidArgument("train_classifier: empty training set");
    if (!config.no_mae && !mae) throw InvalidArgument("train_classifier: missing MAE model");
    if (config.batch_size <= 0 || config.epochs < 0) throw InvalidArgument("train_classifier: bad epochs or batch size");

    // The MAE is frozen, so each reference is computed once.
    std::vector<Image> references;
    references.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ReconstructOptions r = config.recon;
        r.seed = derive_seed(config.recon.seed, {static_cast<std::uint64_t>(i)});
        references.push_back(reference_image(mae, samples[i].image, config.no_mae, r));
    }

    auto params = classifier.parameters();
    nn::AdamW optimizer(params, {.weight_decay = config.weight_decay});
    nn::zero_grads(params);

    std::ofstream log;
    if (!config.metrics_log.empty()) {
        if (config.metrics_log.has_parent_path()) std::filesystem::create_directories(config.metrics_log.parent_path());
        log.open(config.metrics_log, std::ios::trunc);
        if (!log) throw IoError("cannot open metrics log " + config.metrics_log.string());
    }

    const auto start = std::chrono::steady_clock::now();
    ClassifierHistory history;
    std::vector<std::size_t> order(samples.size());
    AnomalyClassifier::Cache cache;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = nn::cosine_lr(config.lr, epoch, config.epochs, config.warmup_epochs);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), 0x5u}));
        shuffle_rng.shuffle(order);

        double loss = 0.0;
        int correct = 0;
        int in_batch = 0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const std::size_t idx = order[pos];
            const Image& x = samples[idx].image;
            const std::uint64_t spec_seed =
                config.resample_per_epoch
                    ? derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx), 0x2u})
                    : derive_seed(config.seed, {static_cast<std::uint64_t>(idx), 0x2u});
            const auto spec = sample_spec(static_cast<int>(x.rows()), static_cast<int>(x.cols()), config.k_min,
                                          config.k_max, config.size_min, config.size_max, spec_seed,
                                          config.per_pixel_beta);
            const TrainingPair pair = make_training_pair(x, references[idx], spec, classifier.input_mode());

            for (const auto& [input, label] : {std::pair{&pair.negative, 0.0}, std::pair{&pair.positive, 1.0}}) {
                const double z = classifier.logit(input->image, &cache);
                const double p = sigmoid(z);
                loss += bce_loss(label, p);
                if ((p >= 0.5) == (label > 0.5)) ++correct;
                // d bce / dz for a sigmoid output
                classifier.backward(cache, p - label);
                ++in_batch;
            }
            if (in_batch >= config.batch_size || pos + 1 == order.size()) {
                nn::scale_grads(params, 1.0 / in_batch);
                optimizer.step(params, lr);
                nn::zero_grads(params);
                in_batch = 0;
            }
        }
        const double count = 2.0 * static_cast<double>(samples.size());
        history.loss.push_back(loss / count);
        history.accuracy.push_back(correct / count);
        if (log) {
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            log << "epoch=" << epoch + 1 << " loss=" << text::format_double(history.loss.back())
                << " accuracy=" << history.accuracy.back() << " wall_time=" << wall << '\n';
            log.flush();
        }
        if (config.on_epoch) config.on_epoch(epoch + 1, history.loss.back(), history.accuracy.back());
    }
    return history;
}

double score(const AnomalyClassifier& classifier, const MaeModel* mae, const Image& image, const ScoreOptions& options) {
    const InputMode mode = options.requested_mode.value_or(classifier.input_mode());
    if (mode != classifier.input_mode()) {
        throw InvalidArgument("score: checkpoint was trained on " + to_string(classifier.input_mode()) +
                              " inputs, request asked for " + to_string(mode));
    }
    const Image ref = reference_image(mae, image, options.no_mae, options.recon);
    return classifier.predict(make_input(image, ref, mode));
}

}  // namespace maeanom
