#include "maeanom/mae.hpp"

#include "maeanom/text.hpp"

#include <chrono>
#include <fstream>
#include <numeric>

namespace maeanom {

void require_normal_only(std::span<const TrainingSample> samples, const std::string& stage) {
    for (const auto& s : samples) {
        if (s.label != Label::normal) {
            throw DataContaminationError(stage + ": training set contains abnormal sample '" + s.id + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// Architecture

void MaeArchitecture::validate() const {
    if (patch_size <= 0 || image_height <= 0 || image_width <= 0) throw InvalidArgument("MAE: non-positive dimension");
    if (image_height % patch_size != 0 || image_width % patch_size != 0) {
        throw DimensionError("MAE: image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                             " not divisible by patch size " + std::to_string(patch_size));
    }
    if (enc_dim % 4 != 0 || dec_dim % 4 != 0) throw InvalidArgument("MAE: widths must be divisible by 4");
    if (enc_heads <= 0 || enc_dim % enc_heads != 0 || dec_heads <= 0 || dec_dim % dec_heads != 0) {
        throw InvalidArgument("MAE: width not divisible by head count");
    }
    if (enc_depth < 0 || dec_depth < 0 || mlp_ratio <= 0) throw InvalidArgument("MAE: bad depth or mlp ratio");
}

void MaeArchitecture::write(std::map<std::string, std::string>& meta, const std::string& prefix) const {
    meta[prefix + "image_height"] = std::to_string(image_height);
    meta[prefix + "image_width"] = std::to_string(image_width);
    meta[prefix + "patch_size"] = std::to_string(patch_size);
    meta[prefix + "enc_dim"] = std::to_string(enc_dim);
    meta[prefix + "enc_depth"] = std::to_string(enc_depth);
    meta[prefix + "enc_heads"] = std::to_string(enc_heads);
    meta[prefix + "dec_dim"] = std::to_string(dec_dim);
    meta[prefix + "dec_depth"] = std::to_string(dec_depth);
    meta[prefix + "dec_heads"] = std::to_string(dec_heads);
    meta[prefix + "mlp_ratio"] = text::format_double(mlp_ratio);
}

MaeArchitecture MaeArchitecture::read(const std::map<std::string, std::string>& meta, const std::string& prefix) {
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = meta.find(prefix + key);
        if (it == meta.end()) throw FormatError("checkpoint missing '" + prefix + key + "'");
        return it->second;
    };
    auto get_int = [&](const std::string& key) { return static_cast<int>(text::parse_int(get(key), key)); };
    MaeArchitecture a;
    a.image_height = get_int("image_height");
    a.image_width = get_int("image_width");
    a.patch_size = get_int("patch_size");
    a.enc_dim = get_int("enc_dim");
    a.enc_depth = get_int("enc_depth");
    a.enc_heads = get_int("enc_heads");
    a.dec_dim = get_int("dec_dim");
    a.dec_depth = get_int("dec_depth");
    a.dec_heads = get_int("dec_heads");
    a.mlp_ratio = text::parse_double(get("mlp_ratio"), "mlp_ratio");
    a.validate();
    return a;
}

// ---------------------------------------------------------------------------
// Model

namespace {

MaeArchitecture validated(const MaeArchitecture& arch) {
    arch.validate();
    return arch;
}

}  // namespace

MaeModel::MaeModel(const MaeArchitecture& arch, std::uint64_t init_seed) : arch_(validated(arch)) {
    Rng rng(init_seed);
    patch_embed = nn::Linear(arch_.patch_pixels(), arch_.enc_dim, rng);
    pos_encoder = sincos_position_table(arch_.grid_rows(), arch_.grid_cols(), arch_.enc_dim);
    encoder = nn::TransformerStack(arch_.enc_dim, arch_.enc_depth, arch_.enc_heads, arch_.mlp_ratio, rng);
    decoder_embed = nn::Linear(arch_.enc_dim, arch_.dec_dim, rng);
    mask_token.value.resize(1, arch_.dec_dim);
    for (Eigen::Index i = 0; i < mask_token.value.size(); ++i) mask_token.value(0, i) = 0.02 * rng.normal();
    mask_token.init_grad();
    pos_decoder = sincos_position_table(arch_.grid_rows(), arch_.grid_cols(), arch_.dec_dim);
    decoder = nn::TransformerStack(arch_.dec_dim, arch_.dec_depth, arch_.dec_heads, arch_.mlp_ratio, rng);
    head = nn::Linear(arch_.dec_dim, arch_.patch_pixels(), rng);
}

Matrix MaeModel::decoder_input(const Matrix& encoded, const MaskPlan& plan) const {
    const Matrix projected = decoder_embed.forward(encoded);
    Matrix z(plan.token_count, arch_.dec_dim);
    for (std::size_t i = 0; i < plan.visible.size(); ++i) z.row(plan.visible[i]) = projected.row(static_cast<Eigen::Index>(i));
    for (int idx : plan.masked) z.row(idx) = mask_token.value.row(0);
    z += pos_decoder;
    return z;
}

Matrix MaeModel::forward(const PatchSequence& patches, const MaskPlan& plan, Cache* cache) const {
    const int n = arch_.token_count();
    if (patches.count() != n || patches.patches.cols() != arch_.patch_pixels()) {
        throw DimensionError("MAE forward: expected " + std::to_string(n) + " patches of " +
                             std::to_string(arch_.patch_pixels()) + " pixels");
    }
    if (plan.token_count != n || plan.masked.size() + plan.visible.size() != static_cast<std::size_t>(n)) {
        throw DimensionError("MAE forward: mask plan covers " + std::to_string(plan.token_count) +
                             " tokens, model has " + std::to_string(n));
    }
    const TokenSequence tokens = embed(patches, patch_embed.weight.value, patch_embed.bias.value.row(0), pos_encoder);
    const Matrix visible = gather_rows(tokens.tokens, plan.visible);
    Matrix encoded = encoder.forward(visible, cache ? &cache->encoder : nullptr);
    const Matrix z = decoder_input(encoded, plan);
    Matrix decoded = decoder.forward(z, cache ? &cache->decoder : nullptr);
    Matrix pred = head.forward(decoded);
    if (cache) {
        cache->patches = patches.patches;
        cache->plan = plan;
        cache->encoded = std::move(encoded);
        cache->decoded = std::move(decoded);
    }
    return pred;
}

void MaeModel::backward(const Cache& cache, const Matrix& d_pred) {
    const Matrix d_decoded = head.backward(cache.decoded, d_pred);
    const Matrix dz = decoder.backward(cache.decoder, d_decoded);
    for (int idx : cache.plan.masked) mask_token.grad.row(0) += dz.row(idx);
    const Matrix d_projected = gather_rows(dz, cache.plan.visible);
    const Matrix d_encoded = decoder_embed.backward(cache.encoded, d_projected);
    const Matrix d_visible = encoder.backward(cache.encoder, d_encoded);
    Matrix d_tokens = Matrix::Zero(cache.plan.token_count, arch_.enc_dim);
    for (std::size_t i = 0; i < cache.plan.visible.size(); ++i) {
        d_tokens.row(cache.plan.visible[i]) = d_visible.row(static_cast<Eigen::Index>(i));
    }
    patch_embed.backward(cache.patches, d_tokens);
}

nn::NamedParams MaeModel::parameters() {
    nn::NamedParams out;
    patch_embed.collect("patch_embed", out);
    encoder.collect("encoder", out);
    decoder_embed.collect("decoder_embed", out);
    out.emplace_back("mask_token", &mask_token);
    decoder.collect("decoder", out);
    head.collect("head", out);
    return out;
}

void MaeModel::write_params(Archive& archive) const {
    for (const auto& [name, p] : const_cast<MaeModel*>(this)->parameters()) {
        archive.arrays.emplace_back("param/" + name, p->value);
    }
}

void MaeModel::read_params(const Archive& archive) {
    for (auto& [name, p] : parameters()) {
        const Matrix& m = archive.array("param/" + name);
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
            throw FormatError("checkpoint array '" + name + "' has wrong shape");
        }
        p->value = m;
    }
}

// ---------------------------------------------------------------------------
// Loss

namespace {

std::vector<int> loss_rows(const MaskPlan& plan, LossScope scope) {
    if (scope == LossScope::masked) return plan.masked;
    std::vector<int> all(static_cast<std::size_t>(plan.token_count));
    std::iota(all.begin(), all.end(), 0);
    return all;
}

void check_loss_shapes(const Matrix& predicted, const Matrix& target, const MaskPlan& plan) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
        throw DimensionError("masked loss: prediction and target shapes differ");
    }
    if (predicted.rows() != plan.token_count) throw DimensionError("masked loss: plan does not match prediction rows");
}

}  // namespace

double masked_loss(const Matrix& predicted, const Matrix& target, const MaskPlan& plan, LossScope scope) {
    check_loss_shapes(predicted, target, plan);
    const auto rows = loss_rows(plan, scope);
    if (rows.empty()) throw InvalidArgument("masked loss: no masked tokens, loss is undefined");
    double total = 0.0;
    for (int i : rows) total += (target.row(i) - predicted.row(i)).squaredNorm() / static_cast<double>(target.cols());
    return total / static_cast<double>(rows.size());
}

Matrix masked_loss_gradient(const Matrix& predicted, const Matrix& target, const MaskPlan& plan, LossScope scope) {
    check_loss_shapes(predicted, target, plan);
    const auto rows = loss_rows(plan, scope);
    if (rows.empty()) throw InvalidArgument("masked loss: no masked tokens, loss is undefined");
    Matrix grad = Matrix::Zero(predicted.rows(), predicted.cols());
    const double factor = 2.0 / (static_cast<double>(rows.size()) * static_cast<double>(target.cols()));
    for (int i : rows) grad.row(i) = factor * (predicted.row(i) - target.row(i));
    return grad;
}

// ---------------------------------------------------------------------------
// Training

Archive make_mae_checkpoint(const MaeModel& model, const MaeTrainConfig& config, const MaeTrainState& state,
                            const nn::AdamW* optimizer) {
    Archive a;
    a.meta = config.metadata;
    a.meta["kind"] = "mae";
    model.architecture().write(a.meta, "arch.");
    a.meta["train.mask_ratio"] = text::format_double(config.mask_ratio);
    a.meta["train.epochs"] = std::to_string(config.epochs);
    a.meta["train.seed"] = std::to_string(config.seed);
    a.meta["train.loss_scope"] = config.loss_scope == LossScope::masked ? "masked" : "all_tokens";
    a.meta["train.epochs_done"] = std::to_string(state.epochs_done);
    model.write_params(a);
    Matrix history(1, static_cast<Eigen::Index>(state.loss_history.size()));
    for (std::size_t i = 0; i < state.loss_history.size(); ++i) history(0, static_cast<Eigen::Index>(i)) = state.loss_history[i];
    a.arrays.emplace_back("loss_history", history);
    if (optimizer) {
        a.meta["adam.steps"] = std::to_string(optimizer->steps());
        const auto names = const_cast<MaeModel&>(model).parameters();
        for (std::size_t i = 0; i < names.size(); ++i) {
            a.arrays.emplace_back("adam.m/" + names[i].first, optimizer->first_moments()[i]);
            a.arrays.emplace_back("adam.v/" + names[i].first, optimizer->second_moments()[i]);
        }
    }
    return a;
}

MaeModel load_mae(const Archive& archive) {
    if (archive.meta.count("kind") == 0 || archive.get("kind") != "mae") throw FormatError("archive is not an MAE checkpoint");
    MaeModel model(MaeArchitecture::read(archive.meta, "arch."), 0);
    model.read_params(archive);
    model.trained_epochs = static_cast<int>(text::parse_int(archive.get("train.epochs_done"), "epochs_done"));
    return model;
}

MaeTrainState train_mae(MaeModel& model, std::span<const TrainingSample> samples, const MaeTrainConfig& config,
                        const Archive* resume) {
    require_normal_only(samples, "train_mae");
    if (samples.empty()) throw InvalidArgument("train_mae: empty training set");
    if (config.batch_size <= 0 || config.epochs < 0) throw InvalidArgument("train_mae: bad epochs or batch size");
    const int n_tokens = model.architecture().token_count();
    if (config.loss_scope == LossScope::masked && masked_count(n_tokens, config.mask_ratio) == 0) {
        throw InvalidArgument("train_mae: mask ratio " + text::format_double(config.mask_ratio) +
                              " masks no tokens; the masked loss is undefined (use the all-tokens loss)");
    }

    std::vector<PatchSequence> patches;
    patches.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.image.rows() != model.architecture().image_height || s.image.cols() != model.architecture().image_width) {
            throw DimensionError("train_mae: sample '" + s.id + "' has the wrong dimensions");
        }
        patches.push_back(patchify(s.image, model.architecture().patch_size));
    }

    auto params = model.parameters();
    nn::AdamW optimizer(params, {.weight_decay = config.weight_decay});
    MaeTrainState state;

    if (resume) {
        model.read_params(*resume);
        state.epochs_done = static_cast<int>(text::parse_int(resume->get("train.epochs_done"), "epochs_done"));
        const Matrix& hist = resume->array("loss_history");
        state.loss_history.assign(hist.data(), hist.data() + hist.size());
        optimizer.set_steps(text::parse_int(resume->get("adam.steps"), "adam.steps"));
        for (std::size_t i = 0; i < params.size(); ++i) {
            optimizer.first_moments()[i] = resume->array("adam.m/" + params[i].first);
            optimizer.second_moments()[i] = resume->array("adam.v/" + params[i].first);
        }
    }

    std::ofstream log;
    if (!config.metrics_log.empty()) {
        if (config.metrics_log.has_parent_path()) std::filesystem::create_directories(config.metrics_log.parent_path());
        log.open(config.metrics_log, resume ? std::ios::app : std::ios::trunc);
        if (!log) throw IoError("cannot open metrics log " + config.metrics_log.string());
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(samples.size());
    nn::zero_grads(params);
    for (int epoch = state.epochs_done; epoch < config.epochs; ++epoch) {
        const double lr = nn::cosine_lr(config.lr, epoch, config.epochs, config.warmup_epochs);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), 0x5u}));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        int in_batch = 0;
        MaeModel::Cache cache;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const std::size_t idx = order[pos];
            const MaskPlan plan = make_mask_plan(
                n_tokens, config.mask_ratio,
                derive_seed(config.seed, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx), 0x1u}));
            const Matrix pred = model.forward(patches[idx], plan, &cache);
            epoch_loss += masked_loss(pred, patches[idx].patches, plan, config.loss_scope);
            model.backward(cache, masked_loss_gradient(pred, patches[idx].patches, plan, config.loss_scope));
            if (++in_batch == config.batch_size || pos + 1 == order.size()) {
                nn::scale_grads(params, 1.0 / in_batch);
                optimizer.step(params, lr);
                nn::zero_grads(params);
                in_batch = 0;
            }
        }
        epoch_loss /= static_cast<double>(samples.size());
        state.loss_history.push_back(epoch_loss);
        state.epochs_done = epoch + 1;
        model.trained_epochs = state.epochs_done;

        if (log) {
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            log << "epoch=" << state.epochs_done << " loss=" << text::format_double(epoch_loss)
                << " wall_time=" << wall << '\n';
            log.flush();
        }
        if (config.checkpoint_interval > 0 && !config.checkpoint_path.empty() &&
            state.epochs_done % config.checkpoint_interval == 0) {
            make_mae_checkpoint(model, config, state, &optimizer).save(config.checkpoint_path);
        }
        if (config.on_epoch) config.on_epoch(state.epochs_done, epoch_loss);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Inference

Reconstruction reconstruct(const MaeModel& model, const Image& image, const ReconstructOptions& options) {
    if (options.num_passes < 1) throw InvalidArgument("reconstruct: num_passes must be >= 1");
    const auto& arch = model.architecture();
    if (image.rows() != arch.image_height || image.cols() != arch.image_width) {
        throw DimensionError("reconstruct: image " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                             " does not match model input " + std::to_string(arch.image_height) + "x" +
                             std::to_string(arch.image_width));
    }
    const PatchSequence patches = patchify(image, arch.patch_size);

    Reconstruction out;
    out.num_passes = options.num_passes;
    out.replace_visible = options.replace_visible;
    out.image = Image::Zero(image.rows(), image.cols());
    for (int pass = 0; pass < options.num_passes; ++pass) {
        const MaskPlan plan = make_mask_plan(arch.token_count(), options.mask_ratio,
                                             derive_seed(options.seed, {static_cast<std::uint64_t>(pass)}));
        PatchSequence pred = patches;
        pred.patches = model.forward(patches, plan);
        if (options.replace_visible) {
            for (int v : plan.visible) pred.patches.row(v) = patches.patches.row(v);
        }
        Image pass_image = unpatchify(pred).cwiseMax(0.0).cwiseMin(1.0);
        out.image += pass_image;
        out.passes.push_back(std::move(pass_image));
    }
    out.image /= static_cast<double>(options.num_passes);
    return out;
}

}  // namespace maeanom
