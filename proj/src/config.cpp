#include "maeanom/config.hpp"

#include "maeanom/pseudoanom.hpp"
#include "maeanom/text.hpp"

#include <fstream>
#include <sstream>
#include <variant>

namespace maeanom {

std::string to_string(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::classifier: return "classifier";
        case ScoreMethod::mse: return "mse";
        case ScoreMethod::l1: return "l1";
        case ScoreMethod::ssim: return "ssim";
    }
    return "?";
}

ScoreMethod parse_score_method(const std::string& s) {
    if (s == "classifier") return ScoreMethod::classifier;
    if (s == "mse") return ScoreMethod::mse;
    if (s == "l1") return ScoreMethod::l1;
    if (s == "ssim") return ScoreMethod::ssim;
    throw InvalidArgument("unknown score method '" + s + "' (classifier, mse, l1, ssim)");
}

namespace {

using FieldRef = std::variant<int*, std::uint64_t*, double*, bool*, std::string*, InputMode*, ScoreMethod*>;

struct Field {
    const char* key;
    FieldRef ref;
};

std::vector<Field> fields(ExperimentConfig& c) {
    return {
        {"data.manifest", &c.manifest},
        {"synth.seed", &c.synth_seed},
        {"synth.texture_seed", &c.synth.texture_seed},
        {"synth.train", &c.synth_counts.train},
        {"synth.val_normal", &c.synth_counts.val_normal},
        {"synth.val_abnormal", &c.synth_counts.val_abnormal},
        {"synth.test_normal", &c.synth_counts.test_normal},
        {"synth.test_abnormal", &c.synth_counts.test_abnormal},
        {"synth.wave_count", &c.synth.wave_count},
        {"synth.min_cycles", &c.synth.min_cycles},
        {"synth.max_cycles_lo", &c.synth.max_cycles_lo},
        {"synth.max_cycles_hi", &c.synth.max_cycles_hi},
        {"synth.blob_min", &c.synth.blob_min},
        {"synth.blob_max", &c.synth.blob_max},
        {"synth.radius_min", &c.synth.radius_min},
        {"synth.radius_max", &c.synth.radius_max},
        {"synth.delta_min", &c.synth.delta_min},
        {"synth.delta_max", &c.synth.delta_max},
        {"image.height", &c.image_height},
        {"image.width", &c.image_width},
        {"model.patch_size", &c.patch_size},
        {"mae.enc_dim", &c.enc_dim},
        {"mae.enc_depth", &c.enc_depth},
        {"mae.enc_heads", &c.enc_heads},
        {"mae.dec_dim", &c.dec_dim},
        {"mae.dec_depth", &c.dec_depth},
        {"mae.dec_heads", &c.dec_heads},
        {"mae.mlp_ratio", &c.mae_mlp_ratio},
        {"mae.mask_ratio", &c.mask_ratio},
        {"mae.epochs", &c.mae_epochs},
        {"mae.batch_size", &c.mae_batch_size},
        {"mae.lr", &c.mae_lr},
        {"mae.weight_decay", &c.mae_weight_decay},
        {"mae.warmup_epochs", &c.mae_warmup_epochs},
        {"mae.checkpoint_interval", &c.mae_checkpoint_interval},
        {"mae.init_seed", &c.mae_init_seed},
        {"mae.seed", &c.mae_seed},
        {"recon.num_passes", &c.num_passes},
        {"recon.seed", &c.recon_seed},
        {"classifier.dim", &c.cls_dim},
        {"classifier.depth", &c.cls_depth},
        {"classifier.heads", &c.cls_heads},
        {"classifier.mlp_ratio", &c.cls_mlp_ratio},
        {"classifier.input_mode", &c.input_mode},
        {"classifier.epochs", &c.cls_epochs},
        {"classifier.batch_size", &c.cls_batch_size},
        {"classifier.lr", &c.cls_lr},
        {"classifier.weight_decay", &c.cls_weight_decay},
        {"classifier.warmup_epochs", &c.cls_warmup_epochs},
        {"classifier.resample_per_epoch", &c.resample_per_epoch},
        {"classifier.init_seed", &c.cls_init_seed},
        {"classifier.seed", &c.cls_seed},
        {"pseudo.k_min", &c.k_min},
        {"pseudo.k_max", &c.k_max},
        {"pseudo.size_min", &c.box_size_min},
        {"pseudo.size_max", &c.box_size_max},
        {"pseudo.per_pixel_beta", &c.per_pixel_beta},
        {"ablation.loss_on_all_tokens", &c.loss_on_all_tokens},
        {"ablation.no_mae", &c.no_mae},
        {"ablation.ae_mode", &c.ae_mode},
        {"eval.score_method", &c.score_method},
        {"eval.seed", &c.score_seed},
    };
}

FieldRef find_field(ExperimentConfig& c, const std::string& key) {
    for (const auto& f : fields(c)) {
        if (key == f.key) return f.ref;
    }
    throw InvalidArgument("unknown config key '" + key + "'");
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
    const long long v = text::parse_int(s, key);
    if (v < 0) throw InvalidArgument(key + ": seeds must be non-negative");
    return static_cast<std::uint64_t>(v);
}

struct Setter {
    const std::string& key;
    const std::string& value;
    void operator()(int* p) const { *p = static_cast<int>(text::parse_int(value, key)); }
    void operator()(std::uint64_t* p) const { *p = parse_u64(value, key); }
    void operator()(double* p) const { *p = text::parse_double(value, key); }
    void operator()(bool* p) const { *p = text::parse_bool(value, key); }
    void operator()(std::string* p) const { *p = value; }
    void operator()(InputMode* p) const { *p = parse_input_mode(value); }
    void operator()(ScoreMethod* p) const { *p = parse_score_method(value); }
};

struct Getter {
    std::string operator()(const int* p) const { return std::to_string(*p); }
    std::string operator()(const std::uint64_t* p) const { return std::to_string(*p); }
    std::string operator()(const double* p) const { return text::format_double(*p); }
    std::string operator()(const bool* p) const { return *p ? "true" : "false"; }
    std::string operator()(const std::string* p) const { return *p; }
    std::string operator()(const InputMode* p) const { return to_string(*p); }
    std::string operator()(const ScoreMethod* p) const { return to_string(*p); }
};

}  // namespace

LossScope ExperimentConfig::effective_loss_scope() const {
    return (ae_mode || loss_on_all_tokens) ? LossScope::all_tokens : LossScope::masked;
}

std::pair<int, int> ExperimentConfig::effective_box_sizes() const {
    if (box_size_min > 0 && box_size_max > 0) return {box_size_min, box_size_max};
    return default_box_size_range(std::min(image_height, image_width));
}

SynthSpec ExperimentConfig::synth_spec() const {
    SynthSpec s = synth;
    s.height = image_height;
    s.width = image_width;
    return s;
}

MaeArchitecture ExperimentConfig::mae_architecture() const {
    MaeArchitecture a;
    a.image_height = image_height;
    a.image_width = image_width;
    a.patch_size = patch_size;
    a.enc_dim = enc_dim;
    a.enc_depth = enc_depth;
    a.enc_heads = enc_heads;
    a.dec_dim = dec_dim;
    a.dec_depth = dec_depth;
    a.dec_heads = dec_heads;
    a.mlp_ratio = mae_mlp_ratio;
    return a;
}

ClassifierArchitecture ExperimentConfig::classifier_architecture() const {
    ClassifierArchitecture a;
    a.image_height = image_height;
    a.image_width = image_width;
    a.patch_size = patch_size;
    a.dim = cls_dim;
    a.depth = cls_depth;
    a.heads = cls_heads;
    a.mlp_ratio = cls_mlp_ratio;
    return a;
}

MaeTrainConfig ExperimentConfig::mae_train_config() const {
    MaeTrainConfig t;
    t.epochs = mae_epochs;
    t.batch_size = mae_batch_size;
    t.lr = mae_lr;
    t.weight_decay = mae_weight_decay;
    t.warmup_epochs = mae_warmup_epochs;
    t.mask_ratio = effective_mask_ratio();
    t.loss_scope = effective_loss_scope();
    t.seed = mae_seed;
    t.checkpoint_interval = mae_checkpoint_interval;
    return t;
}

ReconstructOptions ExperimentConfig::reconstruct_options() const {
    ReconstructOptions r;
    r.num_passes = num_passes;
    r.mask_ratio = effective_mask_ratio();
    r.replace_visible = !ae_mode;
    r.seed = recon_seed;
    return r;
}

ClassifierTrainConfig ExperimentConfig::classifier_train_config() const {
    ClassifierTrainConfig t;
    t.epochs = cls_epochs;
    t.batch_size = cls_batch_size;
    t.lr = cls_lr;
    t.weight_decay = cls_weight_decay;
    t.warmup_epochs = cls_warmup_epochs;
    t.k_min = k_min;
    t.k_max = k_max;
    std::tie(t.size_min, t.size_max) = effective_box_sizes();
    t.per_pixel_beta = per_pixel_beta;
    t.resample_per_epoch = resample_per_epoch;
    t.no_mae = no_mae;
    t.recon = reconstruct_options();
    t.seed = cls_seed;
    return t;
}

void ExperimentConfig::validate() const {
    mae_architecture().validate();
    classifier_architecture().validate();
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) throw InvalidArgument("mae.mask_ratio must be in [0, 1)");
    if (mask_ratio == 0.0 && !ae_mode) {
        throw InvalidArgument("mae.mask_ratio = 0 is the autoencoder ablation; set ablation.ae_mode = true");
    }
    if (mae_epochs < 0 || cls_epochs < 0) throw InvalidArgument("epochs must be non-negative");
    if (mae_batch_size < 1 || cls_batch_size < 1) throw InvalidArgument("batch sizes must be positive");
    if (num_passes < 1) throw InvalidArgument("recon.num_passes must be at least 1");
    if (k_min < 1 || k_max < k_min) throw InvalidArgument("pseudo.k_min/k_max must satisfy 1 <= k_min <= k_max");
    if ((box_size_min == 0) != (box_size_max == 0)) {
        throw InvalidArgument("pseudo.size_min and pseudo.size_max are set together (0 for both picks the default)");
    }
    const auto [smin, smax] = effective_box_sizes();
    if (smin < 1 || smax < smin || smax > std::min(image_height, image_width)) {
        throw InvalidArgument("pseudo box sizes must satisfy 1 <= min <= max <= image side");
    }
    if (no_mae && ae_mode) throw InvalidArgument("ablation.no_mae and ablation.ae_mode are exclusive");
    if (no_mae && score_method != ScoreMethod::classifier) {
        throw InvalidArgument("reconstruction-error scoring needs the MAE (ablation.no_mae is set)");
    }
    if (no_mae && input_mode != InputMode::raw_recon) {
        throw InvalidArgument("ablation.no_mae feeds raw images; set classifier.input_mode = raw_recon");
    }
}

void set_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
    try {
        if (key == "schema_version") {
            if (text::parse_int(value, key) != kConfigSchemaVersion) {
                throw InvalidArgument("unsupported config schema_version " + value);
            }
            return;
        }
        std::visit(Setter{key, value}, find_field(config, key));
    } catch (const FormatError& e) {
        throw InvalidArgument(e.what());  // a bad value is a config error, not a file-format one
    }
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InvalidArgument("override '" + assignment + "' is not key=value");
    set_value(config, std::string(text::trim(assignment.substr(0, eq))),
              std::string(text::trim(assignment.substr(eq + 1))));
}

std::string get_value(const ExperimentConfig& config, const std::string& key) {
    auto& c = const_cast<ExperimentConfig&>(config);
    return std::visit([](auto* p) { return Getter{}(p); }, find_field(c, key));
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        ExperimentConfig c;
        std::vector<std::string> k;
        for (const auto& f : fields(c)) k.emplace_back(f.key);
        return k;
    }();
    return keys;
}

std::string serialize(const ExperimentConfig& config) {
    std::ostringstream out;
    out << "schema_version = " << kConfigSchemaVersion << '\n';
    for (const auto& key : config_keys()) out << key << " = " << get_value(config, key) << '\n';
    return out.str();
}

ExperimentConfig parse_config(const std::string& contents) {
    ExperimentConfig config;
    std::istringstream in(contents);
    std::string line;
    int line_no = 0;
    bool saw_version = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const auto body = text::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(text::trim(body.substr(0, eq)));
        const std::string value(text::trim(body.substr(eq + 1)));
        try {
            set_value(config, key, value);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("config line " + std::to_string(line_no) + ": " + e.what());
        }
        saw_version = saw_version || key == "schema_version";
    }
    if (!saw_version) throw InvalidArgument("config is missing schema_version");
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config " + path.string());
    out << serialize(config);
    if (!out) throw IoError("failed writing config " + path.string());
}

std::vector<std::string> config_diff(const ExperimentConfig& a, const ExperimentConfig& b) {
    std::vector<std::string> keys;
    for (const auto& key : config_keys()) {
        if (get_value(a, key) != get_value(b, key)) keys.push_back(key);
    }
    return keys;
}

}  // namespace maeanom
