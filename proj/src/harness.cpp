#include "maeanom/harness.hpp"

#include "maeanom/plot.hpp"
#include "maeanom/text.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace maeanom {

namespace fs = std::filesystem;

std::filesystem::path RunPaths::baseline_scores(AnomalyMeasure m) const {
    return logs() / ("baseline_" + to_string(m) + ".txt");
}

namespace {

constexpr AnomalyMeasure kMeasures[] = {AnomalyMeasure::mse, AnomalyMeasure::l1, AnomalyMeasure::ssim};

void say(const RunOptions& options, const std::string& line) {
    if (options.log) *options.log << line << std::endl;
}

bool report_epoch(const RunOptions& options, int epoch, int total) {
    return options.log && (epoch == total || (options.log_every > 0 && epoch % options.log_every == 0));
}

std::vector<TrainingSample> load_train(const SliceManifest& m) {
    std::vector<TrainingSample> out;
    for (const auto& r : m.split(Split::train)) out.push_back({r.sample_id, load_slice(m, r.sample_id), r.label});
    return out;
}

std::vector<LabeledImage> load_test(const SliceManifest& m) {
    std::vector<LabeledImage> out;
    for (const auto& r : m.split(Split::test)) {
        out.push_back({r.sample_id, load_slice(m, r.sample_id), r.label == Label::abnormal ? 1 : 0});
    }
    return out;
}

MaeModel load_trained_mae(const RunPaths& paths) {
    if (!fs::exists(paths.mae_checkpoint())) {
        throw IncompleteRunError(paths.root.string() + ": no MAE checkpoint; run train-mae first");
    }
    return load_mae(Archive::load(paths.mae_checkpoint()));
}

std::optional<AnomalyMeasure> score_measure(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::mse: return AnomalyMeasure::mse;
        case ScoreMethod::l1: return AnomalyMeasure::l1;
        case ScoreMethod::ssim: return AnomalyMeasure::ssim;
        case ScoreMethod::classifier: break;
    }
    return std::nullopt;
}

void write_scores_file(const fs::path& path, const ScoredSet& scores) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_scores(out, scores);
    if (!out) throw IoError("failed writing " + path.string());
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Summary

void write_summary(const fs::path& path, const RunSummary& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "status = complete\n";
    out << "score_method = " << s.score_method << '\n';
    out << "auroc = " << text::format_double(s.auroc) << '\n';
    for (const auto& [name, v] : s.baselines) out << "baseline." << name << " = " << text::format_double(v) << '\n';
    out << "test_normal = " << s.test_normal << '\n';
    out << "test_abnormal = " << s.test_abnormal << '\n';
    for (const auto& [k, v] : s.extra) out << k << " = " << v << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

RunSummary read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IncompleteRunError(path.parent_path().string() + ": missing " + path.filename().string());
    RunSummary s;
    bool have_auroc = false;
    std::string line;
    while (std::getline(in, line)) {
        const auto body = text::trim(line);
        if (body.empty() || body[0] == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw FormatError(path.string() + ": bad line '" + line + "'");
        const std::string key(text::trim(body.substr(0, eq)));
        const std::string value(text::trim(body.substr(eq + 1)));
        if (key == "status") continue;
        if (key == "score_method") {
            s.score_method = value;
        } else if (key == "auroc") {
            s.auroc = text::parse_double(value, key);
            have_auroc = true;
        } else if (key.rfind("baseline.", 0) == 0) {
            s.baselines[key.substr(9)] = text::parse_double(value, key);
        } else if (key == "test_normal") {
            s.test_normal = static_cast<int>(text::parse_int(value, key));
        } else if (key == "test_abnormal") {
            s.test_abnormal = static_cast<int>(text::parse_int(value, key));
        } else {
            s.extra[key] = value;
        }
    }
    if (!have_auroc) throw FormatError(path.string() + ": no auroc entry");
    return s;
}

// ---------------------------------------------------------------------------
// Stages

RunPaths prepare_run(const ExperimentConfig& config, const fs::path& dir) {
    config.validate();
    RunPaths paths{dir};
    fs::create_directories(paths.checkpoints());
    fs::create_directories(paths.logs());
    if (fs::exists(paths.config())) {
        const auto diff = config_diff(load_config(paths.config()), config);
        if (!diff.empty()) {
            std::string keys;
            for (const auto& k : diff) keys += (keys.empty() ? "" : ", ") + k;
            throw InvalidArgument(dir.string() + " was created with a different config (" + keys +
                                  "); use a fresh output directory");
        }
    } else {
        save_config(paths.config(), config);
    }
    return paths;
}

SliceManifest resolve_dataset(const ExperimentConfig& config, const RunPaths& paths) {
    SliceManifest m;
    if (!config.manifest.empty()) {
        m = read_manifest(config.manifest);
    } else if (fs::exists(paths.data() / "manifest.txt")) {
        m = read_manifest(paths.data() / "manifest.txt");
    } else {
        m = generate_synth_dataset(config.synth_spec(), config.synth_counts, config.synth_seed, paths.data());
    }
    if (m.height != config.image_height || m.width != config.image_width) {
        throw DimensionError("dataset is " + std::to_string(m.height) + "x" + std::to_string(m.width) +
                             " but the config expects " + std::to_string(config.image_height) + "x" +
                             std::to_string(config.image_width));
    }
    return m;
}

void stage_train_mae(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options) {
    if (!config.uses_mae()) {
        say(options, "[mae] skipped (no_mae)");
        return;
    }
    if (fs::exists(paths.mae_checkpoint())) {
        say(options, "[mae] checkpoint present, skipping training");
        return;
    }
    const auto train = load_train(resolve_dataset(config, paths));
    MaeModel model(config.mae_architecture(), config.mae_init_seed);
    MaeTrainConfig tc = config.mae_train_config();
    tc.checkpoint_path = paths.mae_last();
    tc.metrics_log = paths.logs() / "mae_metrics.log";
    tc.on_epoch = [&](int epoch, double loss) {
        if (report_epoch(options, epoch, tc.epochs)) {
            say(options, "[mae] epoch " + std::to_string(epoch) + "/" + std::to_string(tc.epochs) + " loss " +
                             text::format_double(loss));
        }
    };
    std::optional<Archive> resume;
    if (fs::exists(paths.mae_last())) {
        resume = Archive::load(paths.mae_last());
        say(options, "[mae] resuming after epoch " + resume->get("train.epochs_done"));
    }
    const MaeTrainState state = train_mae(model, train, tc, resume ? &*resume : nullptr);
    make_mae_checkpoint(model, tc, state, nullptr).save(paths.mae_checkpoint());
}

void stage_train_classifier(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options) {
    if (config.score_method != ScoreMethod::classifier) {
        say(options, "[classifier] skipped (score method " + to_string(config.score_method) + ")");
        return;
    }
    if (fs::exists(paths.classifier_checkpoint())) {
        say(options, "[classifier] checkpoint present, skipping training");
        return;
    }
    const auto train = load_train(resolve_dataset(config, paths));
    std::optional<MaeModel> mae;
    if (config.uses_mae()) mae = load_trained_mae(paths);

    AnomalyClassifier classifier(config.classifier_architecture(), config.input_mode, config.cls_init_seed);
    ClassifierTrainConfig tc = config.classifier_train_config();
    tc.metrics_log = paths.logs() / "classifier_metrics.log";
    tc.on_epoch = [&](int epoch, double loss, double accuracy) {
        if (report_epoch(options, epoch, tc.epochs)) {
            say(options, "[classifier] epoch " + std::to_string(epoch) + "/" + std::to_string(tc.epochs) + " loss " +
                             text::format_double(loss) + " accuracy " + text::format_double(accuracy));
        }
    };
    train_classifier(classifier, mae ? &*mae : nullptr, train, tc);
    classifier.to_archive().save(paths.classifier_checkpoint());
}

ScoredSet stage_score(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options) {
    const auto test = load_test(resolve_dataset(config, paths));
    std::optional<MaeModel> mae;
    if (config.uses_mae()) mae = load_trained_mae(paths);

    ReconstructOptions recon = config.reconstruct_options();
    recon.seed = config.score_seed;

    std::map<AnomalyMeasure, ScoredSet> baselines;
    if (mae && mae->trained_epochs > 0) {
        for (auto m : kMeasures) {
            baselines[m] = baseline_scores(*mae, test, m, recon);
            write_scores_file(paths.baseline_scores(m), baselines[m]);
        }
    }

    ScoredSet scores;
    if (const auto measure = score_measure(config.score_method)) {
        if (!baselines.count(*measure)) throw InvalidArgument("reconstruction-error scoring needs a trained MAE");
        scores = baselines[*measure];
    } else {
        if (!fs::exists(paths.classifier_checkpoint())) {
            throw IncompleteRunError(paths.root.string() + ": no classifier checkpoint; run train-classifier first");
        }
        const auto classifier = AnomalyClassifier::from_archive(Archive::load(paths.classifier_checkpoint()));
        for (std::size_t i = 0; i < test.size(); ++i) {
            ScoreOptions so;
            so.recon = recon;
            so.recon.seed = derive_seed(config.score_seed, {static_cast<std::uint64_t>(i)});
            so.no_mae = config.no_mae;
            so.requested_mode = config.input_mode;
            scores.push_back({test[i].id, score(classifier, mae ? &*mae : nullptr, test[i].image, so), test[i].label});
        }
    }
    write_scores_file(paths.scores(), scores);
    say(options, "[score] " + std::to_string(scores.size()) + " test samples scored");
    return scores;
}

RunSummary stage_evaluate(const ExperimentConfig& config, const RunPaths& paths, const RunOptions& options) {
    if (!fs::exists(paths.scores())) {
        throw IncompleteRunError(paths.root.string() + ": missing scores.txt; run score first");
    }
    const ScoredSet scores = read_scores(paths.scores());
    const RocResult roc = roc_curve(scores);
    {
        std::ofstream out(paths.roc());
        if (!out) throw IoError("cannot write " + paths.roc().string());
        write_roc(out, roc);
    }
    write_plot_png(paths.roc_png(), roc_plot(roc, "ROC (" + to_string(config.score_method) + ")"));

    RunSummary summary;
    summary.score_method = to_string(config.score_method);
    summary.auroc = roc.auroc;
    for (const auto& s : scores) (s.label ? summary.test_abnormal : summary.test_normal) += 1;
    for (auto m : kMeasures) {
        if (fs::exists(paths.baseline_scores(m))) summary.baselines[to_string(m)] = auroc(read_scores(paths.baseline_scores(m)));
    }
    write_summary(paths.summary(), summary);
    say(options, "[evaluate] auroc " + text::format_double(summary.auroc));
    return summary;
}

RunSummary run_experiment(const ExperimentConfig& config, const fs::path& dir, const RunOptions& options) {
    const RunPaths paths = prepare_run(config, dir);
    using clock = std::chrono::steady_clock;
    std::map<std::string, std::string> timings;
    auto timed = [&](const char* name, auto&& fn) {
        const auto t0 = clock::now();
        fn();
        timings[std::string("seconds.") + name] =
            text::format_double(std::round(std::chrono::duration<double>(clock::now() - t0).count() * 1000) / 1000);
    };
    timed("data", [&] { resolve_dataset(config, paths); });
    timed("mae", [&] { stage_train_mae(config, paths, options); });
    timed("classifier", [&] { stage_train_classifier(config, paths, options); });
    timed("score", [&] { stage_score(config, paths, options); });
    RunSummary summary;
    timed("evaluate", [&] { summary = stage_evaluate(config, paths, options); });
    summary.extra = timings;
    write_summary(paths.summary(), summary);
    return summary;
}

// ---------------------------------------------------------------------------
// Ablations

const std::vector<std::string>& ablation_axes() {
    static const std::vector<std::string> axes{"mask_ratio",     "mae_epochs",         "input_mode",      "k_range",
                                               "per_pixel_beta", "loss_on_all_tokens", "anomaly_measure", "method"};
    return axes;
}

ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis, const std::string& value) {
    ExperimentConfig c = base;
    if (axis == "mask_ratio") {
        c.mask_ratio = text::parse_double(value, axis);
        c.ae_mode = c.mask_ratio == 0.0;
    } else if (axis == "mae_epochs") {
        c.mae_epochs = static_cast<int>(text::parse_int(value, axis));
    } else if (axis == "input_mode") {
        c.input_mode = parse_input_mode(value);
    } else if (axis == "k_range") {
        const auto dash = value.find('-');
        if (dash == std::string::npos) throw InvalidArgument("k_range values are written min-max, got '" + value + "'");
        c.k_min = static_cast<int>(text::parse_int(value.substr(0, dash), axis));
        c.k_max = static_cast<int>(text::parse_int(value.substr(dash + 1), axis));
    } else if (axis == "per_pixel_beta") {
        c.per_pixel_beta = text::parse_bool(value, axis);
    } else if (axis == "loss_on_all_tokens") {
        c.loss_on_all_tokens = text::parse_bool(value, axis);
    } else if (axis == "anomaly_measure") {
        c.score_method = parse_score_method(value);
    } else if (axis == "method") {
        if (value == "mae") {
            c.ae_mode = false;
            c.no_mae = false;
        } else if (value == "ae") {
            c.ae_mode = true;
            c.mask_ratio = 0.0;
        } else if (value == "no_mae") {
            c.no_mae = true;
            c.input_mode = InputMode::raw_recon;
        } else {
            throw InvalidArgument("method values are mae, ae, no_mae; got '" + value + "'");
        }
    } else {
        throw InvalidArgument("unknown ablation axis '" + axis + "'");
    }
    c.validate();
    return c;
}

namespace {

// Keys that determine the trained MAE; runs agreeing on all of them can
// share one checkpoint.
std::string mae_fingerprint(const ExperimentConfig& c) {
    std::string fp;
    for (const auto& key : config_keys()) {
        const bool relevant = key.rfind("data.", 0) == 0 || key.rfind("synth.", 0) == 0 || key.rfind("image.", 0) == 0 ||
                              key.rfind("model.", 0) == 0 || key.rfind("mae.", 0) == 0 ||
                              key == "ablation.ae_mode" || key == "ablation.loss_on_all_tokens";
        if (relevant) fp += key + "=" + get_value(c, key) + "\n";
    }
    return fp;
}

}  // namespace

AblationResult run_ablation(const ExperimentConfig& base, const std::string& axis,
                            const std::vector<std::string>& values, const fs::path& out_dir,
                            const AblationOptions& options) {
    if (values.empty()) throw InvalidArgument("ablation over " + axis + ": empty value list");
    std::vector<ExperimentConfig> configs;
    std::set<std::string> seen;
    for (const auto& v : values) {
        if (!seen.insert(v).second) throw InvalidArgument("ablation value '" + v + "' listed twice");
        configs.push_back(apply_axis(base, axis, v));
    }
    fs::create_directories(out_dir);

    AblationResult result;
    result.axis = axis;
    result.rows.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        result.rows[i].value = values[i];
        result.rows[i].run_dir = out_dir / sanitize(axis + "_" + values[i]);
    }

    if (options.jobs <= 1) {
        std::map<std::string, fs::path> trained;  // fingerprint -> mae.ckpt
        for (std::size_t i = 0; i < values.size(); ++i) {
            say(options.run, "[ablation] " + axis + " = " + values[i]);
            const RunPaths paths = prepare_run(configs[i], result.rows[i].run_dir);
            if (configs[i].uses_mae()) {
                const std::string fp = mae_fingerprint(configs[i]);
                const auto it = trained.find(fp);
                if (it != trained.end() && !fs::exists(paths.mae_checkpoint())) {
                    fs::copy_file(it->second, paths.mae_checkpoint());
                    const fs::path log = it->second.parent_path().parent_path() / "logs" / "mae_metrics.log";
                    if (fs::exists(log)) fs::copy_file(log, paths.logs() / "mae_metrics.log", fs::copy_options::overwrite_existing);
                    say(options.run, "[ablation] reusing MAE checkpoint from " + it->second.parent_path().parent_path().string());
                }
                result.rows[i].summary = run_experiment(configs[i], paths.root, options.run);
                trained.emplace(fp, paths.mae_checkpoint());
            } else {
                result.rows[i].summary = run_experiment(configs[i], paths.root, options.run);
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex mu;
        std::exception_ptr failure;
        auto worker = [&] {
            for (std::size_t i = next++; i < values.size(); i = next++) {
                try {
                    result.rows[i].summary = run_experiment(configs[i], result.rows[i].run_dir, {});
                    std::lock_guard lock(mu);
                    say(options.run, "[ablation] " + axis + " = " + values[i] + " auroc " +
                                         text::format_double(result.rows[i].summary.auroc));
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        std::vector<std::thread> threads;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), values.size());
        for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    write_ablation_table(out_dir / "ablation.txt", result);
    std::vector<double> aurocs;
    for (const auto& r : result.rows) aurocs.push_back(r.summary.auroc);
    write_plot_png(out_dir / "ablation.png", ablation_plot(axis, values, aurocs));
    return result;
}

void write_ablation_table(const fs::path& path, const AblationResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# ablation axis=" << result.axis << '\n';
    out << "# value\tauroc\trun_dir\n";
    for (const auto& r : result.rows) {
        out << r.value << '\t' << text::format_double(r.summary.auroc) << '\t' << r.run_dir.filename().string() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

AblationResult read_ablation_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    AblationResult result;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# ablation axis=", 0) == 0) {
            result.axis = line.substr(16);
            continue;
        }
        if (text::trim(line).empty() || line[0] == '#') continue;
        const auto fields = text::split(line, '\t');
        if (fields.size() != 3) throw FormatError(path.string() + ": bad row '" + line + "'");
        AblationRow row;
        row.value = fields[0];
        row.summary.auroc = text::parse_double(fields[1], "auroc");
        row.run_dir = path.parent_path() / fields[2];
        result.rows.push_back(std::move(row));
    }
    if (result.axis.empty()) throw FormatError(path.string() + ": missing axis header");
    return result;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::string base64(const std::vector<std::uint8_t>& bytes) {
    static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        const std::uint32_t b0 = bytes[i];
        const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
        const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
        const std::uint32_t v = (b0 << 16) | (b1 << 8) | b2;
        out += table[(v >> 18) & 63];
        out += table[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? table[(v >> 6) & 63] : '=';
        out += i + 2 < bytes.size() ? table[v & 63] : '=';
    }
    return out;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string img_tag(const std::vector<std::uint8_t>& png, const std::string& alt) {
    return "<img alt=\"" + escape(alt) + "\" src=\"data:image/png;base64," + base64(png) + "\">";
}

struct RunEntry {
    std::string name;
    RunSummary summary;
    RocResult roc;
};

}  // namespace

void emit_report(const std::vector<fs::path>& inputs, const fs::path& out_path) {
    if (inputs.empty()) throw InvalidArgument("report: no run directories given");
    std::vector<RunEntry> runs;
    std::vector<std::pair<std::string, AblationResult>> ablations;
    for (const auto& dir : inputs) {
        if (!fs::is_directory(dir)) throw IoError("report: " + dir.string() + " is not a directory");
        if (fs::exists(dir / "ablation.txt")) {
            ablations.emplace_back(dir.filename().string(), read_ablation_table(dir / "ablation.txt"));
            continue;
        }
        const RunPaths paths{dir};
        if (!fs::exists(paths.scores())) throw IncompleteRunError(dir.string() + ": missing scores.txt");
        if (!fs::exists(paths.summary())) throw IncompleteRunError(dir.string() + ": missing summary.txt");
        RunEntry e;
        e.name = fs::absolute(dir).lexically_normal().filename().string();
        e.summary = read_summary(paths.summary());
        e.roc = roc_curve(read_scores(paths.scores()));
        runs.push_back(std::move(e));
    }

    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Anomaly detection report</title>\n"
            "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse;margin:1em 0}"
            "td,th{border:1px solid #999;padding:4px 10px;text-align:right}th{background:#eee}"
            "td:first-child,th:first-child{text-align:left}img{max-width:640px}</style></head><body>\n";
    html << "<h1>Anomaly detection report</h1>\n";

    if (!runs.empty()) {
        html << "<h2>Runs</h2>\n<table><tr><th>Run</th><th>Score</th><th>AUROC</th><th>MSE</th><th>MAE (L1)</th>"
                "<th>1 - SSIM</th><th>Test normal / abnormal</th></tr>\n";
        for (const auto& r : runs) {
            auto baseline = [&](const char* key) {
                const auto it = r.summary.baselines.find(key);
                return it == r.summary.baselines.end() ? std::string("n/a") : fixed4(it->second);
            };
            html << "<tr><td>" << escape(r.name) << "</td><td>" << escape(r.summary.score_method) << "</td><td>"
                 << fixed4(r.summary.auroc) << "</td><td>" << baseline("mse") << "</td><td>" << baseline("l1")
                 << "</td><td>" << baseline("ssim") << "</td><td>" << r.summary.test_normal << " / "
                 << r.summary.test_abnormal << "</td></tr>\n";
        }
        html << "</table>\n";
        for (const auto& r : runs) {
            html << "<h3>" << escape(r.name) << "</h3>\n<table><tr><th>Anomaly measure</th><th>AUROC</th></tr>\n";
            const std::pair<const char*, const char*> rows[] = {
                {"mse", "Mean squared error"}, {"l1", "Mean absolute error"}, {"ssim", "SSIM (1 - SSIM)"}};
            for (const auto& [key, label] : rows) {
                const auto it = r.summary.baselines.find(key);
                if (it != r.summary.baselines.end()) html << "<tr><td>" << label << "</td><td>" << fixed4(it->second) << "</td></tr>\n";
            }
            html << "<tr><td>" << escape(r.summary.score_method == "classifier" ? "Anomaly classifier" : r.summary.score_method)
                 << "</td><td>" << fixed4(r.summary.auroc) << "</td></tr>\n</table>\n";
            html << img_tag(plot_png_bytes(roc_plot(r.roc, "ROC: " + r.name)), "ROC " + r.name) << "\n";
        }
    }

    for (const auto& [name, a] : ablations) {
        html << "<h2>Ablation: " << escape(a.axis) << " (" << escape(name) << ")</h2>\n";
        html << "<table><tr><th>" << escape(a.axis) << "</th><th>AUROC</th></tr>\n";
        std::vector<std::string> values;
        std::vector<double> aurocs;
        for (const auto& r : a.rows) {
            html << "<tr><td>" << escape(r.value) << "</td><td>" << fixed4(r.summary.auroc) << "</td></tr>\n";
            values.push_back(r.value);
            aurocs.push_back(r.summary.auroc);
        }
        html << "</table>\n" << img_tag(plot_png_bytes(ablation_plot(a.axis, values, aurocs)), "ablation " + a.axis) << "\n";
    }
    html << "</body></html>\n";

    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write report " + out_path.string());
    out << html.str();
    if (!out) throw IoError("failed writing report " + out_path.string());
}

}  // namespace maeanom
