#include "maeanom/harness.hpp"
#include "maeanom/text.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace maeanom;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    int log_every = 10;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
    cmd->add_option("--config", c.config_path, "experiment config file")->check(CLI::ExistingFile);
    auto* out = cmd->add_option("--out-dir", c.out_dir, "output directory");
    if (out_required) out->required();
    cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

// --config, else the run directory's snapshot, else built-in defaults; then --set.
ExperimentConfig resolve_config(const Common& c) {
    ExperimentConfig config;
    if (!c.config_path.empty()) {
        config = load_config(c.config_path);
    } else if (!c.out_dir.empty() && fs::exists(fs::path(c.out_dir) / "config.cfg")) {
        config = load_config(fs::path(c.out_dir) / "config.cfg");
    }
    for (const auto& o : c.overrides) apply_override(config, o);
    config.validate();
    return config;
}

std::vector<ScanRecord> read_scan_list(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scan list " + path.string());
    std::vector<ScanRecord> scans;
    std::map<std::string, std::size_t> index;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty() || body[0] == '#') continue;
        const auto f = text::split_ws(body);
        if (f.size() != 4) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected scan_id sample_id path label");
        }
        auto [it, fresh] = index.emplace(f[0], scans.size());
        if (fresh) scans.push_back({f[0], {}});
        fs::path p = f[2];
        if (p.is_relative()) p = fs::absolute(path.parent_path() / p);
        scans[it->second].slices.push_back({f[1], p, parse_label(f[3])});
    }
    return scans;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Masked-autoencoder anomaly detection: training, scoring, evaluation and ablations"};
    app.require_subcommand(1);

    Common synth, splits, mae, cls, sc, ev, run, abl, rep;

    auto* synth_cmd = app.add_subcommand("synth-data", "generate the synthetic dataset and its manifest");
    add_common(synth_cmd, synth);

    auto* splits_cmd = app.add_subcommand("build-splits", "scan-grouped train/val/test manifest from a scan list");
    add_common(splits_cmd, splits);
    std::string scan_list, dataset_name = "dataset";
    std::uint64_t split_seed = 0;
    SplitRatios ratios;
    splits_cmd->add_option("--scans", scan_list, "lines of: scan_id sample_id path label")->required()->check(CLI::ExistingFile);
    splits_cmd->add_option("--seed", split_seed, "shuffle seed");
    splits_cmd->add_option("--dataset", dataset_name, "dataset name in the manifest header");
    splits_cmd->add_option("--test-fraction", ratios.test_fraction, "fraction of scans held out for test");
    splits_cmd->add_option("--val-fraction", ratios.val_fraction, "fraction of training scans used for validation");

    auto* mae_cmd = app.add_subcommand("train-mae", "train the masked autoencoder in a run directory");
    add_common(mae_cmd, mae);
    auto* cls_cmd = app.add_subcommand("train-classifier", "train the anomaly classifier in a run directory");
    add_common(cls_cmd, cls);
    auto* score_cmd = app.add_subcommand("score", "score the test split");
    add_common(score_cmd, sc);
    auto* eval_cmd = app.add_subcommand("evaluate", "ROC, AUROC and baseline summary from scores");
    add_common(eval_cmd, ev);
    auto* run_cmd = app.add_subcommand("run", "all stages: train-mae, train-classifier, score, evaluate");
    add_common(run_cmd, run);

    auto* abl_cmd = app.add_subcommand("ablate", "sweep one axis, one run per value");
    add_common(abl_cmd, abl);
    std::string axis;
    std::vector<std::string> values;
    int jobs = 1;
    abl_cmd->add_option("--axis", axis, "axis to sweep")->required()->check(CLI::IsMember(ablation_axes()));
    abl_cmd->add_option("--values", values, "values, comma separated")->required()->delimiter(',');
    abl_cmd->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

    auto* rep_cmd = app.add_subcommand("report", "HTML report over run and ablation directories");
    add_common(rep_cmd, rep);
    std::vector<std::string> report_inputs;
    rep_cmd->add_option("inputs", report_inputs, "run or ablation directories")->required();

    CLI11_PARSE(app, argc, argv);

    RunOptions log;
    log.log = &std::cout;

    try {
        if (*synth_cmd) {
            const auto config = resolve_config(synth);
            const auto m = generate_synth_dataset(config.synth_spec(), config.synth_counts, config.synth_seed, synth.out_dir);
            std::cout << "wrote " << m.records.size() << " images and " << (fs::path(synth.out_dir) / "manifest.txt").string()
                      << "\n";
        } else if (*splits_cmd) {
            const auto config = resolve_config(splits);
            const auto m = build_splits(read_scan_list(scan_list), ratios, split_seed, dataset_name, config.image_height,
                                        config.image_width);
            fs::create_directories(splits.out_dir);
            write_manifest(fs::path(splits.out_dir) / "manifest.txt", m);
            std::cout << "wrote " << m.records.size() << " records to "
                      << (fs::path(splits.out_dir) / "manifest.txt").string() << "\n";
        } else if (*mae_cmd) {
            const auto config = resolve_config(mae);
            stage_train_mae(config, prepare_run(config, mae.out_dir), log);
        } else if (*cls_cmd) {
            const auto config = resolve_config(cls);
            stage_train_classifier(config, prepare_run(config, cls.out_dir), log);
        } else if (*score_cmd) {
            const auto config = resolve_config(sc);
            stage_score(config, prepare_run(config, sc.out_dir), log);
        } else if (*eval_cmd) {
            const auto config = resolve_config(ev);
            const auto s = stage_evaluate(config, prepare_run(config, ev.out_dir), log);
            for (const auto& [name, v] : s.baselines) std::cout << "baseline " << name << " auroc " << v << "\n";
        } else if (*run_cmd) {
            const auto config = resolve_config(run);
            const auto s = run_experiment(config, run.out_dir, log);
            std::cout << "auroc " << text::format_double(s.auroc) << "\n";
            for (const auto& [name, v] : s.baselines) std::cout << "baseline " << name << " auroc " << v << "\n";
        } else if (*abl_cmd) {
            Common base_only = abl;
            base_only.out_dir.clear();  // the sweep directory holds no config snapshot of its own
            const auto config = resolve_config(base_only);
            AblationOptions options;
            options.run = log;
            options.jobs = jobs;
            const auto result = run_ablation(config, axis, values, abl.out_dir, options);
            for (const auto& r : result.rows) std::cout << axis << " = " << r.value << "  auroc " << r.summary.auroc << "\n";
        } else if (*rep_cmd) {
            std::vector<fs::path> inputs(report_inputs.begin(), report_inputs.end());
            const fs::path out = fs::path(rep.out_dir) / "report.html";
            emit_report(inputs, out);
            std::cout << "wrote " << out.string() << "\n";
        }
    } catch (const IncompleteRunError& e) {
        std::cerr << "incomplete run: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
