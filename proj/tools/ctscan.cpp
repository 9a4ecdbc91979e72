#include "ctscan/commands.hpp"
#include "ctscan/error.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct ConfigFlags {
    std::string file;
    std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
    cmd->add_option("--config", flags.file, "Config file ([section] / key = value)");
    cmd->add_option("--set", flags.overrides, "Override a config key, e.g. --set racnet.t=16")->take_all();
}

// defaults < file < environment < flags
ctscan::RunConfig load_config(const ConfigFlags& flags, const std::vector<std::string>& extra) {
    ctscan::RunConfig config;
    if (!flags.file.empty()) ctscan::apply_config_file(config, flags.file);
    ctscan::apply_environment(config);
    ctscan::apply_overrides(config, flags.overrides);
    ctscan::apply_overrides(config, extra);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = ctscan::cli;
    CLI::App app{"ctscan: lung segmentation and volume classification"};
    app.require_subcommand(1);

    ConfigFlags seg_flags, train_flags, eval_flags;
    std::vector<std::string> scans;
    std::string data_root, output_root;
    int workers = 0;
    auto* seg = app.add_subcommand("segment", "Segment scan directories into per-slice lung masks");
    add_config_flags(seg, seg_flags);
    seg->add_option("scans", scans, "Scan directories (default: every directory under data_root)");
    seg->add_option("--data-root", data_root);
    seg->add_option("--output-root", output_root);
    seg->add_option("--workers", workers);

    std::string train_dataset, checkpoint = "model.ckpt", log = "train_log.tsv";
    bool unsegmented = false;
    auto* train = app.add_subcommand("train", "Train the volume classifier");
    add_config_flags(train, train_flags);
    train->add_option("dataset", train_dataset, "Dataset listing (scan_id, scan_dir, label, mask_dir)")->required();
    train->add_option("--checkpoint", checkpoint);
    train->add_option("--log", log);
    train->add_flag("--unsegmented", unsegmented, "Classify raw slices, ignoring masks");

    std::string eval_dataset, eval_checkpoint, report, predictions;
    bool eval_unsegmented = false;
    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a labeled dataset");
    add_config_flags(evaluate, eval_flags);
    evaluate->add_option("checkpoint", eval_checkpoint)->required();
    evaluate->add_option("dataset", eval_dataset)->required();
    evaluate->add_option("--report", report);
    evaluate->add_option("--predictions", predictions);
    evaluate->add_flag("--unsegmented", eval_unsegmented);

    std::string overlay_scan, overlay_masks, overlay_out;
    auto* overlay = app.add_subcommand("overlay", "Write original | masked comparison panels");
    overlay->add_option("scan", overlay_scan)->required();
    overlay->add_option("masks", overlay_masks)->required();
    overlay->add_option("output", overlay_out)->required();

    std::string synth_root;
    int synth_count = 10, synth_min = 8, synth_max = 16, synth_size = 64;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset with a fake backend config");
    synth->add_option("root", synth_root)->required();
    synth->add_option("--count", synth_count);
    synth->add_option("--min-length", synth_min);
    synth->add_option("--max-length", synth_max);
    synth->add_option("--size", synth_size);
    synth->add_option("--seed", synth_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kUsageError;
    }

    try {
        if (*seg) {
            std::vector<std::string> extra;
            if (!data_root.empty()) extra.push_back("run.data_root=" + data_root);
            if (!output_root.empty()) extra.push_back("run.output_root=" + output_root);
            if (workers > 0) extra.push_back("run.workers=" + std::to_string(workers));
            const auto config = load_config(seg_flags, extra);
            std::vector<std::filesystem::path> dirs(scans.begin(), scans.end());
            return cli::cmd_segment(config, dirs, std::cout, std::cerr);
        }
        if (*train) {
            const auto config = load_config(train_flags, unsegmented ? std::vector<std::string>{"train.unsegmented=true"}
                                                                     : std::vector<std::string>{});
            return cli::cmd_train(config, train_dataset, checkpoint, log, std::cout, std::cerr);
        }
        if (*evaluate) {
            const auto config = load_config(
                eval_flags, eval_unsegmented ? std::vector<std::string>{"train.unsegmented=true"} : std::vector<std::string>{});
            return cli::cmd_evaluate(config, eval_checkpoint, eval_dataset, report, predictions, std::cout, std::cerr);
        }
        if (*overlay) return cli::cmd_overlay(overlay_scan, overlay_masks, overlay_out, std::cout, std::cerr);
        if (*synth) {
            return cli::cmd_synth(synth_root, synth_count, synth_min, synth_max, synth_size, synth_seed, std::cout,
                                  std::cerr);
        }
    } catch (const ctscan::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kUsageError;
    }
    return cli::kUsageError;
}
