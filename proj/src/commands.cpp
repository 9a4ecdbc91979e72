#include "ctscan/commands.hpp"

#include "ctscan/backends.hpp"
#include "ctscan/metrics.hpp"
#include "ctscan/png_io.hpp"
#include "ctscan/racnet/checkpoint.hpp"
#include "ctscan/segmentation.hpp"
#include "ctscan/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ctscan::cli {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> resolve_scans(const RunConfig& config, const std::vector<fs::path>& scans) {
    std::vector<fs::path> out;
    if (scans.empty()) {
        for (const auto& entry : fs::directory_iterator(config.data_root)) {
            if (entry.is_directory()) out.push_back(entry.path());
        }
        std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
            return natural_less(a.filename().string(), b.filename().string());
        });
        return out;
    }
    for (const auto& s : scans) out.push_back(s.is_relative() && !config.data_root.empty() ? config.data_root / s : s);
    return out;
}

std::string format_loss(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

int cmd_segment(const RunConfig& config, const std::vector<fs::path>& scans, std::ostream& out, std::ostream& err) {
    std::vector<fs::path> dirs;
    BackendPair backends;
    try {
        config.validate();
        if (!config.data_root.empty() && !fs::is_directory(config.data_root)) {
            err << "error: data_root " << config.data_root << " does not exist\n";
            return kUsageError;
        }
        if (scans.empty() && config.data_root.empty()) {
            err << "error: no scans given and run.data_root is not set\n";
            return kUsageError;
        }
        dirs = resolve_scans(config, scans);
        backends = make_backends(config.backend, config.fake_config);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    const SlicePipeline pipeline(*backends.segmenter, *backends.embedder, config.pipeline);
    int failures = 0;
    for (const auto& dir : dirs) {
        try {
            const ScanVolume volume = load_scan(dir);
            const VolumeSegmentation result = segment_volume(volume, pipeline, config.workers);
            write_volume_segmentation(result, config.output_root);
            out << volume.scan_id << ": " << volume.length() << " slices, " << result.flagged()
                << " without candidates\n";
        } catch (const std::exception& e) {
            ++failures;
            err << "error: " << dir.string() << ": " << e.what() << '\n';
        }
    }
    return failures == 0 ? kSuccess : kPartialFailure;
}

std::vector<racnet::PreparedScan<double>> prepare_dataset(const RunConfig& config, const fs::path& dataset,
                                                          bool require_labels) {
    std::vector<racnet::PreparedScan<double>> prepared;
    for (const DatasetEntry& e : read_dataset(dataset)) {
        if (require_labels && !e.label) throw ConfigError("scan " + e.scan_id + " has no label");
        ScanVolume volume = load_scan(e.scan_dir, e.label);
        volume.scan_id = e.scan_id;
        std::vector<Mask> masks;
        if (!config.unsegmented) {
            if (e.mask_dir.empty()) throw ConfigError("scan " + e.scan_id + " has no mask_dir (use --unsegmented)");
            masks = load_scan_masks(e.mask_dir, volume.length());
        }
        prepared.push_back(racnet::prepare_scan<double>(volume, masks, config.racnet));
    }
    return prepared;
}

TrainResult train_model(const RunConfig& config, const std::vector<racnet::PreparedScan<double>>& scans,
                        std::ostream* log) {
    config.validate();
    if (scans.empty()) throw Error("no training scans");
    TrainResult result{racnet::Model<double>(config.racnet, config.seed), {}};
    racnet::Adam<double> optimizer;
    racnet::Rng rng(config.seed ^ 0xa5a5a5a5a5a5a5a5ull);

    std::vector<std::size_t> order(scans.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t cursor = 0;

    if (log) *log << "step\tloss\tlr\n";
    for (int step = 0; step < config.train_steps; ++step) {
        std::vector<const racnet::PreparedScan<double>*> batch;
        for (int b = 0; b < config.racnet.batch_size; ++b) {
            if (cursor == order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(&scans[order[cursor++]]);
        }
        const double loss =
            racnet::train_step<double>(result.model, optimizer, batch, config.racnet.learning_rate, rng);
        result.losses.push_back(loss);
        if (log) *log << step << '\t' << format_loss(loss) << '\t' << format_loss(config.racnet.learning_rate) << '\n';
    }
    return result;
}

int cmd_train(const RunConfig& config, const fs::path& dataset, const fs::path& checkpoint, const fs::path& log_path,
              std::ostream& out, std::ostream& err) {
    std::vector<racnet::PreparedScan<double>> scans;
    try {
        config.validate();
        scans = prepare_dataset(config, dataset, true);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
    try {
        if (!checkpoint.parent_path().empty()) fs::create_directories(checkpoint.parent_path());
        if (!log_path.parent_path().empty()) fs::create_directories(log_path.parent_path());
        std::ofstream log(log_path);
        if (!log) throw IoError(log_path.string(), "cannot write training log");
        TrainResult result = train_model(config, scans, &log);
        racnet::Checkpoint::capture(result.model, config.to_text()).save(checkpoint);
        out << "trained " << result.losses.size() << " steps on " << scans.size() << " scans";
        if (!result.losses.empty()) {
            out << ", loss " << format_loss(result.losses.front()) << " -> " << format_loss(result.losses.back());
        }
        out << "\ncheckpoint: " << checkpoint.string() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kPartialFailure;
    }
    return kSuccess;
}

int cmd_evaluate(const RunConfig& config, const fs::path& checkpoint_path, const fs::path& dataset,
                 const fs::path& report_path, const fs::path& predictions_path, std::ostream& out,
                 std::ostream& err) {
    racnet::Checkpoint checkpoint;
    std::vector<racnet::PreparedScan<double>> scans;
    try {
        config.validate();
        checkpoint = racnet::Checkpoint::load(checkpoint_path);
        const RunConfig trained = parse_config_text(checkpoint.config_text);
        if (trained.racnet_text() != config.racnet_text()) {
            err << "error: checkpoint was trained with a different classifier configuration\n"
                << "checkpoint:\n" << trained.racnet_text() << "current:\n" << config.racnet_text();
            return kUsageError;
        }
        scans = prepare_dataset(config, dataset, false);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        racnet::Model<double> model(config.racnet, config.seed);
        checkpoint.restore(model);
        metrics::ConfusionCounts counts(config.racnet.num_classes);
        std::ofstream predictions;
        if (!predictions_path.empty()) {
            if (!predictions_path.parent_path().empty()) fs::create_directories(predictions_path.parent_path());
            predictions.open(predictions_path);
            if (!predictions) throw IoError(predictions_path.string(), "cannot write predictions");
            predictions << "scan_id\tprobabilities\tpredicted\ttruth\n";
        }
        char buf[32];
        for (const auto& scan : scans) {
            const auto output = racnet::classify_scan(scan, model);
            const int predicted = output.predicted();
            if (scan.label) counts.add(*scan.label, predicted);
            if (predictions) {
                predictions << scan.scan_id << '\t';
                for (Eigen::Index k = 0; k < output.probabilities.size(); ++k) {
                    std::snprintf(buf, sizeof buf, "%.6f", output.probabilities(k));
                    predictions << (k ? "," : "") << buf;
                }
                predictions << '\t' << to_string(Label(predicted)) << '\t'
                            << (scan.label ? to_string(Label(*scan.label)) : "-") << '\n';
            }
        }
        std::vector<std::string> names{"NON_COVID", "COVID"};
        const std::string report = metrics::format_report(metrics::evaluate(counts, names));
        out << report;
        if (!report_path.empty()) {
            if (!report_path.parent_path().empty()) fs::create_directories(report_path.parent_path());
            std::ofstream r(report_path);
            if (!r) throw IoError(report_path.string(), "cannot write report");
            r << report;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kPartialFailure;
    }
    return kSuccess;
}

int cmd_overlay(const fs::path& scan_dir, const fs::path& mask_dir, const fs::path& output_dir, std::ostream& out,
                std::ostream& err) {
    ScanVolume volume;
    try {
        volume = load_scan(scan_dir);
        fs::create_directories(output_dir);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
    int written = 0;
    int skipped = 0;
    for (int i = 0; i < volume.length(); ++i) {
        const SliceImage& slice = volume.slices[std::size_t(i)];
        const fs::path mask_path = mask_dir / (std::to_string(i) + ".mask.png");
        if (!fs::exists(mask_path)) {
            err << "warning: no mask for slice " << i << ", skipped\n";
            ++skipped;
            continue;
        }
        try {
            const Mask mask = load_mask(mask_path);
            if (mask.rows() != slice.rows() || mask.cols() != slice.cols()) {
                throw Error("mask shape differs from slice");
            }
            const int rows = slice.rows();
            const int cols = slice.cols();
            const int width = 2 * cols + kOverlayGutter;
            std::vector<std::uint8_t> panel(std::size_t(rows) * std::size_t(width), 128);
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < cols; ++x) {
                    const auto v = std::uint8_t(std::lround(std::clamp(slice.pixels(y, x), 0.0, 1.0) * 255.0));
                    const std::size_t row = std::size_t(y) * std::size_t(width);
                    panel[row + std::size_t(x)] = v;
                    panel[row + std::size_t(cols + kOverlayGutter + x)] = mask(y, x) ? v : 0;
                }
            }
            png::write_gray8(output_dir / (std::to_string(i) + ".overlay.png"), rows, width, panel);
            ++written;
        } catch (const std::exception& e) {
            err << "warning: slice " << i << ": " << e.what() << ", skipped\n";
            ++skipped;
        }
    }
    out << written << " panels written, " << skipped << " skipped\n";
    return kSuccess;
}

int cmd_synth(const fs::path& root, int count, int min_length, int max_length, int size, std::uint64_t seed,
              std::ostream& out, std::ostream& err) {
    try {
        const auto scans = synthetic::make_dataset("scan", count, min_length, max_length, size, size, seed);
        synthetic::write_dataset(scans, root);
        const fs::path abs = fs::absolute(root);
        RunConfig desk;
        desk.seed = seed;
        desk.data_root = abs / "scans";
        desk.output_root = abs / "masks";
        desk.fake_config = abs / "fake_backend.txt";
        desk.racnet.t = std::max(16, max_length);
        desk.racnet.input_rows = size;
        desk.racnet.input_cols = size;
        std::ofstream cfg(root / "desk.ini");
        if (!cfg) throw IoError((root / "desk.ini").string(), "cannot write");
        cfg << desk.to_text();
        out << "wrote " << scans.size() << " synthetic scans to " << root.string() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }
    return kSuccess;
}

}  // namespace ctscan::cli
