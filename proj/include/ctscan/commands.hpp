#pragma once

#include "ctscan/racnet/model.hpp"
#include "ctscan/run_config.hpp"

#include <filesystem>
#include <ostream>
#include <vector>

namespace ctscan::cli {

enum ExitCode : int { kSuccess = 0, kPartialFailure = 1, kUsageError = 2 };

/// Pixels of mid-gray between the two halves of an overlay panel.
constexpr int kOverlayGutter = 8;

/// Segments each scan directory (relative paths resolve against run.data_root; none given means every
/// subdirectory of run.data_root) and writes masks plus status under run.output_root.
int cmd_segment(const RunConfig& config, const std::vector<std::filesystem::path>& scans, std::ostream& out,
                std::ostream& err);

struct TrainResult {
    racnet::Model<double> model;
    std::vector<double> losses;
};

/// Seeded training loop over prepared scans: epoch-wise shuffling, batches of racnet.batch_size, Adam.
/// Writes `step\tloss\tlr` lines to `log` when given.
TrainResult train_model(const RunConfig& config, const std::vector<racnet::PreparedScan<double>>& scans,
                        std::ostream* log = nullptr);

/// Loads a dataset listing into classifier inputs. Masks come from each entry's mask_dir unless
/// `unsegmented` is set. Throws on missing labels when `require_labels` is set.
std::vector<racnet::PreparedScan<double>> prepare_dataset(const RunConfig& config,
                                                          const std::filesystem::path& dataset,
                                                          bool require_labels);

int cmd_train(const RunConfig& config, const std::filesystem::path& dataset, const std::filesystem::path& checkpoint,
              const std::filesystem::path& log, std::ostream& out, std::ostream& err);

int cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint,
                 const std::filesystem::path& dataset, const std::filesystem::path& report,
                 const std::filesystem::path& predictions, std::ostream& out, std::ostream& err);

/// Side-by-side panels (original | masked) for every slice with a mask, written as `<index>.overlay.png`.
int cmd_overlay(const std::filesystem::path& scan_dir, const std::filesystem::path& mask_dir,
                const std::filesystem::path& output_dir, std::ostream& out, std::ostream& err);

/// Writes a synthetic phantom dataset plus a matching desk-scale config file.
int cmd_synth(const std::filesystem::path& root, int count, int min_length, int max_length, int size,
              std::uint64_t seed, std::ostream& out, std::ostream& err);

}  // namespace ctscan::cli
