#pragma once

#include "ctscan/error.hpp"
#include "ctscan/image.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctscan {

namespace fs = std::filesystem;

enum class Label { NonCovid = 0, Covid = 1 };

std::string to_string(Label label);
Label parse_label(std::string_view text);

struct ScanVolume {
    std::string scan_id;
    std::vector<SliceImage> slices;
    std::optional<Label> label;

    int length() const { return int(slices.size()); }
};

struct VolumeManifest {
    std::string scan_id;
    std::vector<fs::path> slice_paths;
    std::optional<Label> label;

    int length() const { return int(slice_paths.size()); }
};

/// Numeric-aware filename ordering: "s2" < "s10".
bool natural_less(std::string_view a, std::string_view b);

/// Lists the PNG files of a scan directory in natural order.
VolumeManifest scan_manifest(const fs::path& dir, std::optional<Label> label = std::nullopt);

ScanVolume load_scan(const fs::path& dir, std::optional<Label> label = std::nullopt);
ScanVolume load_scan(const VolumeManifest& manifest);

/// Bilinear resampling with pixel-center alignment; output clamped to [0,1].
SliceImage resize_slice(const SliceImage& slice, int rows, int cols);

void save_mask(const Mask& mask, const fs::path& path);
Mask load_mask(const fs::path& path);

/// One record per slice: `<index>\t<path>`, preceded by a `#` header line.
void write_manifest(const VolumeManifest& manifest, const fs::path& path);
VolumeManifest read_manifest(const fs::path& path);

/// One row of a dataset listing used by training and evaluation.
struct DatasetEntry {
    std::string scan_id;
    fs::path scan_dir;
    std::optional<Label> label;
    fs::path mask_dir;  // empty when the scan has not been segmented
};

/// Tab-separated: scan_id, scan_dir, label, mask_dir. Relative paths resolve against the file's directory.
std::vector<DatasetEntry> read_dataset(const fs::path& path);
void write_dataset(const std::vector<DatasetEntry>& entries, const fs::path& path);

/// Loads `<mask_dir>/<index>.mask.png` for each slice of a scan.
std::vector<Mask> load_scan_masks(const fs::path& mask_dir, int length);

}  // namespace ctscan
