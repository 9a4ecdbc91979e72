#pragma once

#include "ctscan/backends.hpp"
#include "ctscan/image.hpp"
#include "ctscan/volume_io.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctscan::synthetic {

/// Chest-like phantom: body ellipse, two dark lung ellipses, a bright central blob.
struct PhantomSpec {
    int rows = 64;
    int cols = 64;
    double phase = 0.5;          // position along the scan in [0,1]; lungs are largest mid-scan
    bool opacities = false;      // plant bright patches inside the lungs
    std::uint64_t seed = 0;      // vessel and opacity placement
};

struct Phantom {
    SliceImage image;            // quantized to 8-bit levels, so it survives a PNG round-trip exactly
    Mask right_lung;             // image-left ellipse
    Mask left_lung;              // image-right ellipse
    Mask blob;                   // mediastinum between the lungs
    Mask background;             // full frame
    Mask speck;                  // tiny part below any sensible area threshold

    /// Parts in the order a segment-everything call returns them.
    std::vector<Mask> parts() const { return {background, right_lung, speck, blob, left_lung}; }
    Mask lungs() const { return right_lung | left_lung; }
};

Phantom make_phantom(const PhantomSpec& spec);

struct SyntheticScan {
    ScanVolume volume;
    std::vector<Phantom> phantoms;  // one per slice

    std::vector<Mask> lung_masks() const;
};

/// A scan of `length` phantom slices; COVID scans carry lung opacities on every slice.
SyntheticScan make_scan(const std::string& scan_id, int length, Label label, int rows, int cols,
                        std::uint64_t seed);

/// Balanced set: scan k is COVID when k is odd, lengths drawn in [min_length, max_length].
std::vector<SyntheticScan> make_dataset(const std::string& prefix, int count, int min_length, int max_length,
                                        int rows, int cols, std::uint64_t seed);

/// Configures fakes so the default prompt sets retrieve the lung parts of every slice.
void configure_fakes(const std::vector<SyntheticScan>& scans, FakeSegmenter& segmenter, FakeEmbedder& embedder);

/// Writes scans/<id>/<i>.png, parts/<id>/<i>.<part>.png, fake_backend.txt and dataset.tsv (mask_dir = masks/<id>).
void write_dataset(const std::vector<SyntheticScan>& scans, const std::filesystem::path& root);

}  // namespace ctscan::synthetic
