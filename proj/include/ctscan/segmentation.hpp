#pragma once

#include "ctscan/backends.hpp"
#include "ctscan/error.hpp"
#include "ctscan/image.hpp"
#include "ctscan/volume_io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ctscan {

enum class RoiMode { Single, PerLung };

std::string to_string(RoiMode mode);
RoiMode parse_roi_mode(const std::string& text);

struct PipelineConfig {
    double tau_fraction = 0.02;        // lower area cut, fraction of the slice area
    double background_fraction = 0.9;  // masks larger than this fraction are treated as background
    int grid_n = 32;
    RoiMode roi_mode = RoiMode::PerLung;
    TextPromptSet right_lung = TextPromptSet::default_right_lung();
    TextPromptSet left_lung = TextPromptSet::default_left_lung();
    TextPromptSet lungs = TextPromptSet::default_lungs();

    void validate() const;
};

/// Indices of the masks with tau*area < mask area <= background_fraction*area, in input order.
std::vector<std::size_t> filter_mask_indices(std::span<const Mask> masks, double tau_fraction, long image_area,
                                             double background_fraction = 0.9);

std::vector<Mask> filter_masks(std::span<const Mask> masks, double tau_fraction, long image_area,
                               double background_fraction = 0.9);

/// Tight box over the foreground; throws EmptyMask when there is none.
BoundingBox compute_bbox(const Mask& mask);

/// Image times mask, cropped to the mask's bounding box.
ImageArray<double> crop_with_mask(const SliceImage& image, const Mask& mask);

struct Crop {
    std::size_t source_index;  // index into the segment-everything output
    ImageArray<double> image;
};
using CropSet = std::vector<Crop>;

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& v, const Eigen::MatrixBase<DerivedB>& w) {
    using Scalar = typename DerivedA::Scalar;
    if (v.size() != w.size()) throw Error("cosine_similarity: dimension mismatch");
    const Scalar nv = v.norm();
    const Scalar nw = w.norm();
    if (!(nv > Scalar(0)) || !(nw > Scalar(0)) || !std::isfinite(double(nv)) || !std::isfinite(double(nw))) {
        throw DegenerateEmbedding();
    }
    const Scalar s = v.dot(w) / (nv * nw);
    return std::clamp(s, Scalar(-1), Scalar(1));
}

struct RoiChoice {
    std::size_t position = 0;      // position inside the CropSet
    std::size_t source_index = 0;  // index of the originating part mask
    double score = 0.0;
};

/// Argmax of cosine similarity between each crop's image embedding and `text`; lowest position wins ties.
RoiChoice select_roi(const CropSet& crops, const EmbedderBackend& embedder, const EmbeddingVec& text);

struct SliceSegmentation {
    Mask mask;
    std::vector<RoiChoice> rois;  // one per target, in target order
};

/// Per-slice orchestration with target text embeddings computed once.
class SlicePipeline {
public:
    SlicePipeline(const SegmenterBackend& segmenter, const EmbedderBackend& embedder, PipelineConfig config);

    SliceSegmentation run(const SliceImage& image) const;

    const PipelineConfig& config() const { return config_; }
    bool concurrent() const { return segmenter_.concurrent() && embedder_.concurrent(); }

private:
    const SegmenterBackend& segmenter_;
    const EmbedderBackend& embedder_;
    PipelineConfig config_;
    std::vector<EmbeddingVec> targets_;
};

/// One slice through segment-everything, area filter, ROI retrieval per target and box-prompted refinement.
/// Returns the union of the per-target final masks.
Mask segment_slice(const SliceImage& image, const SegmenterBackend& segmenter, const EmbedderBackend& embedder,
                   const PipelineConfig& config);

enum class SliceStatusCode { Ok, NoCandidates };

struct SliceStatus {
    int index = 0;
    SliceStatusCode code = SliceStatusCode::Ok;
    std::vector<double> roi_scores;
};

struct VolumeSegmentation {
    std::string scan_id;
    std::vector<Mask> masks;
    std::vector<SliceStatus> status;

    int flagged() const;
};

/// Applies the slice pipeline independently to each slice, on up to `workers` threads.
/// Slices without candidates get an all-zero mask and a flagged status.
VolumeSegmentation segment_volume(const ScanVolume& volume, const SlicePipeline& pipeline, int workers = 1);

/// Writes `<root>/<scan_id>/<index>.mask.png` and `<root>/<scan_id>/status.tsv`.
void write_volume_segmentation(const VolumeSegmentation& result, const std::filesystem::path& root);

}  // namespace ctscan
