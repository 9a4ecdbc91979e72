#pragma once

#include "ctscan/error.hpp"
#include "ctscan/image.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace ctscan {

/// Un-normalized embedding in the shared image/text space.
using EmbeddingVec = Eigen::VectorXd;

/// Lattice of (x, y) keypoints used as prompts in segment-everything mode.
struct KeypointGrid {
    std::vector<Eigen::Vector2i> points;
};

/// n x n lattice over [0, cols-1] x [0, rows-1], rounding half up. n = 1 gives the center.
KeypointGrid make_grid(int rows, int cols, int n);

/// Promptable segmenter with prompt-free ("everything") and box-prompted modes.
/// Returned masks always have the input image's shape.
class SegmenterBackend {
public:
    virtual ~SegmenterBackend() = default;

    virtual std::vector<Mask> segment_everything(const SliceImage& image, const KeypointGrid& grid) const = 0;
    virtual Mask segment_with_box(const SliceImage& image, const BoundingBox& box) const = 0;

    /// False means calls must be serialized by the caller.
    virtual bool concurrent() const { return false; }
};

/// Image and text encoders sharing one embedding space of fixed dimension.
class EmbedderBackend {
public:
    virtual ~EmbedderBackend() = default;

    virtual EmbeddingVec embed_image(const ImageArray<double>& image) const = 0;
    virtual EmbeddingVec embed_text(const std::string& text) const = 0;
    virtual int dimension() const = 0;

    virtual bool concurrent() const { return false; }
};

/// Non-empty list of descriptive sentences for one anatomical target.
class TextPromptSet {
public:
    TextPromptSet() = default;
    explicit TextPromptSet(std::vector<std::string> prompts);

    const std::vector<std::string>& prompts() const& { return prompts_; }
    std::vector<std::string> prompts() && { return std::move(prompts_); }
    std::size_t size() const { return prompts_.size(); }

    static TextPromptSet default_right_lung();
    static TextPromptSet default_left_lung();
    static TextPromptSet default_lungs();

private:
    std::vector<std::string> prompts_;
};

/// Mean of the unit-normalized prompt embeddings, renormalized to unit length.
EmbeddingVec ensemble_text_embedding(const TextPromptSet& prompts, const EmbedderBackend& embedder);

/// Interleaved RGB copy of a single-channel image, for adapters whose encoders expect three channels.
std::vector<float> replicate_rgb(const ImageArray<double>& image);

/// Deterministic segmenter keyed by image fingerprint.
///
/// segment_everything returns the configured masks in order. segment_with_box returns the union of
/// every configured mask whose foreground lies entirely inside the box (an empty mask when none do).
class FakeSegmenter final : public SegmenterBackend {
public:
    void configure(const std::string& image_fingerprint, std::vector<Mask> masks);
    void configure(const ImageArray<double>& image, std::vector<Mask> masks) {
        configure(fingerprint(image), std::move(masks));
    }

    std::vector<Mask> segment_everything(const SliceImage& image, const KeypointGrid& grid) const override;
    Mask segment_with_box(const SliceImage& image, const BoundingBox& box) const override;
    bool concurrent() const override { return true; }

    std::size_t configured_images() const { return parts_.size(); }

private:
    const std::vector<Mask>& lookup(const SliceImage& image) const;

    std::map<std::string, std::vector<Mask>> parts_;
};

/// Deterministic embedder with hand-checkable features.
///
/// Image features are (mean intensity, centroid x / (cols-1), centroid y / (rows-1), foreground fraction)
/// over pixels > 0; an empty foreground has its centroid at (0.5, 0.5). Single-row or single-column images
/// use 0.5 for the degenerate axis. Text vectors are configured per prompt; unknown prompts hash to a fixed
/// vector in (0,1]^4.
class FakeEmbedder final : public EmbedderBackend {
public:
    static constexpr int kDimension = 4;

    void configure_text(const std::string& prompt, const EmbeddingVec& vector);

    EmbeddingVec embed_image(const ImageArray<double>& image) const override;
    EmbeddingVec embed_text(const std::string& text) const override;
    int dimension() const override { return kDimension; }
    bool concurrent() const override { return true; }

private:
    std::map<std::string, EmbeddingVec> text_;
};

struct FakeBackends {
    std::shared_ptr<FakeSegmenter> segmenter;
    std::shared_ptr<FakeEmbedder> embedder;
};

/// Line-oriented fake configuration:
///
///     image <fingerprint> <mask.png> [<mask.png> ...]
///     text <v0> <v1> <v2> <v3> <prompt text to end of line>
///
/// Mask paths are relative to the file's directory. `#` starts a comment line.
FakeBackends load_fake_backends(const std::filesystem::path& path);

struct BackendPair {
    std::shared_ptr<const SegmenterBackend> segmenter;
    std::shared_ptr<const EmbedderBackend> embedder;
};

/// Resolves a `backend` setting: `fake` (requires `fake_config`) or `checkpoint:<path>`.
BackendPair make_backends(const std::string& selection, const std::filesystem::path& fake_config);

}  // namespace ctscan
