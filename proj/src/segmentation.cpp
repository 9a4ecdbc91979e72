#include "ctscan/segmentation.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

namespace ctscan {

std::string to_string(RoiMode mode) { return mode == RoiMode::Single ? "single" : "per-lung"; }

RoiMode parse_roi_mode(const std::string& text) {
    if (text == "single") return RoiMode::Single;
    if (text == "per-lung") return RoiMode::PerLung;
    throw ConfigError("roi_mode must be 'single' or 'per-lung', got '" + text + "'");
}

void PipelineConfig::validate() const {
    if (!(tau_fraction >= 0.0 && tau_fraction < 1.0)) throw ConfigError("tau_fraction must lie in [0, 1)");
    if (!(background_fraction > tau_fraction && background_fraction <= 1.0)) {
        throw ConfigError("background_fraction must lie in (tau_fraction, 1]");
    }
    if (grid_n < 1) throw ConfigError("grid_n must be >= 1");
}

std::vector<std::size_t> filter_mask_indices(std::span<const Mask> masks, double tau_fraction, long image_area,
                                             double background_fraction) {
    if (image_area <= 0) throw Error("filter_masks: image area must be positive");
    const double lower = tau_fraction * double(image_area);
    const double upper = background_fraction * double(image_area);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const double a = double(masks[i].area());
        if (a > lower && a <= upper) kept.push_back(i);
    }
    return kept;
}

std::vector<Mask> filter_masks(std::span<const Mask> masks, double tau_fraction, long image_area,
                               double background_fraction) {
    std::vector<Mask> out;
    for (std::size_t i : filter_mask_indices(masks, tau_fraction, image_area, background_fraction)) {
        out.push_back(masks[i]);
    }
    return out;
}

BoundingBox compute_bbox(const Mask& mask) {
    if (mask.empty()) throw EmptyMask();
    const BitArray& bits = mask.bits();
    const auto cols_on = bits.colwise().any();
    const auto rows_on = bits.rowwise().any();
    BoundingBox box{mask.cols(), mask.rows(), -1, -1};
    for (int x = 0; x < mask.cols(); ++x) {
        if (cols_on(x)) {
            box.x_min = std::min(box.x_min, x);
            box.x_max = x;
        }
    }
    for (int y = 0; y < mask.rows(); ++y) {
        if (rows_on(y)) {
            box.y_min = std::min(box.y_min, y);
            box.y_max = y;
        }
    }
    return box;
}

ImageArray<double> crop_with_mask(const SliceImage& image, const Mask& mask) {
    if (image.rows() != mask.rows() || image.cols() != mask.cols()) {
        throw Error("crop_with_mask: mask and image shapes differ");
    }
    const BoundingBox box = compute_bbox(mask);
    const auto window = [&](const auto& a) { return a.block(box.y_min, box.x_min, box.height(), box.width()); };
    return window(image.pixels) * window(mask.bits()).template cast<double>();
}

RoiChoice select_roi(const CropSet& crops, const EmbedderBackend& embedder, const EmbeddingVec& text) {
    if (crops.empty()) throw NoCandidates("empty crop set");
    RoiChoice best;
    bool have = false;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const double score = cosine_similarity(embedder.embed_image(crops[i].image), text);
        if (!have || score > best.score) {
            best = {i, crops[i].source_index, score};
            have = true;
        }
    }
    return best;
}

SlicePipeline::SlicePipeline(const SegmenterBackend& segmenter, const EmbedderBackend& embedder,
                             PipelineConfig config)
    : segmenter_(segmenter), embedder_(embedder), config_(std::move(config)) {
    config_.validate();
    if (config_.roi_mode == RoiMode::PerLung) {
        targets_.push_back(ensemble_text_embedding(config_.right_lung, embedder_));
        targets_.push_back(ensemble_text_embedding(config_.left_lung, embedder_));
    } else {
        targets_.push_back(ensemble_text_embedding(config_.lungs, embedder_));
    }
}

SliceSegmentation SlicePipeline::run(const SliceImage& image) const {
    if (image.rows() < 1 || image.cols() < 1) throw Error("degenerate slice");
    const KeypointGrid grid = make_grid(image.rows(), image.cols(), config_.grid_n);
    const std::vector<Mask> parts = segmenter_.segment_everything(image, grid);
    for (const auto& m : parts) {
        if (m.rows() != image.rows() || m.cols() != image.cols()) {
            throw Error("segmenter returned a mask with the wrong shape");
        }
    }
    const auto kept = filter_mask_indices(parts, config_.tau_fraction, image.area(), config_.background_fraction);
    if (kept.empty()) throw NoCandidates("no part mask survives the area filter");

    CropSet crops;
    crops.reserve(kept.size());
    for (std::size_t i : kept) crops.push_back({i, crop_with_mask(image, parts[i])});

    SliceSegmentation out;
    out.mask = Mask(image.rows(), image.cols());
    for (const EmbeddingVec& target : targets_) {
        // A second target with no remaining candidates keeps the first target's result only.
        if (crops.empty()) break;
        const RoiChoice choice = select_roi(crops, embedder_, target);
        const BoundingBox box = compute_bbox(parts[choice.source_index]);
        const Mask refined = segmenter_.segment_with_box(image, box);
        if (!refined.same_shape(out.mask)) throw Error("segmenter returned a mask with the wrong shape");
        out.mask = out.mask | refined;
        out.rois.push_back(choice);
        crops.erase(crops.begin() + std::ptrdiff_t(choice.position));
    }
    return out;
}

Mask segment_slice(const SliceImage& image, const SegmenterBackend& segmenter, const EmbedderBackend& embedder,
                   const PipelineConfig& config) {
    return SlicePipeline(segmenter, embedder, config).run(image).mask;
}

int VolumeSegmentation::flagged() const {
    int n = 0;
    for (const auto& s : status) n += s.code != SliceStatusCode::Ok;
    return n;
}

VolumeSegmentation segment_volume(const ScanVolume& volume, const SlicePipeline& pipeline, int workers) {
    const int n = volume.length();
    VolumeSegmentation out;
    out.scan_id = volume.scan_id;
    out.masks.resize(std::size_t(n));
    out.status.resize(std::size_t(n));

    std::atomic<int> next{0};
    std::mutex backend_lock;
    std::mutex error_lock;
    std::optional<int> failed_index;
    std::exception_ptr failure;
    const bool serialize = !pipeline.concurrent();

    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            const SliceImage& slice = volume.slices[std::size_t(i)];
            SliceStatus status;
            status.index = i;
            try {
                std::optional<std::lock_guard<std::mutex>> guard;
                if (serialize) guard.emplace(backend_lock);
                SliceSegmentation seg = pipeline.run(slice);
                out.masks[std::size_t(i)] = std::move(seg.mask);
                for (const auto& r : seg.rois) status.roi_scores.push_back(r.score);
            } catch (const NoCandidates&) {
                out.masks[std::size_t(i)] = Mask(slice.rows(), slice.cols());
                status.code = SliceStatusCode::NoCandidates;
            } catch (...) {
                std::lock_guard<std::mutex> g(error_lock);
                if (!failed_index || i < *failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
            out.status[std::size_t(i)] = std::move(status);
        }
    };

    const int threads = std::clamp(workers, 1, std::max(n, 1));
    if (threads == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    }
    if (failure) {
        try {
            std::rethrow_exception(failure);
        } catch (const std::exception& e) {
            throw SliceError(*failed_index, e.what());
        }
    }
    return out;
}

void write_volume_segmentation(const VolumeSegmentation& result, const std::filesystem::path& root) {
    const std::filesystem::path dir = root / result.scan_id;
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < result.masks.size(); ++i) {
        save_mask(result.masks[i], dir / (std::to_string(i) + ".mask.png"));
    }
    const std::filesystem::path report = dir / "status.tsv";
    std::ofstream out(report);
    if (!out) throw IoError(report.string(), "cannot write status report");
    out << "index\tstatus\troi_scores\n";
    char buf[32];
    for (const auto& s : result.status) {
        out << s.index << '\t' << (s.code == SliceStatusCode::Ok ? "ok" : "no_candidates") << '\t';
        if (s.roi_scores.empty()) out << '-';
        for (std::size_t k = 0; k < s.roi_scores.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.6f", s.roi_scores[k]);
            out << (k ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace ctscan
