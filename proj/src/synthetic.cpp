#include "ctscan/synthetic.hpp"

#include "ctscan/error.hpp"
#include "ctscan/png_io.hpp"
#include "ctscan/racnet/parameters.hpp"
#include "ctscan/segmentation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace ctscan::synthetic {

namespace {

constexpr double kBody = 0.55;
constexpr double kLung = 0.15;
constexpr double kVessel = 0.4;
constexpr double kOpacity = 0.6;
constexpr double kBlob = 0.85;

struct Ellipse {
    double cx, cy, ax, ay;
    bool contains(int x, int y) const {
        const double dx = (x - cx) / ax;
        const double dy = (y - cy) / ay;
        return dx * dx + dy * dy <= 1.0;
    }
};

Mask rasterize(const Ellipse& e, int rows, int cols) {
    BitArray bits(rows, cols);
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols; ++x) bits(y, x) = e.contains(x, y);
    }
    return Mask(std::move(bits));
}

void paint_disk(ImageArray<double>& img, const Mask& inside, double cx, double cy, double radius, double value) {
    for (int y = 0; y < img.rows(); ++y) {
        for (int x = 0; x < img.cols(); ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            if (dx * dx + dy * dy <= radius * radius && inside(y, x)) img(y, x) = value;
        }
    }
}

/// Random point inside a mask's ellipse, drawn in normalized ellipse coordinates.
std::pair<double, double> point_in(const Ellipse& e, racnet::Rng& rng, double shrink) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = shrink * std::sqrt(rng.uniform());
    return {e.cx + radius * e.ax * std::cos(angle), e.cy + radius * e.ay * std::sin(angle)};
}

void write_mask_file(const Mask& m, const std::filesystem::path& p) { save_mask(m, p); }

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
    const int rows = spec.rows;
    const int cols = spec.cols;
    if (rows < 16 || cols < 16) throw Error("phantoms need at least 16x16 pixels");
    racnet::Rng rng(spec.seed * 0x9e3779b97f4a7c15ull + 17);

    const double scale = 0.6 + 0.4 * std::sin(std::numbers::pi * std::clamp(spec.phase, 0.0, 1.0));
    const Ellipse body{(cols - 1) / 2.0, (rows - 1) / 2.0, cols * 0.47, rows * 0.42};
    const Ellipse right{cols * 0.27, rows * 0.48, cols * 0.12 * scale, rows * 0.26 * scale};
    const Ellipse left{cols * 0.73, rows * 0.48, cols * 0.11 * scale, rows * 0.25 * scale};
    const Ellipse blob{cols * 0.5, rows * 0.55, cols * 0.055, rows * 0.11};

    Phantom ph;
    ph.right_lung = rasterize(right, rows, cols);
    ph.left_lung = rasterize(left, rows, cols);
    ph.blob = rasterize(blob, rows, cols);
    ph.background = Mask(BitArray::Constant(rows, cols, true));
    ph.speck = Mask(rows, cols);
    ph.speck.set(1, 1, true);
    ph.speck.set(1, 2, true);

    ImageArray<double> img = ImageArray<double>::Zero(rows, cols);
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols; ++x) {
            if (body.contains(x, y)) img(y, x) = kBody;
        }
    }
    const Mask lungs = ph.lungs();
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols; ++x) {
            if (lungs(y, x)) img(y, x) = kLung;
            if (ph.blob(y, x)) img(y, x) = kBlob;
        }
    }
    for (const Ellipse* e : {&right, &left}) {
        const int vessels = 3;
        for (int v = 0; v < vessels; ++v) {
            const auto [vx, vy] = point_in(*e, rng, 0.8);
            paint_disk(img, lungs, vx, vy, 0.9, kVessel);
        }
        if (spec.opacities) {
            for (int o = 0; o < 2; ++o) {
                const auto [ox, oy] = point_in(*e, rng, 0.5);
                paint_disk(img, lungs, ox, oy, std::max(2.0, 0.05 * cols * scale), kOpacity);
            }
        }
    }
    img(1, 1) = kVessel;
    img(1, 2) = kVessel;

    ph.image = SliceImage((img * 255.0).round() * (1.0 / 255.0));
    return ph;
}

std::vector<Mask> SyntheticScan::lung_masks() const {
    std::vector<Mask> out;
    out.reserve(phantoms.size());
    for (const auto& p : phantoms) out.push_back(p.lungs());
    return out;
}

SyntheticScan make_scan(const std::string& scan_id, int length, Label label, int rows, int cols,
                        std::uint64_t seed) {
    if (length < 1) throw Error("synthetic scans need at least one slice");
    SyntheticScan scan;
    scan.volume.scan_id = scan_id;
    scan.volume.label = label;
    for (int i = 0; i < length; ++i) {
        PhantomSpec spec;
        spec.rows = rows;
        spec.cols = cols;
        spec.phase = length == 1 ? 0.5 : double(i) / double(length - 1);
        spec.opacities = label == Label::Covid;
        spec.seed = seed * 1000003ull + std::uint64_t(i);
        scan.phantoms.push_back(make_phantom(spec));
        scan.volume.slices.push_back(scan.phantoms.back().image);
    }
    return scan;
}

std::vector<SyntheticScan> make_dataset(const std::string& prefix, int count, int min_length, int max_length,
                                        int rows, int cols, std::uint64_t seed) {
    if (min_length < 1 || max_length < min_length) throw Error("invalid synthetic length range");
    racnet::Rng rng(seed);
    std::vector<SyntheticScan> scans;
    for (int k = 0; k < count; ++k) {
        const int length = min_length + int(rng.next() % std::uint64_t(max_length - min_length + 1));
        char id[64];
        std::snprintf(id, sizeof id, "%s%03d", prefix.c_str(), k);
        scans.push_back(make_scan(id, length, k % 2 ? Label::Covid : Label::NonCovid, rows, cols, rng.next()));
    }
    return scans;
}

void configure_fakes(const std::vector<SyntheticScan>& scans, FakeSegmenter& segmenter, FakeEmbedder& embedder) {
    int rows = 64;
    int cols = 64;
    for (const auto& scan : scans) {
        for (const auto& ph : scan.phantoms) segmenter.configure(ph.image.pixels, ph.parts());
        if (!scan.phantoms.empty()) {
            rows = scan.phantoms.front().image.rows();
            cols = scan.phantoms.front().image.cols();
        }
    }
    PhantomSpec reference;
    reference.rows = rows;
    reference.cols = cols;
    const Phantom ref = make_phantom(reference);
    const EmbeddingVec right = embedder.embed_image(crop_with_mask(ref.image, ref.right_lung));
    const EmbeddingVec left = embedder.embed_image(crop_with_mask(ref.image, ref.left_lung));
    for (const auto& p : TextPromptSet::default_right_lung().prompts()) embedder.configure_text(p, right);
    for (const auto& p : TextPromptSet::default_left_lung().prompts()) embedder.configure_text(p, left);
    for (const auto& p : TextPromptSet::default_lungs().prompts()) embedder.configure_text(p, (right + left) / 2.0);
}

void write_dataset(const std::vector<SyntheticScan>& scans, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    fs::create_directories(root);
    FakeSegmenter unused_segmenter;
    FakeEmbedder embedder;
    configure_fakes(scans, unused_segmenter, embedder);

    std::ofstream fake(root / "fake_backend.txt");
    if (!fake) throw IoError((root / "fake_backend.txt").string(), "cannot write");
    fake << "# fake backend configuration for synthetic phantoms\n";
    char num[32];
    auto text_line = [&](const std::string& prompt) {
        const EmbeddingVec v = embedder.embed_text(prompt);
        fake << "text";
        for (int i = 0; i < v.size(); ++i) {
            std::snprintf(num, sizeof num, " %.17g", v(i));
            fake << num;
        }
        fake << ' ' << prompt << '\n';
    };
    for (const auto& p : TextPromptSet::default_right_lung().prompts()) text_line(p);
    for (const auto& p : TextPromptSet::default_left_lung().prompts()) text_line(p);
    for (const auto& p : TextPromptSet::default_lungs().prompts()) text_line(p);

    std::vector<DatasetEntry> entries;
    static const char* kPartNames[] = {"background", "right", "speck", "blob", "left"};
    for (const auto& scan : scans) {
        const fs::path scan_dir = root / "scans" / scan.volume.scan_id;
        const fs::path part_dir = root / "parts" / scan.volume.scan_id;
        fs::create_directories(scan_dir);
        fs::create_directories(part_dir);
        for (std::size_t i = 0; i < scan.phantoms.size(); ++i) {
            const Phantom& ph = scan.phantoms[i];
            std::vector<std::uint8_t> samples(std::size_t(ph.image.area()));
            for (int y = 0; y < ph.image.rows(); ++y) {
                for (int x = 0; x < ph.image.cols(); ++x) {
                    samples[std::size_t(y) * std::size_t(ph.image.cols()) + std::size_t(x)] =
                        std::uint8_t(std::lround(ph.image.pixels(y, x) * 255.0));
                }
            }
            png::write_gray8(scan_dir / (std::to_string(i) + ".png"), ph.image.rows(), ph.image.cols(), samples);
            fake << "image " << fingerprint(ph.image.pixels);
            const auto parts = ph.parts();
            for (std::size_t k = 0; k < parts.size(); ++k) {
                const std::string name = std::to_string(i) + "." + kPartNames[k] + ".png";
                write_mask_file(parts[k], part_dir / name);
                fake << ' ' << (fs::path("parts") / scan.volume.scan_id / name).generic_string();
            }
            fake << '\n';
        }
        entries.push_back({scan.volume.scan_id, fs::path("scans") / scan.volume.scan_id, scan.volume.label,
                           fs::path("masks") / scan.volume.scan_id});
    }
    ctscan::write_dataset(entries, root / "dataset.tsv");
}

}  // namespace ctscan::synthetic
