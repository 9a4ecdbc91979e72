#include "ctscan/backends.hpp"

#include "ctscan/error.hpp"
#include "ctscan/volume_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ctscan {

namespace {

int round_ratio_half_up(long numerator, long denominator) {
    return int((2 * numerator + denominator) / (2 * denominator));
}

EmbeddingVec unit(const EmbeddingVec& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateEmbedding();
    return v / n;
}

}  // namespace

KeypointGrid make_grid(int rows, int cols, int n) {
    if (rows < 1 || cols < 1 || n < 1) throw Error("make_grid requires rows, cols, n >= 1");
    KeypointGrid grid;
    grid.points.reserve(std::size_t(n) * std::size_t(n));
    if (n == 1) {
        grid.points.emplace_back(round_ratio_half_up(cols - 1, 2), round_ratio_half_up(rows - 1, 2));
        return grid;
    }
    for (int i = 0; i < n; ++i) {
        const int y = round_ratio_half_up(long(i) * (rows - 1), n - 1);
        for (int j = 0; j < n; ++j) {
            grid.points.emplace_back(round_ratio_half_up(long(j) * (cols - 1), n - 1), y);
        }
    }
    return grid;
}

TextPromptSet::TextPromptSet(std::vector<std::string> prompts) : prompts_(std::move(prompts)) {
    if (prompts_.empty()) throw ConfigError("prompt set is empty");
    for (const auto& p : prompts_) {
        if (p.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("prompt set contains a blank prompt");
    }
}

TextPromptSet TextPromptSet::default_right_lung() {
    return TextPromptSet({
        "a chest CT slice showing the right lung as a large dark air-filled region on the left side of the image",
        "the right lung, a dark oval field of lung parenchyma with thin bright vessels, beside the heart",
        "axial CT of the right lung with low attenuation lung tissue bounded by the ribs",
    });
}

TextPromptSet TextPromptSet::default_left_lung() {
    return TextPromptSet({
        "a chest CT slice showing the left lung as a large dark air-filled region on the right side of the image",
        "the left lung, a dark oval field of lung parenchyma with thin bright vessels, partly wrapped around the heart",
        "axial CT of the left lung with low attenuation lung tissue bounded by the ribs",
    });
}

TextPromptSet TextPromptSet::default_lungs() {
    return TextPromptSet({
        "a chest CT slice showing both lungs as two dark air-filled regions on either side of the mediastinum",
        "the left and right lungs, paired dark fields of lung parenchyma with thin bright vessels",
    });
}

EmbeddingVec ensemble_text_embedding(const TextPromptSet& prompts, const EmbedderBackend& embedder) {
    if (prompts.size() == 0) throw ConfigError("prompt set is empty");
    EmbeddingVec sum = EmbeddingVec::Zero(embedder.dimension());
    for (const auto& p : prompts.prompts()) {
        const EmbeddingVec e = embedder.embed_text(p);
        if (e.size() != sum.size()) throw Error("embedder returned a vector of unexpected dimension");
        sum += unit(e);
    }
    return unit(sum / double(prompts.size()));
}

std::vector<float> replicate_rgb(const ImageArray<double>& image) {
    std::vector<float> rgb(std::size_t(image.size()) * 3);
    std::size_t k = 0;
    for (Eigen::Index y = 0; y < image.rows(); ++y) {
        for (Eigen::Index x = 0; x < image.cols(); ++x) {
            const float v = float(image(y, x));
            rgb[k++] = v;
            rgb[k++] = v;
            rgb[k++] = v;
        }
    }
    return rgb;
}

void FakeSegmenter::configure(const std::string& image_fingerprint, std::vector<Mask> masks) {
    parts_[image_fingerprint] = std::move(masks);
}

const std::vector<Mask>& FakeSegmenter::lookup(const SliceImage& image) const {
    const std::string key = fingerprint(image.pixels);
    const auto it = parts_.find(key);
    if (it == parts_.end()) throw UnconfiguredImage(key);
    for (const auto& m : it->second) {
        if (m.rows() != image.rows() || m.cols() != image.cols()) {
            throw Error("fake segmenter mask shape differs from image " + key);
        }
    }
    return it->second;
}

std::vector<Mask> FakeSegmenter::segment_everything(const SliceImage& image, const KeypointGrid&) const {
    return lookup(image);
}

Mask FakeSegmenter::segment_with_box(const SliceImage& image, const BoundingBox& box) const {
    BitArray out = BitArray::Constant(image.rows(), image.cols(), false);
    for (const auto& part : lookup(image)) {
        if (part.empty()) continue;
        bool inside = true;
        for (int y = 0; y < part.rows() && inside; ++y) {
            for (int x = 0; x < part.cols(); ++x) {
                if (part(y, x) && !box.contains(x, y)) {
                    inside = false;
                    break;
                }
            }
        }
        if (inside) out = out || part.bits();
    }
    return Mask(std::move(out));
}

void FakeEmbedder::configure_text(const std::string& prompt, const EmbeddingVec& vector) {
    if (vector.size() != kDimension) throw ConfigError("fake text vectors must have 4 components");
    text_[prompt] = vector;
}

EmbeddingVec FakeEmbedder::embed_image(const ImageArray<double>& image) const {
    if (image.size() == 0) throw Error("cannot embed an empty image");
    double sum_x = 0;
    double sum_y = 0;
    long on = 0;
    for (Eigen::Index y = 0; y < image.rows(); ++y) {
        for (Eigen::Index x = 0; x < image.cols(); ++x) {
            if (image(y, x) > 0.0) {
                sum_x += double(x);
                sum_y += double(y);
                ++on;
            }
        }
    }
    EmbeddingVec f(kDimension);
    f(0) = image.mean();
    if (on == 0) {
        f(1) = 0.5;
        f(2) = 0.5;
    } else {
        f(1) = image.cols() > 1 ? (sum_x / double(on)) / double(image.cols() - 1) : 0.5;
        f(2) = image.rows() > 1 ? (sum_y / double(on)) / double(image.rows() - 1) : 0.5;
    }
    f(3) = double(on) / double(image.size());
    return f;
}

EmbeddingVec FakeEmbedder::embed_text(const std::string& text) const {
    if (const auto it = text_.find(text); it != text_.end()) return it->second;
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    EmbeddingVec f(kDimension);
    for (int i = 0; i < kDimension; ++i) {
        f(i) = double(((h >> (16 * i)) & 0xffffu) + 1) / 65536.0;
    }
    return f;
}

FakeBackends load_fake_backends(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot read fake backend configuration");
    FakeBackends fakes{std::make_shared<FakeSegmenter>(), std::make_shared<FakeEmbedder>()};
    const std::filesystem::path base = path.parent_path();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind == "image") {
            std::string key;
            fields >> key;
            std::vector<Mask> masks;
            std::string file;
            while (fields >> file) {
                const std::filesystem::path p(file);
                masks.push_back(load_mask(p.is_absolute() ? p : base / p));
            }
            fakes.segmenter->configure(key, std::move(masks));
        } else if (kind == "text") {
            EmbeddingVec v(FakeEmbedder::kDimension);
            for (int i = 0; i < FakeEmbedder::kDimension; ++i) {
                if (!(fields >> v(i))) {
                    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 4 numbers");
                }
            }
            std::string prompt;
            std::getline(fields >> std::ws, prompt);
            if (prompt.empty()) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": missing prompt");
            fakes.embedder->configure_text(prompt, v);
        } else {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unknown record '" + kind + "'");
        }
    }
    return fakes;
}

BackendPair make_backends(const std::string& selection, const std::filesystem::path& fake_config) {
    if (selection == "fake") {
        if (fake_config.empty()) throw ConfigError("backend = fake requires backend.fake_config");
        FakeBackends fakes = load_fake_backends(fake_config);
        return {fakes.segmenter, fakes.embedder};
    }
    if (selection.rfind("checkpoint:", 0) == 0) {
        throw ConfigError("checkpoint backends are not compiled into this build (" + selection + ")");
    }
    throw ConfigError("unknown backend '" + selection + "'");
}

}  // namespace ctscan
