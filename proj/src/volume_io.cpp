#include "ctscan/volume_io.hpp"

#include "ctscan/error.hpp"
#include "ctscan/png_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ctscan {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        h ^= (value >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
}

bool is_png(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return ext == ".png";
}

fs::path resolve(const fs::path& base, const std::string& field) {
    fs::path p(field);
    return p.is_absolute() || field.empty() ? p : base / p;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, '\t')) out.push_back(cell);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

}  // namespace

std::string fingerprint(const ImageArray<double>& pixels) {
    std::uint64_t h = kFnvOffset;
    fnv_mix(h, std::uint64_t(pixels.rows()), 4);
    fnv_mix(h, std::uint64_t(pixels.cols()), 4);
    for (Eigen::Index y = 0; y < pixels.rows(); ++y) {
        for (Eigen::Index x = 0; x < pixels.cols(); ++x) {
            const double v = std::clamp(pixels(y, x), 0.0, 1.0);
            fnv_mix(h, std::uint64_t(std::lround(v * 65535.0)), 2);
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string to_string(Label label) { return label == Label::Covid ? "COVID" : "NON_COVID"; }

Label parse_label(std::string_view text) {
    if (text == "COVID" || text == "1") return Label::Covid;
    if (text == "NON_COVID" || text == "0") return Label::NonCovid;
    throw ConfigError("unknown label '" + std::string(text) + "'");
}

bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ie = i;
            std::size_t je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            // Compare digit runs by value: strip leading zeros, then length, then lexically.
            std::size_t is = i;
            std::size_t js = j;
            while (is + 1 < ie && a[is] == '0') ++is;
            while (js + 1 < je && b[js] == '0') ++js;
            const std::string_view ra = a.substr(is, ie - is);
            const std::string_view rb = b.substr(js, je - js);
            if (ra.size() != rb.size()) return ra.size() < rb.size();
            if (ra != rb) return ra < rb;
            if (ie - i != je - j) return ie - i < je - j;
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

VolumeManifest scan_manifest(const fs::path& dir, std::optional<Label> label) {
    if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
    VolumeManifest m;
    m.scan_id = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    m.label = label;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_png(entry.path())) {
            const std::string name = entry.path().filename().string();
            if (name.find(".mask.") != std::string::npos) continue;
            m.slice_paths.push_back(entry.path());
        }
    }
    if (m.slice_paths.empty()) throw NoSlices(dir.string());
    std::sort(m.slice_paths.begin(), m.slice_paths.end(), [](const fs::path& a, const fs::path& b) {
        return natural_less(a.filename().string(), b.filename().string());
    });
    return m;
}

ScanVolume load_scan(const VolumeManifest& manifest) {
    if (manifest.slice_paths.empty()) throw NoSlices(manifest.scan_id);
    ScanVolume v;
    v.scan_id = manifest.scan_id;
    v.label = manifest.label;
    v.slices.reserve(manifest.slice_paths.size());
    for (const auto& path : manifest.slice_paths) {
        png::GrayImage raw;
        try {
            raw = png::read_gray(path);
        } catch (const BadSlice&) {
            throw;
        } catch (const Error& e) {
            throw BadSlice(path.string(), e.what());
        }
        if (!v.slices.empty() && (raw.rows != v.slices.front().rows() || raw.cols != v.slices.front().cols())) {
            throw BadSlice(path.string(), "slice size differs from the first slice of the scan");
        }
        ImageArray<double> pixels(raw.rows, raw.cols);
        const double scale = 1.0 / double(raw.max_value);
        for (int y = 0; y < raw.rows; ++y) {
            for (int x = 0; x < raw.cols; ++x) {
                pixels(y, x) = double(raw.samples[std::size_t(y) * std::size_t(raw.cols) + std::size_t(x)]) * scale;
            }
        }
        v.slices.emplace_back(std::move(pixels));
    }
    return v;
}

ScanVolume load_scan(const fs::path& dir, std::optional<Label> label) { return load_scan(scan_manifest(dir, label)); }

SliceImage resize_slice(const SliceImage& slice, int rows, int cols) {
    if (rows < 1 || cols < 1) throw Error("resize target must be at least 1x1");
    const auto& src = slice.pixels;
    const int src_rows = int(src.rows());
    const int src_cols = int(src.cols());
    SliceImage out;
    out.source_rows = slice.source_rows;
    out.source_cols = slice.source_cols;
    if (rows == src_rows && cols == src_cols) {
        out.pixels = src.cwiseMax(0.0).cwiseMin(1.0);
        return out;
    }
    out.pixels.resize(rows, cols);
    const double sy = double(src_rows) / rows;
    const double sx = double(src_cols) / cols;
    for (int y = 0; y < rows; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(src_rows - 1));
        const int y0 = int(std::floor(fy));
        const int y1 = std::min(y0 + 1, src_rows - 1);
        const double wy = fy - y0;
        for (int x = 0; x < cols; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(src_cols - 1));
            const int x0 = int(std::floor(fx));
            const int x1 = std::min(x0 + 1, src_cols - 1);
            const double wx = fx - x0;
            const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
            const double bottom = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
            out.pixels(y, x) = std::clamp((1 - wy) * top + wy * bottom, 0.0, 1.0);
        }
    }
    return out;
}

void save_mask(const Mask& mask, const fs::path& path) {
    std::vector<std::uint8_t> samples(std::size_t(mask.rows()) * std::size_t(mask.cols()));
    for (int y = 0; y < mask.rows(); ++y) {
        for (int x = 0; x < mask.cols(); ++x) {
            samples[std::size_t(y) * std::size_t(mask.cols()) + std::size_t(x)] = mask(y, x) ? 255 : 0;
        }
    }
    png::write_gray8(path, mask.rows(), mask.cols(), samples);
}

Mask load_mask(const fs::path& path) {
    const png::GrayImage raw = png::read_gray(path);
    BitArray bits(raw.rows, raw.cols);
    const std::uint32_t half = raw.max_value / 2;
    for (int y = 0; y < raw.rows; ++y) {
        for (int x = 0; x < raw.cols; ++x) {
            bits(y, x) = raw.samples[std::size_t(y) * std::size_t(raw.cols) + std::size_t(x)] > half;
        }
    }
    return Mask(std::move(bits));
}

void write_manifest(const VolumeManifest& manifest, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string(), "cannot write manifest");
    out << "# scan_id=" << manifest.scan_id << " l=" << manifest.length()
        << " label=" << (manifest.label ? to_string(*manifest.label) : "-") << '\n';
    for (std::size_t i = 0; i < manifest.slice_paths.size(); ++i) {
        out << i << '\t' << manifest.slice_paths[i].string() << '\n';
    }
}

VolumeManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot read manifest");
    VolumeManifest m;
    std::string line;
    int declared = -1;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream header(line.substr(1));
            std::string field;
            while (header >> field) {
                const auto eq = field.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = field.substr(0, eq);
                const std::string value = field.substr(eq + 1);
                if (key == "scan_id") m.scan_id = value;
                if (key == "l") declared = std::stoi(value);
                if (key == "label" && value != "-") m.label = parse_label(value);
            }
            continue;
        }
        const auto cells = split_tabs(line);
        if (cells.size() != 2) throw IoError(path.string(), "malformed manifest record: " + line);
        if (std::stoul(cells[0]) != m.slice_paths.size()) throw IoError(path.string(), "slice index out of order");
        if (!seen.insert(cells[1]).second) throw IoError(path.string(), "duplicate slice path " + cells[1]);
        m.slice_paths.emplace_back(cells[1]);
    }
    if (declared >= 0 && declared != m.length()) throw IoError(path.string(), "declared length does not match records");
    return m;
}

std::vector<DatasetEntry> read_dataset(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot read dataset listing");
    const fs::path base = path.parent_path();
    std::vector<DatasetEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_tabs(line);
        if (cells.size() < 2 || cells.size() > 4) throw IoError(path.string(), "malformed dataset record: " + line);
        DatasetEntry e;
        e.scan_id = cells[0];
        e.scan_dir = resolve(base, cells[1]);
        if (cells.size() > 2 && !cells[2].empty() && cells[2] != "-") e.label = parse_label(cells[2]);
        if (cells.size() > 3 && cells[3] != "-") e.mask_dir = resolve(base, cells[3]);
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_dataset(const std::vector<DatasetEntry>& entries, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string(), "cannot write dataset listing");
    out << "# scan_id\tscan_dir\tlabel\tmask_dir\n";
    for (const auto& e : entries) {
        out << e.scan_id << '\t' << e.scan_dir.string() << '\t' << (e.label ? to_string(*e.label) : "-") << '\t'
            << (e.mask_dir.empty() ? std::string("-") : e.mask_dir.string()) << '\n';
    }
}

std::vector<Mask> load_scan_masks(const fs::path& mask_dir, int length) {
    std::vector<Mask> masks;
    masks.reserve(std::size_t(length));
    for (int i = 0; i < length; ++i) {
        const fs::path p = mask_dir / (std::to_string(i) + ".mask.png");
        if (!fs::exists(p)) throw IoError(p.string(), "missing mask");
        masks.push_back(load_mask(p));
    }
    return masks;
}

}  // namespace ctscan
