#include "ctscan/racnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace ctscan::racnet {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'S', 'C', 'K', 'P', 'T', '\n'};

template <typename T>
void put(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError(path, "truncated checkpoint");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& in, const std::string& path) {
    const auto n = get<std::uint64_t>(in, path);
    if (n > (1ull << 30)) throw IoError(path, "implausible string length in checkpoint");
    std::string s(n, '\0');
    if (!in.read(s.data(), std::streamsize(n))) throw IoError(path, "truncated checkpoint");
    return s;
}

template <typename Derived>
Matrix<double> as_matrix(const Eigen::MatrixBase<Derived>& m) {
    return m;
}

template <typename Derived>
void assign(const std::map<std::string, Matrix<double>>& tensors, const std::string& name,
            Eigen::PlainObjectBase<Derived>& dst) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("checkpoint is missing tensor " + name);
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols()) {
        throw Error("checkpoint tensor " + name + " has shape " + std::to_string(it->second.rows()) + "x" +
                    std::to_string(it->second.cols()) + ", model expects " + std::to_string(dst.rows()) + "x" +
                    std::to_string(dst.cols()));
    }
    dst = it->second;
}

}  // namespace

Checkpoint Checkpoint::capture(const Model<double>& model, std::string config_text) {
    Checkpoint c;
    c.config_text = std::move(config_text);
    model.params.for_each([&](const std::string& name, const auto& t) { c.tensors[name] = as_matrix(t); });
    c.tensors["bn.running_mean"] = model.running_mean;
    c.tensors["bn.running_var"] = model.running_var;
    return c;
}

void Checkpoint::restore(Model<double>& model) const {
    model.params.for_each([&](const std::string& name, auto& t) { assign(tensors, name, t); });
    assign(tensors, "bn.running_mean", model.running_mean);
    assign(tensors, "bn.running_var", model.running_var);
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot write checkpoint");
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put_string(out, config_text);
    put<std::uint64_t>(out, tensors.size());
    for (const auto& [name, m] : tensors) {
        put_string(out, name);
        put<std::uint64_t>(out, std::uint64_t(m.rows()));
        put<std::uint64_t>(out, std::uint64_t(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
    }
    if (!out) throw IoError(path.string(), "checkpoint write failed");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    const std::string p = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(p, "cannot read checkpoint");
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw IoError(p, "not a checkpoint file");
    }
    const auto version = get<std::uint32_t>(in, p);
    if (version != kVersion) throw IoError(p, "unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.config_text = get_string(in, p);
    const auto count = get<std::uint64_t>(in, p);
    for (std::uint64_t k = 0; k < count; ++k) {
        std::string name = get_string(in, p);
        const auto rows = get<std::uint64_t>(in, p);
        const auto cols = get<std::uint64_t>(in, p);
        if (rows * cols > (1ull << 31)) throw IoError(p, "implausible tensor size for " + name);
        Matrix<double> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(in, p);
        c.tensors.emplace(std::move(name), std::move(m));
    }
    return c;
}

}  // namespace ctscan::racnet
