#pragma once

#include "ctscan/racnet/model.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace ctscan::racnet {

/// Single-file container: magic "CTSCKPT\n", u32 version, config echo text, then named float64 tensors.
/// Integers are little-endian; tensors are stored column-major.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::string config_text;
    std::map<std::string, Matrix<double>> tensors;

    static Checkpoint capture(const Model<double>& model, std::string config_text);

    /// Copies tensors into `model`; every parameter must be present with a matching shape.
    void restore(Model<double>& model) const;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace ctscan::racnet
