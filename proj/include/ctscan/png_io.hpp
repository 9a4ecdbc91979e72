#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctscan::png {

/// Decoded grayscale image. `max_value` is 255 or 65535 depending on the stored bit depth.
struct GrayImage {
    int rows = 0;
    int cols = 0;
    std::uint32_t max_value = 255;
    std::vector<std::uint16_t> samples;  // row-major
};

GrayImage read_gray(const std::filesystem::path& path);

void write_gray8(const std::filesystem::path& path, int rows, int cols, const std::vector<std::uint8_t>& samples);
void write_gray16(const std::filesystem::path& path, int rows, int cols, const std::vector<std::uint16_t>& samples);

}  // namespace ctscan::png
