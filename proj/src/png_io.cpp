#include "ctscan/png_io.hpp"

#include "ctscan/error.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

namespace ctscan::png {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw IoError(path.string(), "cannot open");
    return f;
}

void write_impl(const std::filesystem::path& path, int rows, int cols, int bit_depth, const png_byte* data,
                std::size_t row_bytes) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path.string(), "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path.string(), "png write failed");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, png_uint_32(cols), png_uint_32(rows), bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < rows; ++y) {
        png_write_row(png, const_cast<png_bytep>(data + std::size_t(y) * row_bytes));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

GrayImage read_gray(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw BadSlice(path.string(), "not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError(path.string(), "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_byte> buffer;
    std::vector<png_bytep> row_ptrs;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw BadSlice(path.string(), "corrupt PNG data");
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw BadSlice(path.string(), "expected a grayscale PNG");
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    GrayImage img;
    img.rows = int(png_get_image_height(png, info));
    img.cols = int(png_get_image_width(png, info));
    img.max_value = depth == 16 ? 65535u : 255u;
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    buffer.resize(row_bytes * std::size_t(img.rows));
    row_ptrs.resize(std::size_t(img.rows));
    for (int y = 0; y < img.rows; ++y) row_ptrs[std::size_t(y)] = buffer.data() + std::size_t(y) * row_bytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    img.samples.resize(std::size_t(img.rows) * std::size_t(img.cols));
    if (depth == 16) {
        for (std::size_t i = 0; i < img.samples.size(); ++i) {
            std::uint16_t v;
            std::memcpy(&v, buffer.data() + 2 * i, 2);
            img.samples[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < img.samples.size(); ++i) img.samples[i] = buffer[i];
    }
    if (img.rows < 1 || img.cols < 1) throw BadSlice(path.string(), "empty image");
    return img;
}

void write_gray8(const std::filesystem::path& path, int rows, int cols, const std::vector<std::uint8_t>& samples) {
    if (samples.size() != std::size_t(rows) * std::size_t(cols)) throw IoError(path.string(), "sample count mismatch");
    write_impl(path, rows, cols, 8, samples.data(), std::size_t(cols));
}

void write_gray16(const std::filesystem::path& path, int rows, int cols, const std::vector<std::uint16_t>& samples) {
    if (samples.size() != std::size_t(rows) * std::size_t(cols)) throw IoError(path.string(), "sample count mismatch");
    std::vector<png_byte> be(samples.size() * 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        be[2 * i] = png_byte(samples[i] >> 8);
        be[2 * i + 1] = png_byte(samples[i] & 0xff);
    }
    write_impl(path, rows, cols, 16, be.data(), std::size_t(cols) * 2);
}

}  // namespace ctscan::png
