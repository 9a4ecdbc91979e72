#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>

namespace ctscan {

/// Single-channel intensities, rows = y, cols = x.
template <typename Scalar>
using ImageArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using BitArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A slice normalized to [0,1]. `source_rows/cols` remember the size on disk.
struct SliceImage {
    ImageArray<double> pixels;
    int source_rows = 0;
    int source_cols = 0;

    SliceImage() = default;
    explicit SliceImage(ImageArray<double> p)
        : pixels(std::move(p)), source_rows(int(pixels.rows())), source_cols(int(pixels.cols())) {}

    int rows() const { return int(pixels.rows()); }
    int cols() const { return int(pixels.cols()); }
    long area() const { return long(pixels.size()); }
};

/// Binary mask with a cached foreground count.
class Mask {
public:
    Mask() = default;
    Mask(int rows, int cols) : bits_(BitArray::Constant(rows, cols, false)) {}
    explicit Mask(BitArray bits) : bits_(std::move(bits)), area_(bits_.count()) {}

    const BitArray& bits() const { return bits_; }
    int rows() const { return int(bits_.rows()); }
    int cols() const { return int(bits_.cols()); }
    long area() const { return area_; }
    bool empty() const { return area_ == 0; }

    bool operator()(int y, int x) const { return bits_(y, x); }

    void set(int y, int x, bool on) {
        if (bits_(y, x) != on) {
            bits_(y, x) = on;
            area_ += on ? 1 : -1;
        }
    }

    bool same_shape(const Mask& other) const { return rows() == other.rows() && cols() == other.cols(); }

    friend bool operator==(const Mask& a, const Mask& b) {
        return a.same_shape(b) && (a.bits_ == b.bits_).all();
    }

    friend Mask operator|(const Mask& a, const Mask& b) { return Mask(a.bits_ || b.bits_); }

private:
    BitArray bits_;
    long area_ = 0;
};

/// Inclusive pixel box; x is the column, y the row.
struct BoundingBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int width() const { return x_max - x_min + 1; }
    int height() const { return y_max - y_min + 1; }
    bool contains(int x, int y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Stable 64-bit content hash of an image (dims + 16-bit quantized pixels), hex encoded.
std::string fingerprint(const ImageArray<double>& pixels);

}  // namespace ctscan
