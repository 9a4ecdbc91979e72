#pragma once

#include "ctscan/image.hpp"
#include "ctscan/racnet/parameters.hpp"

#include <Eigen/Core>

#include <vector>

namespace ctscan::racnet {

/// Per-slice feature extractor: blocks of 3x3 same-padded convolution, ReLU and 2x2 average pooling,
/// followed by global average pooling. Activations are (channels x rows*cols), row-major spatial index.
namespace encoder {

template <typename Scalar>
struct BlockCache {
    int rows = 0;
    int cols = 0;
    Matrix<Scalar> patches;     // (in_channels*9) x (rows*cols)
    Matrix<Scalar> activation;  // post-ReLU, (out_channels) x (rows*cols)
};

template <typename Scalar>
struct Trace {
    std::vector<BlockCache<Scalar>> blocks;
    int final_rows = 0;
    int final_cols = 0;
};

template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& x, int rows, int cols) {
    const Eigen::Index channels = x.rows();
    Matrix<Scalar> patches = Matrix<Scalar>::Zero(channels * 9, Eigen::Index(rows) * cols);
    for (Eigen::Index c = 0; c < channels; ++c) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const Eigen::Index row = c * 9 + (dy + 1) * 3 + (dx + 1);
                for (int y = 0; y < rows; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= rows) continue;
                    for (int x0 = 0; x0 < cols; ++x0) {
                        const int sx = x0 + dx;
                        if (sx < 0 || sx >= cols) continue;
                        patches(row, Eigen::Index(y) * cols + x0) = x(c, Eigen::Index(sy) * cols + sx);
                    }
                }
            }
        }
    }
    return patches;
}

template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& patches, Eigen::Index channels, int rows, int cols) {
    Matrix<Scalar> x = Matrix<Scalar>::Zero(channels, Eigen::Index(rows) * cols);
    for (Eigen::Index c = 0; c < channels; ++c) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const Eigen::Index row = c * 9 + (dy + 1) * 3 + (dx + 1);
                for (int y = 0; y < rows; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= rows) continue;
                    for (int x0 = 0; x0 < cols; ++x0) {
                        const int sx = x0 + dx;
                        if (sx < 0 || sx >= cols) continue;
                        x(c, Eigen::Index(sy) * cols + sx) += patches(row, Eigen::Index(y) * cols + x0);
                    }
                }
            }
        }
    }
    return x;
}

template <typename Scalar>
Matrix<Scalar> avg_pool2(const Matrix<Scalar>& a, int rows, int cols) {
    const int pr = rows / 2;
    const int pc = cols / 2;
    Matrix<Scalar> out(a.rows(), Eigen::Index(pr) * pc);
    for (int y = 0; y < pr; ++y) {
        for (int x = 0; x < pc; ++x) {
            const Eigen::Index i00 = Eigen::Index(2 * y) * cols + 2 * x;
            out.col(Eigen::Index(y) * pc + x) =
                Scalar(0.25) * (a.col(i00) + a.col(i00 + 1) + a.col(i00 + cols) + a.col(i00 + cols + 1));
        }
    }
    return out;
}

template <typename Scalar>
Matrix<Scalar> avg_pool2_backward(const Matrix<Scalar>& grad, int rows, int cols) {
    const int pr = rows / 2;
    const int pc = cols / 2;
    Matrix<Scalar> out = Matrix<Scalar>::Zero(grad.rows(), Eigen::Index(rows) * cols);
    for (int y = 0; y < pr; ++y) {
        for (int x = 0; x < pc; ++x) {
            const Eigen::Index i00 = Eigen::Index(2 * y) * cols + 2 * x;
            const auto g = Scalar(0.25) * grad.col(Eigen::Index(y) * pc + x);
            out.col(i00) = g;
            out.col(i00 + 1) = g;
            out.col(i00 + cols) = g;
            out.col(i00 + cols + 1) = g;
        }
    }
    return out;
}

/// Pooled feature vector (length feature_dim) of one slice, before normalization.
template <typename Scalar>
Vector<Scalar> forward(const Parameters<Scalar>& p, const ImageArray<Scalar>& image, Trace<Scalar>* trace = nullptr) {
    int rows = int(image.rows());
    int cols = int(image.cols());
    Matrix<Scalar> x(1, Eigen::Index(rows) * cols);
    for (int y = 0; y < rows; ++y) {
        for (int c = 0; c < cols; ++c) x(0, Eigen::Index(y) * cols + c) = image(y, c);
    }
    if (trace) trace->blocks.clear();
    for (std::size_t k = 0; k < p.conv_w.size(); ++k) {
        Matrix<Scalar> patches = im2col(x, rows, cols);
        Matrix<Scalar> a = (p.conv_w[k] * patches).colwise() + p.conv_b[k];
        a = a.cwiseMax(Scalar(0));
        x = avg_pool2(a, rows, cols);
        if (trace) trace->blocks.push_back({rows, cols, std::move(patches), std::move(a)});
        rows /= 2;
        cols /= 2;
    }
    if (trace) {
        trace->final_rows = rows;
        trace->final_cols = cols;
    }
    return x.rowwise().mean();
}

/// Accumulates conv gradients for d(loss)/d(pooled features) of one slice.
template <typename Scalar>
void backward(const Parameters<Scalar>& p, const Trace<Scalar>& trace, const Vector<Scalar>& grad_features,
              Parameters<Scalar>& grads) {
    const Eigen::Index spatial = Eigen::Index(trace.final_rows) * trace.final_cols;
    Matrix<Scalar> grad = grad_features.replicate(1, spatial) / Scalar(spatial);
    for (std::size_t k = trace.blocks.size(); k-- > 0;) {
        const BlockCache<Scalar>& b = trace.blocks[k];
        Matrix<Scalar> da = avg_pool2_backward(grad, b.rows, b.cols);
        da = (b.activation.array() > Scalar(0)).select(da, Scalar(0));
        grads.conv_w[k].noalias() += da * b.patches.transpose();
        grads.conv_b[k] += da.rowwise().sum();
        if (k > 0) {
            const Matrix<Scalar> dpatches = p.conv_w[k].transpose() * da;
            grad = col2im(dpatches, p.conv_w[k].cols() / 9, b.rows, b.cols);
        }
    }
}

}  // namespace encoder

/// Batch normalization over per-slice feature vectors (one row per slice).
namespace batchnorm {

template <typename Scalar>
struct Trace {
    Matrix<Scalar> normalized;  // x-hat
    Vector<Scalar> inv_std;
};

template <typename Scalar>
Matrix<Scalar> forward_train(const Parameters<Scalar>& p, const Matrix<Scalar>& x, Scalar epsilon, Vector<Scalar>& batch_mean,
                             Vector<Scalar>& batch_var, Trace<Scalar>& trace) {
    const Scalar n = Scalar(x.rows());
    batch_mean = x.colwise().mean().transpose();
    const Matrix<Scalar> centered = x.rowwise() - batch_mean.transpose();
    batch_var = centered.array().square().colwise().sum().transpose() / n;
    trace.inv_std = (batch_var.array() + epsilon).rsqrt().matrix();
    trace.normalized = centered * trace.inv_std.asDiagonal();
    return (trace.normalized * p.bn_gamma.asDiagonal()).rowwise() + p.bn_beta.transpose();
}

template <typename Scalar>
Matrix<Scalar> forward_eval(const Parameters<Scalar>& p, const Matrix<Scalar>& x, const Vector<Scalar>& mean,
                            const Vector<Scalar>& var, Scalar epsilon) {
    const Vector<Scalar> scale = (p.bn_gamma.array() * (var.array() + epsilon).rsqrt()).matrix();
    return ((x.rowwise() - mean.transpose()) * scale.asDiagonal()).rowwise() + p.bn_beta.transpose();
}

template <typename Scalar>
Matrix<Scalar> backward(const Parameters<Scalar>& p, const Trace<Scalar>& trace, const Matrix<Scalar>& grad_out,
                        Parameters<Scalar>& grads) {
    const Scalar n = Scalar(grad_out.rows());
    grads.bn_gamma += (grad_out.array() * trace.normalized.array()).colwise().sum().transpose().matrix();
    grads.bn_beta += grad_out.colwise().sum().transpose();
    const Matrix<Scalar> dxhat = grad_out * p.bn_gamma.asDiagonal();
    const Vector<Scalar> sum_dxhat = dxhat.colwise().sum().transpose();
    const Vector<Scalar> sum_dxhat_xhat = (dxhat.array() * trace.normalized.array()).colwise().sum().transpose().matrix();
    Matrix<Scalar> dx = (n * dxhat).rowwise() - sum_dxhat.transpose();
    dx -= trace.normalized * sum_dxhat_xhat.asDiagonal();
    return dx * (trace.inv_std / n).asDiagonal();
}

}  // namespace batchnorm

}  // namespace ctscan::racnet
