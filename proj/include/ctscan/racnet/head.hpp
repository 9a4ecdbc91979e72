#pragma once

#include "ctscan/error.hpp"
#include "ctscan/racnet/parameters.hpp"
#include "ctscan/racnet/routing.hpp"

#include <cmath>

namespace ctscan::racnet::head {

/// Zeroes recurrent outputs at positions the plan does not select.
template <typename Scalar>
Matrix<Scalar> apply_mask_layer(const Matrix<Scalar>& outputs, const RoutingPlan& plan) {
    Matrix<Scalar> masked = Matrix<Scalar>::Zero(outputs.rows(), outputs.cols());
    for (int pos : plan.selected) masked.row(pos) = outputs.row(pos);
    return masked;
}

/// Position-major concatenation: element k*units + u is row k, column u.
template <typename Scalar>
Vector<Scalar> concatenate(const Matrix<Scalar>& rows) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = rows;
    return Eigen::Map<const Vector<Scalar>>(row_major.data(), row_major.size());
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
    const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
    return e / e.sum();
}

template <typename Scalar>
struct Trace {
    Vector<Scalar> concat;
    Vector<Scalar> pre;     // dense pre-activation
    Vector<Scalar> hidden;  // ReLU(pre)
    Vector<Scalar> probabilities;
};

/// Dense (ReLU) then softmax output over the masked, concatenated recurrent outputs.
template <typename Scalar>
Vector<Scalar> forward(const Parameters<Scalar>& p, const Matrix<Scalar>& masked, Trace<Scalar>* trace = nullptr) {
    Vector<Scalar> concat = concatenate(masked);
    Vector<Scalar> pre = p.dense_w * concat + p.dense_b;
    Vector<Scalar> hidden = pre.cwiseMax(Scalar(0));
    Vector<Scalar> probs = softmax<Scalar>(p.out_w * hidden + p.out_b);
    if (!probs.allFinite()) throw NumericalError("classifier head");
    if (trace) *trace = {std::move(concat), std::move(pre), std::move(hidden), probs};
    return probs;
}

template <typename Scalar>
Scalar cross_entropy(const Vector<Scalar>& probabilities, int label) {
    using std::log;
    return -log(std::max(probabilities(label), Scalar(1e-300)));
}

/// Gradient of weight * cross_entropy w.r.t. the head parameters (accumulated) and the masked rows (returned).
template <typename Scalar>
Matrix<Scalar> backward(const Parameters<Scalar>& p, const Trace<Scalar>& tr, int label, Scalar weight,
                        Parameters<Scalar>& grads, Eigen::Index steps) {
    Vector<Scalar> dlogits = tr.probabilities;
    dlogits(label) -= Scalar(1);
    dlogits *= weight;
    grads.out_w.noalias() += dlogits * tr.hidden.transpose();
    grads.out_b += dlogits;
    const Vector<Scalar> dpre = (tr.pre.array() > Scalar(0)).select(p.out_w.transpose() * dlogits, Scalar(0));
    grads.dense_w.noalias() += dpre * tr.concat.transpose();
    grads.dense_b += dpre;
    const Vector<Scalar> dconcat = p.dense_w.transpose() * dpre;
    const Eigen::Index units = dconcat.size() / steps;
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(dconcat.data(),
                                                                                                   steps, units);
}

}  // namespace ctscan::racnet::head
