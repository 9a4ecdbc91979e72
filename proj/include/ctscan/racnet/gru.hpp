#pragma once

#include "ctscan/racnet/parameters.hpp"

namespace ctscan::racnet::gru {

// z = sigma(Wz x + Uz h + bz), r = sigma(Wr x + Ur h + br),
// n = tanh(Wn x + Un (r * h) + bn), h' = (1 - z) * n + z * h, h0 = 0.

template <typename Scalar>
struct Trace {
    Matrix<Scalar> inputs;  // t x feature_dim
    Matrix<Scalar> z, r, n, h_prev, outputs;  // t x units each
};

template <typename Scalar>
Matrix<Scalar> sigmoid(const Matrix<Scalar>& a) {
    return (Scalar(1) / (Scalar(1) + (-a.array()).exp())).matrix();
}

/// Runs over every row of `inputs`; returns the t x units hidden states.
template <typename Scalar>
Matrix<Scalar> forward(const Parameters<Scalar>& p, const Matrix<Scalar>& inputs, Trace<Scalar>* trace = nullptr) {
    const Eigen::Index steps = inputs.rows();
    const Eigen::Index units = p.gru_uz.rows();
    const Matrix<Scalar> xz = (inputs * p.gru_wz.transpose()).rowwise() + p.gru_bz.transpose();
    const Matrix<Scalar> xr = (inputs * p.gru_wr.transpose()).rowwise() + p.gru_br.transpose();
    const Matrix<Scalar> xn = (inputs * p.gru_wn.transpose()).rowwise() + p.gru_bn.transpose();

    Matrix<Scalar> outputs(steps, units);
    Matrix<Scalar> zs, rs, ns, hp;
    if (trace) {
        zs.resize(steps, units);
        rs.resize(steps, units);
        ns.resize(steps, units);
        hp.resize(steps, units);
    }
    Vector<Scalar> h = Vector<Scalar>::Zero(units);
    for (Eigen::Index k = 0; k < steps; ++k) {
        const Vector<Scalar> z = sigmoid<Scalar>(xz.row(k).transpose() + p.gru_uz * h);
        const Vector<Scalar> r = sigmoid<Scalar>(xr.row(k).transpose() + p.gru_ur * h);
        const Vector<Scalar> n = (xn.row(k).transpose() + p.gru_un * r.cwiseProduct(h)).array().tanh().matrix();
        if (trace) {
            zs.row(k) = z.transpose();
            rs.row(k) = r.transpose();
            ns.row(k) = n.transpose();
            hp.row(k) = h.transpose();
        }
        h = (Vector<Scalar>::Ones(units) - z).cwiseProduct(n) + z.cwiseProduct(h);
        outputs.row(k) = h.transpose();
    }
    if (trace) {
        trace->inputs = inputs;
        trace->z = std::move(zs);
        trace->r = std::move(rs);
        trace->n = std::move(ns);
        trace->h_prev = std::move(hp);
        trace->outputs = outputs;
    }
    return outputs;
}

/// Backpropagation through time. `grad_outputs` is d(loss)/d(h_k) per step; returns d(loss)/d(inputs).
template <typename Scalar>
Matrix<Scalar> backward(const Parameters<Scalar>& p, const Trace<Scalar>& tr, const Matrix<Scalar>& grad_outputs,
                        Parameters<Scalar>& grads) {
    const Eigen::Index steps = tr.inputs.rows();
    const Eigen::Index units = p.gru_uz.rows();
    Matrix<Scalar> daz(steps, units), dar(steps, units), dan(steps, units);
    Vector<Scalar> dh_next = Vector<Scalar>::Zero(units);
    for (Eigen::Index k = steps - 1; k >= 0; --k) {
        const Vector<Scalar> dh = grad_outputs.row(k).transpose() + dh_next;
        const auto z = tr.z.row(k).transpose().array();
        const auto r = tr.r.row(k).transpose().array();
        const auto n = tr.n.row(k).transpose().array();
        const Vector<Scalar> h_prev = tr.h_prev.row(k).transpose();

        const Vector<Scalar> dn = (dh.array() * (Scalar(1) - z) * (Scalar(1) - n.square())).matrix();
        const Vector<Scalar> dz = (dh.array() * (h_prev.array() - n) * z * (Scalar(1) - z)).matrix();
        const Vector<Scalar> drh = p.gru_un.transpose() * dn;
        const Vector<Scalar> dr = (drh.array() * h_prev.array() * r * (Scalar(1) - r)).matrix();

        Vector<Scalar> dh_prev = (dh.array() * z + drh.array() * r).matrix();
        dh_prev.noalias() += p.gru_uz.transpose() * dz;
        dh_prev.noalias() += p.gru_ur.transpose() * dr;

        grads.gru_un.noalias() += dn * (r * h_prev.array()).matrix().transpose();
        grads.gru_uz.noalias() += dz * h_prev.transpose();
        grads.gru_ur.noalias() += dr * h_prev.transpose();

        daz.row(k) = dz.transpose();
        dar.row(k) = dr.transpose();
        dan.row(k) = dn.transpose();
        dh_next = dh_prev;
    }
    grads.gru_wz.noalias() += daz.transpose() * tr.inputs;
    grads.gru_wr.noalias() += dar.transpose() * tr.inputs;
    grads.gru_wn.noalias() += dan.transpose() * tr.inputs;
    grads.gru_bz += daz.colwise().sum().transpose();
    grads.gru_br += dar.colwise().sum().transpose();
    grads.gru_bn += dan.colwise().sum().transpose();
    return daz * p.gru_wz + dar * p.gru_wr + dan * p.gru_wn;
}

}  // namespace ctscan::racnet::gru
