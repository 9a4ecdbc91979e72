#pragma once

#include "ctscan/racnet/config.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ctscan::racnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Seeded generator whose uniform draws are defined bit-for-bit from mt19937_64 output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint64_t next() { return engine_(); }

    /// Fisher-Yates with the generator's own draws.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = std::size_t(engine_() % i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Every trainable tensor of the classifier.
///
/// conv_w[k] is (out_channels x in_channels*9), one row per output channel over a 3x3 patch.
/// dense_w is (dense_units x t*rnn_units); columns [k*rnn_units, (k+1)*rnn_units) belong to sequence position k.
template <typename Scalar>
struct Parameters {
    std::vector<Matrix<Scalar>> conv_w;
    std::vector<Vector<Scalar>> conv_b;
    Vector<Scalar> bn_gamma, bn_beta;
    Matrix<Scalar> gru_wz, gru_wr, gru_wn;
    Matrix<Scalar> gru_uz, gru_ur, gru_un;
    Vector<Scalar> gru_bz, gru_br, gru_bn;
    Matrix<Scalar> dense_w;
    Vector<Scalar> dense_b;
    Matrix<Scalar> out_w;
    Vector<Scalar> out_b;

    /// Same shapes, all zeros.
    static Parameters zeros_like(const Parameters& p) {
        Parameters z;
        zip([](const std::string&, auto& dst, const auto& src) { dst.setZero(src.rows(), src.cols()); }, z, p);
        return z;
    }

    /// Calls f(name, tensors...) on matching tensors of several parameter sets.
    template <typename F, typename First, typename... Rest>
    static void zip(F&& f, First& first, Rest&... rest) {
        const std::size_t blocks = std::max({first.conv_w.size(), rest.conv_w.size()...});
        first.conv_w.resize(blocks);
        first.conv_b.resize(blocks);
        for (std::size_t k = 0; k < blocks; ++k) {
            f("conv" + std::to_string(k) + ".w", first.conv_w[k], rest.conv_w[k]...);
            f("conv" + std::to_string(k) + ".b", first.conv_b[k], rest.conv_b[k]...);
        }
        f("bn.gamma", first.bn_gamma, rest.bn_gamma...);
        f("bn.beta", first.bn_beta, rest.bn_beta...);
        f("gru.wz", first.gru_wz, rest.gru_wz...);
        f("gru.wr", first.gru_wr, rest.gru_wr...);
        f("gru.wn", first.gru_wn, rest.gru_wn...);
        f("gru.uz", first.gru_uz, rest.gru_uz...);
        f("gru.ur", first.gru_ur, rest.gru_ur...);
        f("gru.un", first.gru_un, rest.gru_un...);
        f("gru.bz", first.gru_bz, rest.gru_bz...);
        f("gru.br", first.gru_br, rest.gru_br...);
        f("gru.bn", first.gru_bn, rest.gru_bn...);
        f("dense.w", first.dense_w, rest.dense_w...);
        f("dense.b", first.dense_b, rest.dense_b...);
        f("out.w", first.out_w, rest.out_w...);
        f("out.b", first.out_b, rest.out_b...);
    }

    template <typename F>
    void for_each(F&& f) {
        zip([&](const std::string& name, auto& tensor) { f(name, tensor); }, *this);
    }

    template <typename F>
    void for_each(F&& f) const {
        auto& self = const_cast<Parameters&>(*this);
        zip([&](const std::string& name, const auto& tensor) { f(name, tensor); }, self);
    }
};

namespace detail {

template <typename Derived>
void fill_uniform(Eigen::PlainObjectBase<Derived>& m, Rng& rng, double limit) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = typename Derived::Scalar(rng.uniform(-limit, limit));
    }
}

}  // namespace detail

/// Glorot-uniform conv/dense/output weights, uniform(+-1/sqrt(units)) recurrent weights, zero biases,
/// unit batch-norm scale.
template <typename Scalar>
Parameters<Scalar> init_parameters(const RACNetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Parameters<Scalar> p;
    std::vector<int> channels{1};
    channels.insert(channels.end(), cfg.conv_channels.begin(), cfg.conv_channels.end());
    channels.push_back(cfg.feature_dim);
    for (std::size_t k = 0; k + 1 < channels.size(); ++k) {
        const int fan_in = channels[k] * 9;
        const int fan_out = channels[k + 1] * 9;
        Matrix<Scalar> w(channels[k + 1], fan_in);
        detail::fill_uniform(w, rng, std::sqrt(6.0 / (fan_in + fan_out)));
        p.conv_w.push_back(std::move(w));
        p.conv_b.push_back(Vector<Scalar>::Zero(channels[k + 1]));
    }
    p.bn_gamma = Vector<Scalar>::Ones(cfg.feature_dim);
    p.bn_beta = Vector<Scalar>::Zero(cfg.feature_dim);

    const double rec = 1.0 / std::sqrt(double(cfg.rnn_units));
    for (Matrix<Scalar>* w : {&p.gru_wz, &p.gru_wr, &p.gru_wn}) {
        w->resize(cfg.rnn_units, cfg.feature_dim);
        detail::fill_uniform(*w, rng, rec);
    }
    for (Matrix<Scalar>* u : {&p.gru_uz, &p.gru_ur, &p.gru_un}) {
        u->resize(cfg.rnn_units, cfg.rnn_units);
        detail::fill_uniform(*u, rng, rec);
    }
    p.gru_bz = Vector<Scalar>::Zero(cfg.rnn_units);
    p.gru_br = Vector<Scalar>::Zero(cfg.rnn_units);
    p.gru_bn = Vector<Scalar>::Zero(cfg.rnn_units);

    const long concat = long(cfg.t) * cfg.rnn_units;
    p.dense_w.resize(cfg.dense_units, concat);
    detail::fill_uniform(p.dense_w, rng, std::sqrt(6.0 / double(concat + cfg.dense_units)));
    p.dense_b = Vector<Scalar>::Zero(cfg.dense_units);
    p.out_w.resize(cfg.num_classes, cfg.dense_units);
    detail::fill_uniform(p.out_w, rng, std::sqrt(6.0 / double(cfg.dense_units + cfg.num_classes)));
    p.out_b = Vector<Scalar>::Zero(cfg.num_classes);
    return p;
}

}  // namespace ctscan::racnet
