#pragma once

#include "ctscan/racnet/parameters.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ctscan::racnet {

/// Adam with per-position freezing of the dense weights.
///
/// Dense weight columns of positions flagged inactive keep their value and their first/second moment
/// estimates untouched for the step; every other tensor is updated normally.
template <typename Scalar>
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
        : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

    void step(Parameters<Scalar>& params, const Parameters<Scalar>& grads, const std::vector<bool>& active_positions,
              double learning_rate) {
        if (!initialized_) {
            m_ = Parameters<Scalar>::zeros_like(params);
            v_ = Parameters<Scalar>::zeros_like(params);
            initialized_ = true;
        }
        ++steps_;
        const Scalar b1 = Scalar(beta1_);
        const Scalar b2 = Scalar(beta2_);
        const Scalar c1 = Scalar(1) / (Scalar(1) - Scalar(std::pow(beta1_, steps_)));
        const Scalar c2 = Scalar(1) / (Scalar(1) - Scalar(std::pow(beta2_, steps_)));
        const Scalar lr = Scalar(learning_rate);
        const Scalar eps = Scalar(epsilon_);

        auto update = [&](auto&& w, auto&& g, auto&& m, auto&& v) {
            m = b1 * m + (Scalar(1) - b1) * g;
            v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
            w.array() -= lr * (m.array() * c1) / ((v.array() * c2).sqrt() + eps);
        };

        Parameters<Scalar>::zip(
            [&](const std::string& name, auto& w, const auto& g, auto& m, auto& v) {
                if (name != "dense.w") {
                    update(w, g, m, v);
                    return;
                }
                const Eigen::Index positions = Eigen::Index(active_positions.size());
                const Eigen::Index units = w.cols() / positions;
                for (Eigen::Index k = 0; k < positions; ++k) {
                    if (!active_positions[std::size_t(k)]) continue;
                    update(w.middleCols(k * units, units), g.middleCols(k * units, units),
                           m.middleCols(k * units, units), v.middleCols(k * units, units));
                }
            },
            params, const_cast<Parameters<Scalar>&>(grads), m_, v_);
    }

    int steps() const { return steps_; }

private:
    double beta1_, beta2_, epsilon_;
    int steps_ = 0;
    bool initialized_ = false;
    Parameters<Scalar> m_, v_;
};

}  // namespace ctscan::racnet
