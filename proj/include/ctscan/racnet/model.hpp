#pragma once

#include "ctscan/error.hpp"
#include "ctscan/image.hpp"
#include "ctscan/racnet/adam.hpp"
#include "ctscan/racnet/config.hpp"
#include "ctscan/racnet/encoder.hpp"
#include "ctscan/racnet/gru.hpp"
#include "ctscan/racnet/head.hpp"
#include "ctscan/racnet/parameters.hpp"
#include "ctscan/racnet/routing.hpp"
#include "ctscan/volume_io.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctscan::racnet {

/// Per-slice features placed on the padded time axis. Rows outside `plan` are zero.
template <typename Scalar>
struct SequenceFeatures {
    Matrix<Scalar> features;  // t x feature_dim
    RoutingPlan plan;
};

template <typename Scalar>
struct LabeledFeatures {
    SequenceFeatures<Scalar> features;
    int label = 0;
};

template <typename Scalar>
struct ClassifierOutput {
    Vector<Scalar> probabilities;

    int predicted() const {
        Eigen::Index best = 0;
        probabilities.maxCoeff(&best);  // first maximum on ties
        return int(best);
    }
};

/// A scan reduced to classifier inputs: masked, resized slices and their routing plan.
template <typename Scalar>
struct PreparedScan {
    std::string scan_id;
    std::vector<ImageArray<Scalar>> slices;
    RoutingPlan plan;
    std::optional<int> label;
};

/// Parameters plus batch-norm running statistics for one configuration.
template <typename Scalar>
class Model {
    RACNetConfig config_;

public:
    Model(RACNetConfig config, std::uint64_t seed)
        : config_(std::move(config)),
          params(init_parameters<Scalar>(config_, seed)),
          running_mean(Vector<Scalar>::Zero(config_.feature_dim)),
          running_var(Vector<Scalar>::Ones(config_.feature_dim)) {}

    const RACNetConfig& config() const { return config_; }

    Parameters<Scalar> params;
    Vector<Scalar> running_mean;
    Vector<Scalar> running_var;
};

/// Masks each slice (when masks are given), resizes it to the input size and builds the routing plan.
/// An empty `masks` span means the scan is used unsegmented.
template <typename Scalar>
PreparedScan<Scalar> prepare_scan(const ScanVolume& volume, std::span<const Mask> masks, const RACNetConfig& cfg) {
    const int l = volume.length();
    if (l < 1) throw NoSlices(volume.scan_id);
    if (l > cfg.t) throw TooManySlices(cfg.t, l);
    if (!masks.empty() && int(masks.size()) != l) {
        throw Error(volume.scan_id + ": " + std::to_string(masks.size()) + " masks for " + std::to_string(l) + " slices");
    }
    PreparedScan<Scalar> out;
    out.scan_id = volume.scan_id;
    out.plan = make_plan(cfg.routing, cfg.t, l);
    if (volume.label) out.label = int(*volume.label);
    out.slices.reserve(std::size_t(l));
    for (int i = 0; i < l; ++i) {
        SliceImage slice = volume.slices[std::size_t(i)];
        if (!masks.empty()) {
            const Mask& m = masks[std::size_t(i)];
            if (m.rows() != slice.rows() || m.cols() != slice.cols()) {
                throw Error(volume.scan_id + ": mask " + std::to_string(i) + " does not match its slice");
            }
            slice.pixels = slice.pixels * m.bits().template cast<double>();
        }
        out.slices.push_back(resize_slice(slice, cfg.input_rows, cfg.input_cols).pixels.template cast<Scalar>());
    }
    return out;
}

/// Places the rows of `slice_features` (one per real slice) at the plan positions of a zero t x F matrix.
template <typename Scalar>
SequenceFeatures<Scalar> place_features(const Matrix<Scalar>& slice_features, const RoutingPlan& plan) {
    SequenceFeatures<Scalar> sf{Matrix<Scalar>::Zero(plan.t, slice_features.cols()), plan};
    for (int i = 0; i < plan.length(); ++i) sf.features.row(plan.selected[std::size_t(i)]) = slice_features.row(i);
    return sf;
}

/// Inference-mode feature extraction (running batch-norm statistics, no dropout).
template <typename Scalar>
SequenceFeatures<Scalar> embed_and_sequence(const PreparedScan<Scalar>& scan, const Model<Scalar>& model) {
    const auto& cfg = model.config();
    Matrix<Scalar> raw(Eigen::Index(scan.slices.size()), cfg.feature_dim);
    for (std::size_t i = 0; i < scan.slices.size(); ++i) {
        raw.row(Eigen::Index(i)) = encoder::forward(model.params, scan.slices[i]).transpose();
    }
    const Matrix<Scalar> normalized =
        batchnorm::forward_eval(model.params, raw, model.running_mean, model.running_var, Scalar(cfg.bn_epsilon));
    return place_features(normalized, scan.plan);
}

template <typename Scalar>
SequenceFeatures<Scalar> embed_and_sequence(const ScanVolume& volume, std::span<const Mask> masks,
                                            const Model<Scalar>& model) {
    return embed_and_sequence(prepare_scan<Scalar>(volume, masks, model.config()), model);
}

/// Recurrent layer over all t steps, mask layer, dense head and softmax.
template <typename Scalar>
ClassifierOutput<Scalar> forward(const SequenceFeatures<Scalar>& sf, const Model<Scalar>& model) {
    const Matrix<Scalar> outputs = gru::forward(model.params, sf.features);
    return {head::forward(model.params, head::apply_mask_layer(outputs, sf.plan))};
}

/// Loss for given raw recurrent outputs; the mask layer is applied here.
template <typename Scalar>
Scalar loss_from_recurrent(const Model<Scalar>& model, const Matrix<Scalar>& raw_outputs, const RoutingPlan& plan,
                           int label) {
    return head::cross_entropy(head::forward(model.params, head::apply_mask_layer(raw_outputs, plan)), label);
}

/// Positions selected by at least one plan in the batch.
inline std::vector<bool> active_positions(int t, std::span<const RoutingPlan* const> plans) {
    std::vector<bool> active(std::size_t(t), false);
    for (const RoutingPlan* plan : plans) {
        for (int p : plan->selected) active[std::size_t(p)] = true;
    }
    return active;
}

namespace detail {

inline void check_label(int label, const RACNetConfig& cfg) {
    if (label < 0 || label >= cfg.num_classes) throw Error("label " + std::to_string(label) + " out of range");
}

/// One sample through GRU, mask layer and head; accumulates gradients scaled by `weight`
/// and returns (loss, d loss / d features).
template <typename Scalar>
std::pair<Scalar, Matrix<Scalar>> sequence_backprop(const Parameters<Scalar>& p, const SequenceFeatures<Scalar>& sf,
                                                    int label, Scalar weight, Parameters<Scalar>& grads) {
    gru::Trace<Scalar> gtrace;
    const Matrix<Scalar> outputs = gru::forward(p, sf.features, &gtrace);
    head::Trace<Scalar> htrace;
    head::forward(p, head::apply_mask_layer(outputs, sf.plan), &htrace);
    const Scalar loss = head::cross_entropy(htrace.probabilities, label);
    const Matrix<Scalar> dmasked = head::backward(p, htrace, label, weight, grads, outputs.rows());
    const Matrix<Scalar> doutputs = head::apply_mask_layer(dmasked, sf.plan);
    return {loss, gru::backward(p, gtrace, doutputs, grads)};
}

}  // namespace detail

/// Mean cross-entropy over a batch of fixed features and its gradient (recurrent, dense and output layers).
template <typename Scalar>
Scalar batch_gradients(const Model<Scalar>& model, std::span<const LabeledFeatures<Scalar>> batch,
                       Parameters<Scalar>& grads) {
    if (batch.empty()) throw Error("empty training batch");
    grads = Parameters<Scalar>::zeros_like(model.params);
    const Scalar weight = Scalar(1) / Scalar(batch.size());
    Scalar loss = 0;
    for (const auto& sample : batch) {
        detail::check_label(sample.label, model.config());
        loss += detail::sequence_backprop(model.params, sample.features, sample.label, weight, grads).first;
    }
    return loss * weight;
}

/// One optimizer step on fixed features. Dense columns of positions no sample selects stay bit-identical.
template <typename Scalar>
Scalar train_step(Model<Scalar>& model, Adam<Scalar>& optimizer, std::span<const LabeledFeatures<Scalar>> batch,
                  double learning_rate) {
    Parameters<Scalar> grads;
    const Scalar loss = batch_gradients(model, batch, grads);
    if (!std::isfinite(double(loss))) throw NumericalError("training loss");
    std::vector<const RoutingPlan*> plans;
    for (const auto& s : batch) plans.push_back(&s.features.plan);
    optimizer.step(model.params, grads, active_positions(model.config().t, plans), learning_rate);
    return loss;
}

/// Mean cross-entropy and full gradient (encoder included) over a batch of prepared scans, in training mode:
/// batch-norm uses batch statistics over every slice of the batch and dropout is sampled from `rng`.
/// Running statistics are updated when `update_running_stats` is set.
template <typename Scalar>
Scalar scan_batch_gradients(Model<Scalar>& model, std::span<const PreparedScan<Scalar>* const> batch, Rng& rng,
                            Parameters<Scalar>& grads, bool update_running_stats = true) {
    if (batch.empty()) throw Error("empty training batch");
    const auto& cfg = model.config();
    const auto& p = model.params;
    grads = Parameters<Scalar>::zeros_like(p);

    Eigen::Index total = 0;
    for (const auto* scan : batch) {
        if (!scan->label) throw Error(scan->scan_id + ": training scan has no label");
        detail::check_label(*scan->label, cfg);
        total += Eigen::Index(scan->slices.size());
    }

    Matrix<Scalar> raw(total, cfg.feature_dim);
    Eigen::Index row = 0;
    for (const auto* scan : batch) {
        for (const auto& img : scan->slices) raw.row(row++) = encoder::forward(p, img).transpose();
    }

    batchnorm::Trace<Scalar> bn_trace;
    Vector<Scalar> mean, var;
    const Matrix<Scalar> normalized = batchnorm::forward_train(p, raw, Scalar(cfg.bn_epsilon), mean, var, bn_trace);
    if (update_running_stats) {
        const Scalar m = Scalar(cfg.bn_momentum);
        const Scalar unbias = total > 1 ? Scalar(total) / Scalar(total - 1) : Scalar(1);
        model.running_mean = (Scalar(1) - m) * model.running_mean + m * mean;
        model.running_var = (Scalar(1) - m) * model.running_var + m * unbias * var;
    }

    Matrix<Scalar> keep = Matrix<Scalar>::Ones(total, cfg.feature_dim);
    if (cfg.dropout_keep < 1.0) {
        const Scalar scale = Scalar(1.0 / cfg.dropout_keep);
        for (Eigen::Index j = 0; j < keep.cols(); ++j) {
            for (Eigen::Index i = 0; i < keep.rows(); ++i) keep(i, j) = rng.bernoulli(cfg.dropout_keep) ? scale : Scalar(0);
        }
    }
    const Matrix<Scalar> features = normalized.cwiseProduct(keep);

    const Scalar weight = Scalar(1) / Scalar(batch.size());
    Scalar loss = 0;
    Matrix<Scalar> dfeatures(total, cfg.feature_dim);
    row = 0;
    for (const auto* scan : batch) {
        const Eigen::Index l = Eigen::Index(scan->slices.size());
        const SequenceFeatures<Scalar> sf = place_features<Scalar>(features.middleRows(row, l), scan->plan);
        auto [sample_loss, dx] = detail::sequence_backprop(p, sf, *scan->label, weight, grads);
        loss += sample_loss;
        for (Eigen::Index i = 0; i < l; ++i) dfeatures.row(row + i) = dx.row(scan->plan.selected[std::size_t(i)]);
        row += l;
    }

    const Matrix<Scalar> draw = batchnorm::backward(p, bn_trace, Matrix<Scalar>(dfeatures.cwiseProduct(keep)), grads);
    row = 0;
    for (const auto* scan : batch) {
        for (const auto& img : scan->slices) {
            encoder::Trace<Scalar> trace;
            encoder::forward(p, img, &trace);
            encoder::backward(p, trace, Vector<Scalar>(draw.row(row++).transpose()), grads);
        }
    }
    return loss * weight;
}

/// One end-to-end optimizer step over prepared scans.
template <typename Scalar>
Scalar train_step(Model<Scalar>& model, Adam<Scalar>& optimizer, std::span<const PreparedScan<Scalar>* const> batch,
                  double learning_rate, Rng& rng) {
    Parameters<Scalar> grads;
    const Scalar loss = scan_batch_gradients(model, batch, rng, grads);
    if (!std::isfinite(double(loss))) throw NumericalError("training loss");
    std::vector<const RoutingPlan*> plans;
    for (const auto* s : batch) plans.push_back(&s->plan);
    optimizer.step(model.params, grads, active_positions(model.config().t, plans), learning_rate);
    return loss;
}

template <typename Scalar>
ClassifierOutput<Scalar> classify_scan(const PreparedScan<Scalar>& scan, const Model<Scalar>& model) {
    return forward(embed_and_sequence(scan, model), model);
}

template <typename Scalar>
ClassifierOutput<Scalar> classify_scan(const ScanVolume& volume, std::span<const Mask> masks,
                                       const Model<Scalar>& model) {
    return classify_scan(prepare_scan<Scalar>(volume, masks, model.config()), model);
}

}  // namespace ctscan::racnet
