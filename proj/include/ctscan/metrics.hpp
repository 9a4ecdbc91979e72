#pragma once

#include "ctscan/error.hpp"

#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ctscan::metrics {

struct ClassCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

/// One-vs-rest counts per class.
struct ConfusionCounts {
    std::vector<ClassCounts> classes;

    explicit ConfusionCounts(int num_classes = 2) : classes(std::size_t(num_classes)) {}

    int num_classes() const { return int(classes.size()); }

    void add(int truth, int predicted) {
        if (truth < 0 || truth >= num_classes() || predicted < 0 || predicted >= num_classes()) {
            throw Error("class index out of range in confusion counts");
        }
        if (truth == predicted) {
            ++classes[std::size_t(truth)].tp;
        } else {
            ++classes[std::size_t(predicted)].fp;
            ++classes[std::size_t(truth)].fn;
        }
    }

    static ConfusionCounts from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                            int num_classes) {
        if (truth.size() != predicted.size()) throw Error("truth and prediction lists differ in length");
        ConfusionCounts c(num_classes);
        for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
        return c;
    }
};

/// A ratio whose 0/0 case is reported as 0 and flagged.
struct Ratio {
    double value = 0.0;
    bool degenerate = false;
};

inline Ratio safe_ratio(long num, long den) {
    if (den == 0) return {0.0, true};
    return {double(num) / double(den), false};
}

inline Ratio precision(const ConfusionCounts& c, int cls) {
    const ClassCounts& k = c.classes.at(std::size_t(cls));
    return safe_ratio(k.tp, k.tp + k.fp);
}

inline Ratio sensitivity(const ConfusionCounts& c, int cls) {
    const ClassCounts& k = c.classes.at(std::size_t(cls));
    return safe_ratio(k.tp, k.tp + k.fn);
}

/// Harmonic mean of precision and recall; 0 when both are 0.
template <typename Scalar>
Scalar f1(Scalar precision, Scalar recall) {
    const Scalar sum = precision + recall;
    if (sum == Scalar(0)) return Scalar(0);
    return Scalar(2) * precision * recall / sum;
}

template <typename Scalar>
Scalar macro_f1(std::span<const Scalar> per_class) {
    if (per_class.empty()) throw Error("macro_f1 of an empty list");
    return std::accumulate(per_class.begin(), per_class.end(), Scalar(0)) / Scalar(per_class.size());
}

struct ClassReport {
    std::string name;
    Ratio precision;
    Ratio sensitivity;
    double f1 = 0.0;
    bool degenerate = false;  // any 0/0 along the way
};

struct EvaluationReport {
    std::vector<ClassReport> classes;
    double macro_f1 = 0.0;
    long samples = 0;
};

EvaluationReport evaluate(const ConfusionCounts& counts, const std::vector<std::string>& class_names);

/// Structured text, scores in percent with two decimals.
std::string format_report(const EvaluationReport& report);

}  // namespace ctscan::metrics
