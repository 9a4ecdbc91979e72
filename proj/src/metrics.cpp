#include "ctscan/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace ctscan::metrics {

EvaluationReport evaluate(const ConfusionCounts& counts, const std::vector<std::string>& class_names) {
    EvaluationReport report;
    std::vector<double> f1s;
    for (int c = 0; c < counts.num_classes(); ++c) {
        ClassReport r;
        r.name = std::size_t(c) < class_names.size() ? class_names[std::size_t(c)] : "class" + std::to_string(c);
        r.precision = precision(counts, c);
        r.sensitivity = sensitivity(counts, c);
        r.f1 = f1(r.precision.value, r.sensitivity.value);
        r.degenerate = r.precision.degenerate || r.sensitivity.degenerate ||
                       (r.precision.value + r.sensitivity.value == 0.0);
        f1s.push_back(r.f1);
        report.samples += counts.classes[std::size_t(c)].tp + counts.classes[std::size_t(c)].fn;
        report.classes.push_back(std::move(r));
    }
    report.macro_f1 = macro_f1<double>(f1s);
    return report;
}

std::string format_report(const EvaluationReport& report) {
    std::ostringstream out;
    char buf[64];
    auto pct = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
        return std::string(buf);
    };
    out << "[summary]\n";
    out << "samples = " << report.samples << '\n';
    out << "macro_f1 = " << pct(report.macro_f1) << '\n';
    for (const auto& c : report.classes) {
        out << "\n[class." << c.name << "]\n";
        out << "precision = " << pct(c.precision.value) << '\n';
        out << "sensitivity = " << pct(c.sensitivity.value) << '\n';
        out << "f1 = " << pct(c.f1) << '\n';
        out << "degenerate = " << (c.degenerate ? "true" : "false") << '\n';
    }
    return out.str();
}

}  // namespace ctscan::metrics
