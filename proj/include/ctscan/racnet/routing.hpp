#pragma once

#include "ctscan/error.hpp"
#include "ctscan/racnet/config.hpp"

#include <vector>

namespace ctscan::racnet {

/// The l positions of [0, t-1] that carry real slices, strictly increasing.
struct RoutingPlan {
    int t = 0;
    std::vector<int> selected;

    int length() const { return int(selected.size()); }

    /// Per-position flag, size t.
    std::vector<bool> membership() const {
        std::vector<bool> on(std::size_t(t), false);
        for (int p : selected) on[std::size_t(p)] = true;
        return on;
    }

    friend bool operator==(const RoutingPlan&, const RoutingPlan&) = default;
};

inline RoutingPlan plan_first_l(int t, int l) {
    if (l < 1 || l > t) throw BadLength(t, l);
    RoutingPlan plan{t, {}};
    plan.selected.reserve(std::size_t(l));
    for (int i = 0; i < l; ++i) plan.selected.push_back(i);
    return plan;
}

/// Equidistant positions round(i (t-1) / (l-1)), rounding half up; a collision moves to the next free slot.
inline RoutingPlan plan_aligned(int t, int l) {
    if (l < 1 || l > t) throw BadLength(t, l);
    RoutingPlan plan{t, {}};
    plan.selected.reserve(std::size_t(l));
    if (l == 1) {
        plan.selected.push_back(0);
        return plan;
    }
    const long span = long(t) - 1;
    const long den = long(l) - 1;
    for (long i = 0; i < l; ++i) {
        int p = int((2 * i * span + den) / (2 * den));
        if (!plan.selected.empty() && p <= plan.selected.back()) p = plan.selected.back() + 1;
        plan.selected.push_back(p);
    }
    return plan;
}

inline RoutingPlan make_plan(Routing routing, int t, int l) {
    return routing == Routing::FirstL ? plan_first_l(t, l) : plan_aligned(t, l);
}

}  // namespace ctscan::racnet
