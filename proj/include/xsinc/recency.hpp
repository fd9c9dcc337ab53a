#pragma once

#include <optional>

#include "xsinc/errors.hpp"

namespace xsinc {

// Recency classification combining a lab result r with one prior HIV test.
// With a = q*1(t <= cutoff) and b = q*1(t >= cutoff):
//
//   r_pt = r*(1 - b*delta) + (1-r)*a*(1-delta)
//
// i.e. a positive prior test taken at least `cutoff` ago removes a lab-recent
// subject, and a negative prior test within `cutoff` adds a lab-non-recent one.
inline bool pt_recency_indicator(bool r, bool q, std::optional<double> t,
                                 std::optional<bool> delta, double cutoff) {
    if (q && (!t.has_value() || !delta.has_value()))
        throw DomainError("pt_recency_indicator: prior test time/result missing with q=1");
    if (!q) return r;
    const bool a = *t <= cutoff;
    const bool b = *t >= cutoff;
    const bool d = *delta;
    if (r) return !(b && d);
    return a && !d;
}

} // namespace xsinc
