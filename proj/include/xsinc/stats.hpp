#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace xsinc {

// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley refinement step; good to ~1e-15 over (0,1)).
double normal_quantile(double p);

double normal_cdf(double x);

inline double mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Sample variance with n-1 denominator; 0 for fewer than two values.
inline double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

// Compensated accumulator for long metric sums.
class KahanSum {
public:
    void add(double v) {
        const double y = v - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

} // namespace xsinc
