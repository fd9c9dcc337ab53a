#pragma once

#include <cmath>
#include <cstdint>

#include "xsinc/errors.hpp"
#include "xsinc/stats.hpp"

namespace xsinc {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}
} // namespace detail

// Counter-based generator: call k produces mix(key + k*gamma), so a stream is a
// pure function of its key and position. Substreams keyed by (seed, replicate,
// index) make simulation output independent of thread scheduling.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static CounterRng substream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t index) {
        std::uint64_t k = detail::mix64(seed + 0x243F6A8885A308D3ULL);
        k = detail::mix64(k ^ (replicate * 0xC2B2AE3D27D4EB4FULL + 0x452821E638D01377ULL));
        k = detail::mix64(k ^ (index * 0x165667B19E3779F9ULL + 0x13198A2E03707344ULL));
        return CounterRng(k);
    }

    std::uint64_t next_u64() {
        counter_ += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(key_ + counter_);
    }

    // Strictly inside (0,1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    bool bernoulli(double p) {
        if (p < 0.0 || p > 1.0) throw DomainError("bernoulli: p outside [0,1]");
        return uniform01() < p;
    }

    // Inverse-CDF draw; one variate consumed per call.
    double normal(double mean, double sd) {
        return mean + sd * normal_quantile(uniform01());
    }

    // Unit-scale gamma, Marsaglia-Tsang.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw DomainError("gamma: shape must be positive");
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform01(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal(0.0, 1.0);
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Density proportional to x^{d-1} exp(-(x/scale)^p).
    double generalized_gamma(double scale, double shape_d, double power_p) {
        if (!(scale > 0.0 && shape_d > 0.0 && power_p > 0.0))
            throw DomainError("generalized_gamma: parameters must be positive");
        return scale * std::pow(gamma(shape_d / power_p), 1.0 / power_p);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace xsinc
