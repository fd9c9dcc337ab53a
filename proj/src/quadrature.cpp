#include "xsinc/quadrature.hpp"

#include <map>
#include <mutex>
#include <utility>

#include "xsinc/errors.hpp"

namespace xsinc {

namespace {

// Newton on P_n with the three-term recurrence; nodes symmetric about zero.
std::pair<std::vector<double>, std::vector<double>> compute_gl(int n) {
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return {std::move(x), std::move(w)};
}

std::mutex g_mutex;
std::map<int, std::pair<std::vector<double>, std::vector<double>>> g_cache;

const std::pair<std::vector<double>, std::vector<double>>& cached(int n) {
    if (n < 1) throw DomainError("gauss_legendre: order must be positive");
    std::lock_guard<std::mutex> lock(g_mutex);
    auto it = g_cache.find(n);
    if (it == g_cache.end()) it = g_cache.emplace(n, compute_gl(n)).first;
    return it->second;
}

} // namespace

const std::vector<double>& gauss_legendre_nodes(int n) { return cached(n).first; }
const std::vector<double>& gauss_legendre_weights(int n) { return cached(n).second; }

} // namespace xsinc
