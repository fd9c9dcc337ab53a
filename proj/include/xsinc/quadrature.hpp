#pragma once

#include <cmath>
#include <vector>

namespace xsinc {

// Nodes/weights on [-1,1]; cached per order.
const std::vector<double>& gauss_legendre_nodes(int n);
const std::vector<double>& gauss_legendre_weights(int n);

inline constexpr int kGaussLegendreOrder = 64;
inline constexpr double kSimpsonTol = 1e-9;

namespace detail {

template <class F>
double simpson(const F& f, double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b, double fb,
                            double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(f, a, fa, m, fm, flm);
    const double right = simpson(f, m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace detail

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = kSimpsonTol,
                        int max_depth = 48) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = detail::simpson(f, a, fa, b, fb, fm);
    return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

template <class F>
double gauss_legendre(const F& f, double a, double b, int n = kGaussLegendreOrder) {
    const auto& x = gauss_legendre_nodes(n);
    const auto& w = gauss_legendre_weights(n);
    const double h = 0.5 * (b - a);
    const double c = 0.5 * (a + b);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * f(c + h * x[i]);
    return h * s;
}

} // namespace xsinc
