#include "xsinc/assay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xsinc/quadrature.hpp"
#include "xsinc/recency.hpp"

namespace xsinc {

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TestRecentFunction::TestRecentFunction(int degree, Eigen::VectorXd coefficients,
                                       Eigen::MatrixXd coefficient_covariance,
                                       double frr_tail, double cutoff,
                                       double duration_floor)
    : degree_(degree),
      coef_(std::move(coefficients)),
      cov_(std::move(coefficient_covariance)),
      frr_tail_(frr_tail),
      cutoff_(cutoff),
      floor_(duration_floor) {
    if (degree_ < 0) throw DomainError("TestRecentFunction: negative degree");
    if (coef_.size() != degree_ + 1)
        throw DomainError("TestRecentFunction: coefficient length != degree+1");
    if (cov_.rows() != degree_ + 1 || cov_.cols() != degree_ + 1)
        throw DomainError("TestRecentFunction: covariance shape mismatch");
    if (!cov_.isApprox(cov_.transpose(), 1e-12))
        throw DomainError("TestRecentFunction: covariance not symmetric");
    for (int i = 0; i <= degree_; ++i)
        if (cov_(i, i) < 0.0) throw DomainError("TestRecentFunction: negative variance");
    if (!(frr_tail_ >= 0.0 && frr_tail_ <= 1.0))
        throw DomainError("TestRecentFunction: frr_tail outside [0,1]");
    if (!(cutoff_ > 0.0)) throw DomainError("TestRecentFunction: cutoff must be positive");
    if (!(floor_ > 0.0)) throw DomainError("TestRecentFunction: duration_floor must be positive");
    cov_ = 0.5 * (cov_ + cov_.transpose().eval());
}

Eigen::VectorXd TestRecentFunction::basis(double u) const {
    const double z = std::log(std::max(u, floor_));
    Eigen::VectorXd x(degree_ + 1);
    double zp = 1.0;
    for (int k = 0; k <= degree_; ++k) {
        x[k] = zp;
        zp *= z;
    }
    return x;
}

double TestRecentFunction::core(double u) const {
    return expit(coef_.dot(basis(u)));
}

Eigen::VectorXd TestRecentFunction::gradient(double u) const {
    const double ph = core(u);
    return ph * (1.0 - ph) * basis(u);
}

double phi_eval(const TestRecentFunction& f, double u) {
    if (u < 0.0) throw DomainError("phi_eval: negative duration");
    if (u >= f.cutoff()) return f.frr_tail();
    return f.core(u);
}

double omega_t(const TestRecentFunction& f, double t) {
    if (t < 0.0 || t > f.cutoff()) throw DomainError("omega_t: t outside [0, cutoff]");
    const double fl = f.duration_floor();
    // Below the floor the integrand is constant in u.
    if (t <= fl) return t * f.core(fl);
    const double head = fl * f.core(fl);
    return head + adaptive_simpson([&](double u) { return f.core(u); }, fl, t);
}

double mdri(const TestRecentFunction& f) { return omega_t(f, f.cutoff()); }

double residual_integral(const TestRecentFunction& f, double t) {
    if (t < 0.0 || t > f.cutoff())
        throw DomainError("residual_integral: t outside [0, cutoff]");
    return t - omega_t(f, t);
}

double phi_cov(const TestRecentFunction& f, double u, double v) {
    if (u < 0.0 || u > f.cutoff() || v < 0.0 || v > f.cutoff())
        throw DomainError("phi_cov: arguments outside [0, cutoff]");
    return f.gradient(u).dot(f.coefficient_covariance() * f.gradient(v));
}

Eigen::VectorXd integrated_gradient(const TestRecentFunction& f, double t) {
    if (t < 0.0 || t > f.cutoff())
        throw DomainError("integrated_gradient: t outside [0, cutoff]");
    const double fl = f.duration_floor();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.degree() + 1);
    if (t <= fl) return t * f.gradient(fl);
    g = fl * f.gradient(fl);
    const auto& x = gauss_legendre_nodes(kGaussLegendreOrder);
    const auto& w = gauss_legendre_weights(kGaussLegendreOrder);
    const double h = 0.5 * (t - fl);
    const double c = 0.5 * (t + fl);
    for (int i = 0; i < kGaussLegendreOrder; ++i)
        g += (h * w[i]) * f.gradient(c + h * x[i]);
    return g;
}

double double_cov_integral(const TestRecentFunction& f, double t_i, double t_j) {
    if (t_i < 0.0 || t_i > f.cutoff() || t_j < 0.0 || t_j > f.cutoff())
        throw DomainError("double_cov_integral: arguments outside [0, cutoff]");
    // Tensor-product Gauss-Legendre factorizes through the integrated gradient.
    const Eigen::VectorXd gi = integrated_gradient(f, t_i);
    const Eigen::VectorXd gj = integrated_gradient(f, t_j);
    return gi.dot(f.coefficient_covariance() * gj);
}

TestRecentFunction fit_phi(const std::vector<CalibrationRecord>& records, int degree,
                           double cutoff, double frr_tail, double duration_floor) {
    if (degree < 0) throw DomainError("fit_phi: negative degree");
    if (!(cutoff > 0.0)) throw DomainError("fit_phi: cutoff must be positive");

    std::vector<double> z;
    std::vector<double> y;
    long ones = 0;
    for (const auto& rec : records) {
        if (!(rec.duration_years > 0.0))
            throw DomainError("fit_phi: calibration duration must be positive");
        if (rec.duration_years >= cutoff) continue;
        z.push_back(std::log(std::max(rec.duration_years, duration_floor)));
        y.push_back(rec.recent ? 1.0 : 0.0);
        ones += rec.recent ? 1 : 0;
    }
    const long n = static_cast<long>(z.size());
    if (n < degree + 2)
        throw EstimationError("fit_phi: fewer than degree+2 records below the cutoff");
    if (ones == 0 || ones == n)
        throw EstimationError("fit_phi: calibration outcomes are single-class");

    const int p = degree + 1;
    Eigen::MatrixXd X(n, p);
    for (long i = 0; i < n; ++i) {
        double zp = 1.0;
        for (int k = 0; k < p; ++k) {
            X(i, k) = zp;
            zp *= z[i];
        }
    }
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

    // Newton iterations with deviance-based stopping.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    double dev_old = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd info(p, p);
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd eta = X * theta;
        Eigen::VectorXd mu = eta.unaryExpr([](double v) { return expit(v); });
        Eigen::VectorXd wgt = mu.array() * (1.0 - mu.array());
        info = X.transpose() * wgt.asDiagonal() * X;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            throw EstimationError("fit_phi: singular information matrix");
        const Eigen::VectorXd step = ldlt.solve(X.transpose() * (yv - mu));
        if (!step.allFinite())
            throw EstimationError("fit_phi: non-finite update (separation suspected)");
        theta += step;

        double dev = 0.0;
        eta = X * theta;
        for (long i = 0; i < n; ++i) {
            const double m = std::clamp(expit(eta[i]), 1e-300, 1.0 - 1e-16);
            dev -= 2.0 * (y[i] * std::log(m) + (1.0 - y[i]) * std::log1p(-m));
        }
        if (std::abs(dev - dev_old) < 1e-10 * (std::abs(dev) + 0.1)) {
            converged = true;
            break;
        }
        dev_old = dev;
    }
    if (!converged)
        throw EstimationError("fit_phi: no convergence in 100 iterations (separation suspected)");

    // Observed information at the final coefficients.
    Eigen::VectorXd mu = (X * theta).unaryExpr([](double v) { return expit(v); });
    Eigen::VectorXd wgt = mu.array() * (1.0 - mu.array());
    info = X.transpose() * wgt.asDiagonal() * X;
    Eigen::MatrixXd cov = Eigen::LDLT<Eigen::MatrixXd>(info).solve(
        Eigen::MatrixXd::Identity(p, p));
    if (!cov.allFinite())
        throw EstimationError("fit_phi: covariance not finite (separation suspected)");
    cov = 0.5 * (cov + cov.transpose().eval());

    return TestRecentFunction(degree, theta, cov, frr_tail, cutoff, duration_floor);
}

void RitaCharacteristics::validate() const {
    if (!(cutoff > 0.0)) throw DomainError("RitaCharacteristics: cutoff must be positive");
    if (mdri < 0.0 || mdri > cutoff)
        throw DomainError("RitaCharacteristics: mdri outside [0, cutoff]");
    if (frr < 0.0 || frr > 1.0) throw DomainError("RitaCharacteristics: frr outside [0,1]");
    if (mdri_variance < 0.0 || frr_variance < 0.0)
        throw DomainError("RitaCharacteristics: negative variance");
}

RitaCharacteristics characteristics_from_fit(const TestRecentFunction& f, double frr,
                                             double frr_variance) {
    RitaCharacteristics c;
    c.mdri = mdri(f);
    c.mdri_variance = double_cov_integral(f, f.cutoff(), f.cutoff());
    c.frr = frr;
    c.frr_variance = frr_variance;
    c.cutoff = f.cutoff();
    c.validate();
    return c;
}

double pt_mdri(const TestRecentFunction& f, const std::vector<PriorTest>& prior_tests) {
    const double omega = mdri(f);
    if (prior_tests.empty()) return omega;
    double s = 0.0;
    for (const auto& pt : prior_tests) {
        if (!pt.q) continue;
        if (!(pt.t >= 0.0) || !std::isfinite(pt.t))
            throw DomainError("pt_mdri: prior test time must be finite and nonnegative");
        if (pt.t <= f.cutoff()) s += residual_integral(f, pt.t);
    }
    return omega + s / static_cast<double>(prior_tests.size());
}

PtFrrEstimate pt_frr_mc(const TestRecentFunction& f,
                        const std::function<double(CounterRng&)>& duration_sampler,
                        const std::function<PriorTriple(double, CounterRng&)>& testing_sampler,
                        long n_draws, std::uint64_t rng_seed) {
    if (n_draws < 1000) throw DomainError("pt_frr_mc: n_draws must be at least 1000");
    long hits = 0;
    for (long i = 0; i < n_draws; ++i) {
        CounterRng rng = CounterRng::substream(rng_seed, 0, static_cast<std::uint64_t>(i));
        const double u = duration_sampler(rng);
        if (!(u > f.cutoff()))
            throw DomainError("pt_frr_mc: duration sampler yielded u <= cutoff");
        const bool r = rng.bernoulli(f.frr_tail());
        const PriorTriple pt = testing_sampler(u, rng);
        const bool rpt = pt.q ? pt_recency_indicator(r, true, pt.t, pt.delta, f.cutoff())
                              : r;
        hits += rpt ? 1 : 0;
    }
    PtFrrEstimate out;
    out.estimate = static_cast<double>(hits) / static_cast<double>(n_draws);
    out.mc_stderr =
        std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(n_draws));
    return out;
}

} // namespace xsinc
