#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "xsinc/errors.hpp"
#include "xsinc/rng.hpp"

namespace xsinc {

inline constexpr double kDefaultDurationFloor = 1.0 / 365.25;

// One external calibration measurement: a subject of known infection duration
// and their recency-assay outcome.
struct CalibrationRecord {
    double duration_years = 0.0;
    bool recent = false;
};

// Test-recent function phi(u): inverse-logit polynomial in log-duration below
// the cutoff, spliced to the constant tail frr_tail from the cutoff on.
// Durations below duration_floor are clamped before the log transform.
class TestRecentFunction {
public:
    TestRecentFunction(int degree, Eigen::VectorXd coefficients,
                       Eigen::MatrixXd coefficient_covariance, double frr_tail,
                       double cutoff, double duration_floor = kDefaultDurationFloor);

    int degree() const { return degree_; }
    const Eigen::VectorXd& coefficients() const { return coef_; }
    const Eigen::MatrixXd& coefficient_covariance() const { return cov_; }
    double frr_tail() const { return frr_tail_; }
    double cutoff() const { return cutoff_; }
    double duration_floor() const { return floor_; }

    // Polynomial basis (1, z, ..., z^degree) with z = log(max(u, floor)).
    Eigen::VectorXd basis(double u) const;
    // Pre-splice inverse-logit value; equals phi_eval below the cutoff.
    double core(double u) const;
    // d core / d theta at u.
    Eigen::VectorXd gradient(double u) const;

private:
    int degree_;
    Eigen::VectorXd coef_;
    Eigen::MatrixXd cov_;
    double frr_tail_;
    double cutoff_;
    double floor_;
};

// phi(u) with the constant false-recent tail applied at u >= cutoff.
double phi_eval(const TestRecentFunction& f, double u);

// Mean duration of recency: integral of phi over [0, cutoff].
double mdri(const TestRecentFunction& f);

// Integral of (1 - phi) over [0, t]; t must lie in [0, cutoff].
double residual_integral(const TestRecentFunction& f, double t);

// Integral of phi over [0, t] for t <= cutoff. residual_integral(f, t) is
// exactly t - omega_t(f, t), so omega_t(f, cutoff) == mdri(f) bit-for-bit.
double omega_t(const TestRecentFunction& f, double t);

// Covariance of the fitted curve at two durations: gradient' * Sigma * gradient.
double phi_cov(const TestRecentFunction& f, double u, double v);

// Integral of the gradient over [0, t]. The double covariance integral
// factorizes through this vector.
Eigen::VectorXd integrated_gradient(const TestRecentFunction& f, double t);

// Double integral of phi_cov over [0, t_i] x [0, t_j].
double double_cov_integral(const TestRecentFunction& f, double t_i, double t_j);

// Maximum-likelihood logit fit of `recent` on the polynomial log-duration
// basis, restricted to records with duration < cutoff. The coefficient
// covariance is the inverse observed information.
TestRecentFunction fit_phi(const std::vector<CalibrationRecord>& records, int degree,
                           double cutoff, double frr_tail,
                           double duration_floor = kDefaultDurationFloor);

// External calibration summary consumed by the estimators.
struct RitaCharacteristics {
    double mdri = 0.0;
    double mdri_variance = 0.0;
    double frr = 0.0;
    double frr_variance = 0.0;
    double cutoff = 0.0;

    void validate() const;
};

// Characteristics of a fitted curve: mdri plus its delta-method variance,
// with the false-recent rate supplied externally.
RitaCharacteristics characteristics_from_fit(const TestRecentFunction& f, double frr,
                                             double frr_variance);

// Availability and age of one prior HIV test; t is meaningful only when q.
struct PriorTest {
    bool q = false;
    double t = 0.0;
};

// Prior-test triple (availability, time since test, result).
struct PriorTriple {
    bool q = false;
    double t = 0.0;
    bool delta = false;
};

// Mean duration of recency for the prior-test-augmented algorithm:
// mdri(f) plus the average of q * 1(t <= cutoff) * residual_integral(f, t).
double pt_mdri(const TestRecentFunction& f, const std::vector<PriorTest>& prior_tests);

struct PtFrrEstimate {
    double estimate = 0.0;
    double mc_stderr = 0.0;
};

// Monte Carlo estimate of the augmented algorithm's false recent rate.
// duration_sampler must yield non-recent durations (u > cutoff); the testing
// sampler supplies (q, t, delta) given the duration.
PtFrrEstimate pt_frr_mc(const TestRecentFunction& f,
                        const std::function<double(CounterRng&)>& duration_sampler,
                        const std::function<PriorTriple(double, CounterRng&)>& testing_sampler,
                        long n_draws, std::uint64_t rng_seed);

} // namespace xsinc
