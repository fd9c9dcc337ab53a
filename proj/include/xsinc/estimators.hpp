#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "xsinc/assay.hpp"
#include "xsinc/recency.hpp"

namespace xsinc {

// One cross-sectional subject. The assay result is present exactly for the
// HIV-positive; prior-test fields are present exactly when has_prior.
struct CrossSectionRecord {
    bool hiv_positive = false;
    std::optional<bool> rita_recent;
    bool has_prior = false;
    std::optional<double> prior_time;
    std::optional<bool> prior_result;
};

class Sample {
public:
    Sample(std::vector<CrossSectionRecord> records, double tau);

    const std::vector<CrossSectionRecord>& records() const { return records_; }
    double tau() const { return tau_; }
    long n() const { return n_; }
    long n_pos() const { return n_pos_; }
    long n_neg() const { return n_ - n_pos_; }
    long n_rec() const { return n_rec_; }
    long n_rec_pt(double cutoff) const;

private:
    std::vector<CrossSectionRecord> records_;
    double tau_;
    long n_ = 0;
    long n_pos_ = 0;
    long n_rec_ = 0;
};

// Copy with every prior test removed; reduces the enhanced estimator to the
// standard one.
Sample strip_prior_tests(const Sample& sample);

// Copy with prior tests older than the cutoff removed ("only recent" use).
Sample drop_nonrecent_prior_tests(const Sample& sample, double cutoff);

enum class EstimateMethod { standard, enhanced };

struct IncidenceEstimate {
    double lambda = 0.0;
    double variance = 0.0;
    double var_log_lambda = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    EstimateMethod method = EstimateMethod::enhanced;
    bool dropped_nonrecent_singleton = false;
    bool variance_clamped = false;
    bool wald_fallback = false;

    std::string flags() const;
};

// Adjusted count-based estimator: (n_rec - n_pos*frr) / (n_neg*(mdri - frr*cutoff)).
double standard_estimate(long n_rec, long n_pos, long n_neg,
                         const RitaCharacteristics& chars);

// Point estimate of the prior-test-augmented estimator (no variance/CI).
IncidenceEstimate enhanced_estimate(const Sample& sample, const TestRecentFunction& f,
                                    const RitaCharacteristics& chars);

// Empirical moments feeding the analytical variance. Group A holds positives
// whose prior test is at most `cutoff` old, group B the rest with a prior test
// (a tie at the cutoff counts as A only).
struct PlugInMoments {
    double p = 0.0;            // prevalence
    double P_rec = 0.0;        // lab-recent fraction among positives
    double P_rec_pt = 0.0;     // augmented-recent fraction among positives
    double P_A = 0.0, P_B = 0.0;
    double mu_TA = 0.0, sigma2_TA = 0.0;
    double mu_TB = 0.0, sigma2_TB = 0.0;
    double omega_TA = 0.0, sigma2_omega_TA = 0.0, omega_star_TA = 0.0;
    double r_TA = 0.0, r_prime_TA = 0.0, r_star_TA = 0.0;
    long n_A = 0, n_B = 0;
};

PlugInMoments plug_in_moments(const Sample& sample, const TestRecentFunction& f);

// Means and covariance of the five statistics
//   W1 = n_rec_pt - frr * (n_pos - n_B)
//   W2 = n_pos
//   W3 = mdri - frr * cutoff
//   W4 = sum over A of (T_i - integral of fitted phi to T_i)
//   W5 = frr * sum over B of T_i
// through which the estimator is lambda = W1 / ((N - W2)(W3 + (W4+W5)/W2)).
struct WMoments {
    Eigen::Matrix<double, 5, 1> mean = Eigen::Matrix<double, 5, 1>::Zero();
    Eigen::Matrix<double, 5, 5> covariance = Eigen::Matrix<double, 5, 5>::Zero();
};

WMoments w_moments(const PlugInMoments& m, const RitaCharacteristics& chars, long n_total);

// Gradient of log lambda in the five W-means.
Eigen::Matrix<double, 5, 1> log_lambda_gradient(const WMoments& w, long n_total);

struct DeltaVariance {
    double var_log_lambda = 0.0;
    double var_lambda = 0.0;
    double lambda = 0.0;
    bool clamped = false; // negative quadratic form clamped to zero
};

DeltaVariance delta_method_variance(const WMoments& w, long n_total);

// Point estimate, delta-method variance, and a two-sided CI on the log scale
// (plain Wald when the point estimate is nonpositive). When exactly one
// positive carries a prior test older than the cutoff, that single prior test
// is dropped first: the group-B sample variance is undefined with one member.
IncidenceEstimate estimate_with_ci(const Sample& sample, const TestRecentFunction& f,
                                   const RitaCharacteristics& chars, double level);

// Same machinery on the prior-test-stripped sample.
IncidenceEstimate standard_estimate_with_ci(const Sample& sample,
                                            const TestRecentFunction& f,
                                            const RitaCharacteristics& chars,
                                            double level);

// Mean shadow period: under incidence changing linearly in time, the estimator
// is consistent for incidence this long before the survey.
double shadow_period(const TestRecentFunction& f, const RitaCharacteristics& chars,
                     const std::vector<PriorTest>& prior_tests);

} // namespace xsinc
