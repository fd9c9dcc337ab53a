#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xsinc/assay.hpp"
#include "xsinc/estimators.hpp"
#include "xsinc/simulate.hpp"

namespace xsinc {

// External calibration study layout: each subject is observed at every visit.
struct CalibrationDesign {
    long n_subjects = 60;
    std::vector<double> visit_grid;

    static std::vector<double> default_grid(double cutoff, int n_visits = 10);
};

enum class EstimatorVariant { standard, enhanced, enhanced_only_recent };

std::string variant_name(EstimatorVariant v);

struct ScenarioConfig {
    explicit ScenarioConfig(TestRecentFunction truth) : assay_truth(std::move(truth)) {}

    std::string name = "scenario";
    long sample_size = 0;
    long replicates = 0;
    EpidemicParams epidemic;
    TestRecentFunction assay_truth;
    double frr_stderr = 0.0; // sd of the external false-recent-rate estimate
    int fit_degree = 2;
    CalibrationDesign calibration;
    PriorTestingSpec prior_testing;
    std::optional<RecallBiasSpec> recall_bias;
    std::vector<EstimatorVariant> estimators;
    double level = 0.95;
    std::uint64_t seed = 1;
};

struct MetricsRow {
    std::string scenario;
    std::string estimator;
    long replicates_used = 0;
    long failures = 0;
    double bias = 0.0;
    double se = 0.0;
    double see = 0.0;
    double mse = 0.0;
    double coverage_pct = 0.0;
    double pct_mse_reduction = 0.0; // NaN when no standard row to compare with
    double realized_q_star = 0.0;
    std::string flags;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::string to_csv() const;
};

// Per-replicate estimator outputs, for optional export.
struct ReplicateEstimate {
    long replicate = 0;
    std::string estimator;
    bool failed = false;
    double lambda = 0.0;
    double variance = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

// Replicated study: per replicate, simulate calibration data, fit the
// test-recent curve, simulate a cross-section, and run every configured
// estimator with its analytical CI. Failed replicates are counted per
// estimator and excluded, never silently dropped. Worker count (default: all
// hardware threads, override with XSINC_WORKERS) never affects the result.
MetricsTable run_scenario(const ScenarioConfig& config,
                          std::vector<ReplicateEstimate>* per_replicate = nullptr);

double mse_reduction(double standard_mse, double enhanced_mse);

struct VarianceOracleReport {
    double empirical_var = 0.0;
    double mean_analytic_var = 0.0;
    double ratio = 0.0; // mean analytic over empirical
    long replicates_used = 0;
    long failures = 0;
};

// Monte Carlo check that the analytical variance tracks the sampling variance.
VarianceOracleReport oracle_variance_mc(const ScenarioConfig& config,
                                        EstimatorVariant variant);

struct PtMdriOracleReport {
    double mc_estimate = 0.0;
    double mc_stderr = 0.0;
    double formula_value = 0.0;
    double formula_stderr = 0.0;
    double diff = 0.0;
};

// Grid Monte Carlo estimate of the augmented algorithm's mean duration of
// recency versus the closed-form value on empirical prior-test draws.
PtMdriOracleReport oracle_pt_mdri_mc(const TestRecentFunction& f,
                                     const PriorTestingSpec& testing, long n_draws,
                                     std::uint64_t seed);

struct InverseSamplerReport {
    double max_abs_diff = 0.0;   // closed form vs bisection on shared variates
    double ks_statistic = 0.0;   // empirical draws vs target CDF
    double continuity_gap = 0.0; // two-sided probe at the branch threshold
};

InverseSamplerReport oracle_inverse_sampler(const EpidemicParams& params, long n_draws,
                                            std::uint64_t seed);

// Target CDF of the infection-duration draw (exposed for tests).
double infection_duration_cdf(const EpidemicParams& params, double u);

} // namespace xsinc
