#include "xsinc/presets.hpp"

#include <cmath>

namespace xsinc::presets {

namespace {

constexpr double kCutoff = 2.0;
constexpr double kFrr = 0.014;
constexpr double kFrrStderr = 0.0025;
constexpr long kSampleSize = 5000;
constexpr long kCalibrationSubjects = 60;

PriorTestingSpec uniform_testing(double q, double a, double b) {
    PriorTestingSpec spec;
    spec.mechanism = PriorTestingSpec::Mechanism::uniform;
    spec.q = q;
    spec.a = a;
    spec.b = b;
    return spec;
}

ScenarioConfig base_config(std::uint64_t seed) {
    ScenarioConfig cfg(benchmark_assay());
    cfg.sample_size = kSampleSize;
    cfg.epidemic = benchmark_epidemic();
    cfg.frr_stderr = kFrrStderr;
    cfg.fit_degree = 2;
    cfg.calibration.n_subjects = kCalibrationSubjects;
    cfg.calibration.visit_grid = CalibrationDesign::default_grid(kCutoff);
    cfg.estimators = {EstimatorVariant::standard, EstimatorVariant::enhanced};
    cfg.seed = seed;
    return cfg;
}

} // namespace

TestRecentFunction benchmark_assay() {
    Eigen::VectorXd coef(3);
    coef << -3.4110197550, -1.4464031954, 0.3309189915;
    return TestRecentFunction(2, coef, Eigen::MatrixXd::Zero(3, 3), kFrr, kCutoff);
}

EpidemicParams benchmark_epidemic(double rho) {
    EpidemicParams params;
    params.lambda = 0.032;
    params.prevalence = 0.29;
    params.rho = rho;
    params.cutoff = kCutoff;
    return params;
}

ScenarioConfig efficiency_scenario(double q, double a, double b, long replicates,
                                   std::uint64_t seed) {
    ScenarioConfig cfg = base_config(seed);
    cfg.name = "uniform_a" + std::to_string(a).substr(0, 3) + "_b" +
               std::to_string(b).substr(0, 3) + "_q" + std::to_string(q).substr(0, 4);
    cfg.replicates = replicates;
    cfg.prior_testing = uniform_testing(q, a, b);
    return cfg;
}

ScenarioConfig dependent_testing_scenario(double q, long replicates, std::uint64_t seed) {
    ScenarioConfig cfg = base_config(seed);
    cfg.name = "dependent_testing_q" + std::to_string(q).substr(0, 4);
    cfg.replicates = replicates;
    cfg.prior_testing.mechanism = PriorTestingSpec::Mechanism::mixed;
    cfg.prior_testing.q_prime = q;
    cfg.prior_testing.a_prime = 0.0;
    cfg.prior_testing.b_prime = 4.0;
    // Illustrative infection-to-test delay (median about 5.1 years with a long
    // right tail), scaled so roughly 63% of positives end up with a usable
    // test when the background arm holds 25%.
    cfg.prior_testing.delay = {8.354192, 0.75, 0.75};
    return cfg;
}

ScenarioConfig recall_bias_scenario(const RecallBiasSpec& bias, long replicates,
                                    std::uint64_t seed) {
    ScenarioConfig cfg = base_config(seed);
    cfg.name = "recall_bias";
    cfg.replicates = replicates;
    cfg.prior_testing = uniform_testing(0.5, 0.0, 4.0);
    cfg.recall_bias = bias;
    return cfg;
}

ScenarioConfig piecewise_incidence_scenario(double b, long replicates, std::uint64_t seed) {
    ScenarioConfig cfg = base_config(seed);
    cfg.name = "piecewise_b" + std::to_string(b).substr(0, 4);
    cfg.replicates = replicates;
    cfg.epidemic = benchmark_epidemic(0.0039);
    cfg.prior_testing = uniform_testing(0.5, 0.0, b);
    cfg.estimators = {EstimatorVariant::standard, EstimatorVariant::enhanced,
                      EstimatorVariant::enhanced_only_recent};
    return cfg;
}

std::vector<ScenarioConfig> reproduction_suite(long replicates, std::uint64_t seed) {
    std::vector<ScenarioConfig> suite;
    for (double q : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        suite.push_back(efficiency_scenario(q, 0.0, 2.0, replicates, seed));
        suite.push_back(efficiency_scenario(q, 0.0, 4.0, replicates, seed));
        suite.push_back(efficiency_scenario(q, 2.0, 4.0, replicates, seed));
    }
    for (double q : {0.25, 0.5, 0.75}) {
        suite.push_back(efficiency_scenario(q, 0.0, 4.0, replicates, seed));
        suite.back().name = "base_q" + std::to_string(q).substr(0, 4);
        suite.push_back(dependent_testing_scenario(q, replicates, seed));
    }
    for (double sd : {1.0 / 12.0, 0.5}) {
        RecallBiasSpec bias;
        bias.time_jitter_sd = sd;
        suite.push_back(recall_bias_scenario(bias, replicates, seed));
        suite.back().name = "recall_jitter_" + std::to_string(sd).substr(0, 4);
    }
    {
        RecallBiasSpec bias;
        bias.nonreport_positive_prob = 0.1;
        suite.push_back(recall_bias_scenario(bias, replicates, seed));
        suite.back().name = "recall_nonreport";
        bias = RecallBiasSpec{};
        bias.flip_positive_prob = 0.1;
        suite.push_back(recall_bias_scenario(bias, replicates, seed));
        suite.back().name = "recall_flip";
    }
    suite.push_back(piecewise_incidence_scenario(4.0, replicates, seed));
    suite.push_back(piecewise_incidence_scenario(12.0, replicates, seed));
    return suite;
}

} // namespace xsinc::presets
