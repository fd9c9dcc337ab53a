#pragma once

#include "xsinc/harness.hpp"

namespace xsinc::presets {

// Assay with a 98/365.25-year mean duration of recency, 1.4% false recent
// rate, and a two-year cutoff. Degree-2 coefficients solved so the curve
// integrates to the target and meets the tail level at the cutoff.
TestRecentFunction benchmark_assay();

// Epidemic at 0.032 cases per person-year and 29% prevalence; pass rho > 0 for
// the piecewise (constant-then-linear) incidence history.
EpidemicParams benchmark_epidemic(double rho = 0.0);

// Baseline replicated study: uniform prior testing on [a, b] held with
// probability q, standard + enhanced estimators.
ScenarioConfig efficiency_scenario(double q, double a, double b, long replicates,
                                   std::uint64_t seed);

// Uniform testing plus an infection-prompted test (most recent one wins).
ScenarioConfig dependent_testing_scenario(double q, long replicates, std::uint64_t seed);

// Self-report error layered on the uniform mechanism.
ScenarioConfig recall_bias_scenario(const RecallBiasSpec& bias, long replicates,
                                    std::uint64_t seed);

// Piecewise incidence with prior tests reaching back `b` years; runs the
// enhanced estimator with and without non-recent tests.
ScenarioConfig piecewise_incidence_scenario(double b, long replicates, std::uint64_t seed);

// The full reproduction suite at the given replicate count.
std::vector<ScenarioConfig> reproduction_suite(long replicates, std::uint64_t seed);

} // namespace xsinc::presets
