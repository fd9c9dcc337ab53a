#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "xsinc/assay.hpp"
#include "xsinc/estimators.hpp"
#include "xsinc/rng.hpp"

namespace xsinc {

// Epidemic state at the survey time. Incidence is lambda at the survey and
// grows linearly at slope rho for times more than `cutoff` before it.
struct EpidemicParams {
    double lambda = 0.0;
    double prevalence = 0.0;
    double rho = 0.0;
    double cutoff = 0.0;
    double t_cs = 0.0;

    void validate() const;
};

// Largest infection duration consistent with the prevalence constraint:
// positive root of (rho/2) c^2 + c (lambda - rho*cutoff) = p/(1-p), which for
// rho = 0 is p / (lambda (1-p)).
double solve_ct(const EpidemicParams& params);

// Uniform-variate threshold separating the constant branch (e above) from the
// linear branch (e below).
double uniform_branch_threshold(const EpidemicParams& params);

// Closed-form inverse sampling of the infection duration; strictly decreasing
// in e with value exactly `cutoff` at the branch threshold.
double draw_infection_duration(const EpidemicParams& params, double e);

bool draw_recency_result(const TestRecentFunction& f, double u, CounterRng& rng);

struct GeneralizedGammaParams {
    double scale = 1.0;
    double shape_d = 1.0;
    double power_p = 1.0;
};

// How prior HIV tests arise.
//   uniform:          availability q, test age Uniform[a, b], independent of
//                     infection duration.
//   infection_driven: a test prompted by the infection, taken a random delay E
//                     after infection (test age u - E; negative means not yet
//                     taken, so no result).
//   mixed:            a background Uniform(a', b') test held with probability
//                     q', combined with the infection-driven test by taking
//                     the most recent one available.
struct PriorTestingSpec {
    enum class Mechanism { uniform, infection_driven, mixed };
    Mechanism mechanism = Mechanism::uniform;
    double q = 0.0;
    double a = 0.0;
    double b = 0.0;
    double q_prime = 0.0;
    double a_prime = 0.0;
    double b_prime = 0.0;
    GeneralizedGammaParams delay;

    void validate(double tau) const;
};

PriorTriple draw_prior_test_uniform(const PriorTestingSpec& spec, double u, CounterRng& rng);

// Infection-driven / mixed mechanism. Deliberately couples (q, t) to the
// infection duration.
PriorTriple draw_prior_test_infection_driven(const PriorTestingSpec& spec, double u,
                                             CounterRng& rng);

// Reporting error on a prior-test triple: jitter on the reported time
// (clamped at zero), non-reporting of a positive prior test, and flipping a
// positive prior result to negative, applied in that order.
struct RecallBiasSpec {
    double time_jitter_sd = 0.0;
    double nonreport_positive_prob = 0.0;
    double flip_positive_prob = 0.0;

    void validate() const;
};

PriorTriple apply_recall_bias(const PriorTriple& triple, const RecallBiasSpec& spec,
                              CounterRng& rng);

// Full synthetic cross-section. Individual i draws from the substream
// (seed, replicate, i), so output is reproducible and order-independent.
Sample simulate_cross_section(long n, const EpidemicParams& params,
                              const TestRecentFunction& truth,
                              const PriorTestingSpec& testing,
                              const std::optional<RecallBiasSpec>& bias,
                              std::uint64_t seed, std::uint64_t replicate = 0);

// External calibration data: every subject is measured at each visit duration,
// with outcomes Bernoulli(truth(u)).
std::vector<CalibrationRecord> simulate_calibration_dataset(
    const TestRecentFunction& truth, long n_subjects, const std::vector<double>& visit_grid,
    std::uint64_t seed);

} // namespace xsinc
