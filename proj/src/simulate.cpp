#include "xsinc/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace xsinc {

void EpidemicParams::validate() const {
    if (!(lambda > 0.0)) throw DomainError("EpidemicParams: lambda must be positive");
    if (!(prevalence > 0.0 && prevalence < 1.0))
        throw DomainError("EpidemicParams: prevalence outside (0,1)");
    if (rho < 0.0) throw DomainError("EpidemicParams: rho must be nonnegative");
    if (!(cutoff > 0.0)) throw DomainError("EpidemicParams: cutoff must be positive");
}

double solve_ct(const EpidemicParams& params) {
    params.validate();
    const double rhs = params.prevalence / (1.0 - params.prevalence);
    if (params.rho == 0.0) return rhs / params.lambda;
    const double b = params.lambda - params.rho * params.cutoff;
    const double disc = b * b + 2.0 * params.rho * rhs;
    if (!(disc >= 0.0)) throw DomainError("solve_ct: no positive root");
    // Stable positive root of (rho/2) c^2 + b c - rhs = 0.
    const double root = (b >= 0.0) ? 2.0 * rhs / (std::sqrt(disc) + b)
                                   : (std::sqrt(disc) - b) / params.rho;
    if (!(root > 0.0)) throw DomainError("solve_ct: no positive root");
    return root;
}

double uniform_branch_threshold(const EpidemicParams& params) {
    params.validate();
    const double es =
        1.0 - params.lambda * params.cutoff * (1.0 - params.prevalence) / params.prevalence;
    if (!(es > 0.0))
        throw DomainError("uniform_branch_threshold: cutoff mass exceeds prevalence constraint");
    return es;
}

double draw_infection_duration(const EpidemicParams& params, double e) {
    params.validate();
    if (!(e > 0.0 && e < 1.0))
        throw DomainError("draw_infection_duration: e outside (0,1)");
    const double p = params.prevalence;
    const double lam = params.lambda;
    const double e_star = uniform_branch_threshold(params);
    if (e == e_star) return params.cutoff; // both branches meet here exactly
    if (params.rho == 0.0 || e > e_star)
        return p * (1.0 - e) / (lam * (1.0 - p));
    // Linear branch; form chosen to stay stable as rho -> 0.
    const double excess = p * (1.0 - e) / (1.0 - p) - lam * params.cutoff;
    const double disc = lam * lam + 2.0 * params.rho * excess;
    if (!(disc >= 0.0)) throw DomainError("draw_infection_duration: negative discriminant");
    return params.cutoff + 2.0 * excess / (std::sqrt(disc) + lam);
}

bool draw_recency_result(const TestRecentFunction& f, double u, CounterRng& rng) {
    return rng.bernoulli(phi_eval(f, u));
}

void PriorTestingSpec::validate(double tau) const {
    const auto check_prob = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError(std::string("PriorTestingSpec: ") + name + " outside [0,1]");
    };
    check_prob(q, "q");
    check_prob(q_prime, "q_prime");
    if (mechanism == Mechanism::uniform) {
        if (!(a >= 0.0 && a < b)) throw DomainError("PriorTestingSpec: need 0 <= a < b");
        if (b > tau * (1.0 + 1e-12)) throw DomainError("PriorTestingSpec: b exceeds tau");
    }
    if (mechanism != Mechanism::uniform && q_prime > 0.0) {
        if (!(a_prime >= 0.0 && a_prime < b_prime))
            throw DomainError("PriorTestingSpec: need 0 <= a' < b'");
    }
    if (mechanism != Mechanism::uniform) {
        if (!(delay.scale > 0.0 && delay.shape_d > 0.0 && delay.power_p > 0.0))
            throw DomainError("PriorTestingSpec: delay parameters must be positive");
    }
}

PriorTriple draw_prior_test_uniform(const PriorTestingSpec& spec, double u, CounterRng& rng) {
    if (u < 0.0) throw DomainError("draw_prior_test_uniform: negative duration");
    PriorTriple out;
    if (!rng.bernoulli(spec.q)) return out;
    out.q = true;
    out.t = rng.uniform(spec.a, spec.b);
    out.delta = out.t <= u;
    return out;
}

PriorTriple draw_prior_test_infection_driven(const PriorTestingSpec& spec, double u,
                                             CounterRng& rng) {
    if (!(u > 0.0)) throw DomainError("draw_prior_test_infection_driven: duration must be positive");
    const bool background = spec.q_prime > 0.0 && rng.bernoulli(spec.q_prime);
    const double t1 = background ? rng.uniform(spec.a_prime, spec.b_prime) : 0.0;
    const double delay =
        rng.generalized_gamma(spec.delay.scale, spec.delay.shape_d, spec.delay.power_p);
    const double t2 = u - delay; // negative: the prompted test lies in the future
    double t;
    if (background && (t1 < t2 || t2 < 0.0))
        t = t1;
    else
        t = t2;
    PriorTriple out;
    if (t < 0.0) return out;
    out.q = true;
    out.t = t;
    out.delta = t <= u;
    return out;
}

void RecallBiasSpec::validate() const {
    if (time_jitter_sd < 0.0) throw DomainError("RecallBiasSpec: negative jitter sd");
    if (!(nonreport_positive_prob >= 0.0 && nonreport_positive_prob <= 1.0))
        throw DomainError("RecallBiasSpec: nonreport probability outside [0,1]");
    if (!(flip_positive_prob >= 0.0 && flip_positive_prob <= 1.0))
        throw DomainError("RecallBiasSpec: flip probability outside [0,1]");
}

PriorTriple apply_recall_bias(const PriorTriple& triple, const RecallBiasSpec& spec,
                              CounterRng& rng) {
    spec.validate();
    PriorTriple out = triple;
    if (!out.q) return out;
    if (spec.time_jitter_sd > 0.0)
        out.t = std::max(0.0, out.t + rng.normal(0.0, spec.time_jitter_sd));
    if (out.delta && spec.nonreport_positive_prob > 0.0 &&
        rng.bernoulli(spec.nonreport_positive_prob)) {
        return PriorTriple{};
    }
    if (out.delta && spec.flip_positive_prob > 0.0 && rng.bernoulli(spec.flip_positive_prob))
        out.delta = false;
    return out;
}

Sample simulate_cross_section(long n, const EpidemicParams& params,
                              const TestRecentFunction& truth,
                              const PriorTestingSpec& testing,
                              const std::optional<RecallBiasSpec>& bias,
                              std::uint64_t seed, std::uint64_t replicate) {
    if (n < 1) throw DomainError("simulate_cross_section: n must be at least 1");
    params.validate();
    const double c_t = solve_ct(params);
    double tau = std::max(params.cutoff, c_t);
    if (testing.mechanism == PriorTestingSpec::Mechanism::uniform) tau = std::max(tau, testing.b);
    if (testing.mechanism != PriorTestingSpec::Mechanism::uniform)
        tau = std::max(tau, testing.b_prime);
    testing.validate(tau);

    std::vector<CrossSectionRecord> records(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        CounterRng rng = CounterRng::substream(seed, replicate, static_cast<std::uint64_t>(i));
        CrossSectionRecord& rec = records[static_cast<size_t>(i)];
        rec.hiv_positive = rng.bernoulli(params.prevalence);
        if (!rec.hiv_positive) continue;
        const double u = draw_infection_duration(params, rng.uniform01());
        rec.rita_recent = draw_recency_result(truth, u, rng);
        PriorTriple pt =
            testing.mechanism == PriorTestingSpec::Mechanism::uniform
                ? draw_prior_test_uniform(testing, u, rng)
                : draw_prior_test_infection_driven(testing, u, rng);
        if (bias) pt = apply_recall_bias(pt, *bias, rng);
        if (pt.q) {
            rec.has_prior = true;
            rec.prior_time = pt.t;
            rec.prior_result = pt.delta;
            tau = std::max(tau, pt.t); // reported times can exceed the design bound
        }
    }
    return Sample(std::move(records), tau);
}

std::vector<CalibrationRecord> simulate_calibration_dataset(
    const TestRecentFunction& truth, long n_subjects, const std::vector<double>& visit_grid,
    std::uint64_t seed) {
    if (n_subjects < 1)
        throw DomainError("simulate_calibration_dataset: n_subjects must be at least 1");
    if (visit_grid.empty())
        throw DomainError("simulate_calibration_dataset: empty visit grid");
    for (double u : visit_grid)
        if (!(u > 0.0 && u <= truth.cutoff()))
            throw DomainError("simulate_calibration_dataset: visit outside (0, cutoff]");

    std::vector<CalibrationRecord> out;
    out.reserve(static_cast<size_t>(n_subjects) * visit_grid.size());
    for (long s = 0; s < n_subjects; ++s) {
        CounterRng rng = CounterRng::substream(seed, 0, static_cast<std::uint64_t>(s));
        for (double u : visit_grid)
            out.push_back({u, rng.bernoulli(phi_eval(truth, u))});
    }
    return out;
}

} // namespace xsinc
