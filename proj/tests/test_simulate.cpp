#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support/test_util.hpp"
#include "xsinc/harness.hpp"
#include "xsinc/presets.hpp"
#include "xsinc/simulate.hpp"
#include "xsinc/stats.hpp"

using namespace xsinc;

namespace {

EpidemicParams flat_epidemic() { return presets::benchmark_epidemic(0.0); }
EpidemicParams sloped_epidemic() { return presets::benchmark_epidemic(0.0039); }

} // namespace

TEST_CASE("solve_ct linear limit and bisection oracle") {
    const auto flat = flat_epidemic();
    CHECK(solve_ct(flat) == doctest::Approx(0.29 / (0.032 * 0.71)).epsilon(1e-14));

    const auto sloped = sloped_epidemic();
    const double c = solve_ct(sloped);
    // Bisection on the monotone quadratic.
    const double rhs = 0.29 / 0.71;
    const auto lhs = [&](double x) {
        return 0.5 * sloped.rho * x * x + x * (sloped.lambda - sloped.rho * sloped.cutoff);
    };
    double lo = 0.0, hi = 100.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (lhs(mid) < rhs ? lo : hi) = mid;
    }
    CHECK(std::abs(c - 0.5 * (lo + hi)) < 1e-9);

    auto eps = sloped;
    eps.rho = 1e-12;
    CHECK(std::abs(solve_ct(eps) - solve_ct(flat)) < 1e-6);
}

TEST_CASE("infection-duration draw: branch threshold, monotonicity, support") {
    const auto sloped = sloped_epidemic();
    const double e_star = uniform_branch_threshold(sloped);
    CHECK(draw_infection_duration(sloped, e_star) == sloped.cutoff);

    const auto flat = flat_epidemic();
    const double mid_tail = 1.0 - flat.lambda * flat.cutoff * 0.71 / 0.29 / 2.0;
    CHECK(draw_infection_duration(flat, mid_tail) ==
          doctest::Approx(flat.cutoff / 2.0).epsilon(1e-12));

    double prev = std::numeric_limits<double>::infinity();
    const double c_max = solve_ct(sloped);
    for (double e = 0.001; e < 1.0; e += 0.001) {
        const double u = draw_infection_duration(sloped, e);
        CHECK(u < prev);
        CHECK(u >= 0.0);
        CHECK(u <= c_max);
        prev = u;
    }
    CHECK_THROWS_AS(draw_infection_duration(sloped, 0.0), DomainError);
    CHECK_THROWS_AS(draw_infection_duration(sloped, 1.0), DomainError);
}

TEST_CASE("flat incidence yields uniform durations (KS at 1e5 draws)") {
    const auto flat = flat_epidemic();
    const double c_t = solve_ct(flat);
    const long n = 100000;
    std::vector<double> draws(n);
    CounterRng rng = CounterRng::substream(1, 0, 0);
    for (long i = 0; i < n; ++i)
        draws[static_cast<size_t>(i)] = draw_infection_duration(flat, rng.uniform01());
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (long i = 0; i < n; ++i) {
        const double f = draws[static_cast<size_t>(i)] / c_t;
        ks = std::max({ks, (i + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    CHECK(ks < 1.36 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("inverse-sampler oracle on the sloped benchmark") {
    const auto rep = oracle_inverse_sampler(sloped_epidemic(), 100000, 77);
    CHECK(rep.max_abs_diff < 1e-8);
    CHECK(rep.ks_statistic < 0.006);
    CHECK(rep.continuity_gap < 1e-6);

    const auto rep0 = oracle_inverse_sampler(flat_epidemic(), 100000, 78);
    CHECK(rep0.max_abs_diff < 1e-8);
    CHECK(rep0.ks_statistic < 0.006);
}

TEST_CASE("recency draws follow the curve") {
    CounterRng rng = CounterRng::substream(303, 0, 0);
    const auto zero = testutil::flat_phi(-40.0, 0.0, 2.0);
    const auto one = testutil::flat_phi(40.0, 0.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        CHECK_FALSE(draw_recency_result(zero, 0.5, rng));
        CHECK(draw_recency_result(one, 0.5, rng));
    }
    const auto half = testutil::half_phi(2.0);
    long hits = 0;
    const long n = 100000;
    for (long i = 0; i < n; ++i) hits += draw_recency_result(half, 0.7, rng) ? 1 : 0;
    const double frac = static_cast<double>(hits) / n;
    CHECK(std::abs(frac - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("uniform prior-test mechanism") {
    PriorTestingSpec spec;
    spec.mechanism = PriorTestingSpec::Mechanism::uniform;
    spec.q = 0.0;
    spec.a = 0.0;
    spec.b = 4.0;
    CounterRng rng = CounterRng::substream(307, 0, 0);
    for (int i = 0; i < 100; ++i) CHECK_FALSE(draw_prior_test_uniform(spec, 1.0, rng).q);

    spec.q = 1.0;
    spec.a = 1.0;
    spec.b = 4.0;
    for (int i = 0; i < 500; ++i) {
        const auto pt = draw_prior_test_uniform(spec, 0.5, rng); // infected after the window
        CHECK(pt.q);
        CHECK_FALSE(pt.delta);
    }

    spec.a = 0.0;
    long delta_hits = 0;
    const long n = 100000;
    for (long i = 0; i < n; ++i)
        delta_hits += draw_prior_test_uniform(spec, 2.0, rng).delta ? 1 : 0;
    const double frac = static_cast<double>(delta_hits) / n;
    CHECK(std::abs(frac - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("infection-driven mechanism edge cases") {
    PriorTestingSpec spec;
    spec.mechanism = PriorTestingSpec::Mechanism::infection_driven;
    spec.q_prime = 0.0;
    spec.delay = {1000.0, 3.0, 3.0}; // delay concentrated far beyond any duration
    CounterRng rng = CounterRng::substream(311, 0, 0);
    for (int i = 0; i < 300; ++i) CHECK_FALSE(draw_prior_test_infection_driven(spec, 3.0, rng).q);

    spec.delay = {1e-12, 1.0, 1.0}; // near-degenerate delay: test right at infection
    for (int i = 0; i < 300; ++i) {
        const auto pt = draw_prior_test_infection_driven(spec, 3.0, rng);
        CHECK(pt.q);
        CHECK(pt.delta);
    }
}

TEST_CASE("mixed mechanism reaches the benchmark availability") {
    PriorTestingSpec spec;
    spec.mechanism = PriorTestingSpec::Mechanism::mixed;
    spec.q_prime = 0.25;
    spec.a_prime = 0.0;
    spec.b_prime = 4.0;
    spec.delay = {8.354192, 0.75, 0.75};

    const auto flat = flat_epidemic();
    CounterRng rng = CounterRng::substream(313, 0, 0);
    long available = 0;
    const long n = 100000;
    for (long i = 0; i < n; ++i) {
        const double u = draw_infection_duration(flat, rng.uniform01());
        available += draw_prior_test_infection_driven(spec, std::max(u, 1e-9), rng).q ? 1 : 0;
    }
    const double q_star = static_cast<double>(available) / n;
    CHECK(q_star > 0.633 - 0.05);
    CHECK(q_star < 0.633 + 0.05);
}

TEST_CASE("recall bias: identity, forced flip, jitter spread") {
    RecallBiasSpec none;
    CounterRng rng = CounterRng::substream(317, 0, 0);
    const PriorTriple pt{true, 1.25, true};
    const auto same = apply_recall_bias(pt, none, rng);
    CHECK(same.q == pt.q);
    CHECK(same.t == pt.t);
    CHECK(same.delta == pt.delta);

    RecallBiasSpec flip;
    flip.flip_positive_prob = 1.0;
    for (int i = 0; i < 100; ++i) CHECK_FALSE(apply_recall_bias(pt, flip, rng).delta);

    RecallBiasSpec jitter;
    jitter.time_jitter_sd = 0.5;
    std::vector<double> diffs;
    for (int i = 0; i < 200000; ++i) {
        const PriorTriple in{true, 1.25, false};
        const auto out = apply_recall_bias(in, jitter, rng);
        diffs.push_back(out.t - in.t);
    }
    // direct simulation of the zero-clamped displacement
    std::vector<double> oracle;
    for (int i = 0; i < 200000; ++i)
        oracle.push_back(std::max(0.0, 1.25 + rng.normal(0.0, 0.5)) - 1.25);
    const double got = std::sqrt(sample_variance(diffs));
    const double want = std::sqrt(sample_variance(oracle));
    CHECK(got == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("cross-section structure and simple identities") {
    const auto truth = presets::benchmark_assay();
    auto params = flat_epidemic();
    PriorTestingSpec testing;
    testing.mechanism = PriorTestingSpec::Mechanism::uniform;
    testing.q = 0.0;
    testing.a = 0.0;
    testing.b = 2.0;

    SUBCASE("prevalence thinning at p=0.999") {
        auto extreme = params;
        extreme.prevalence = 0.999;
        const auto s = simulate_cross_section(20000, extreme, truth, testing, {}, 5, 0);
        const double frac = static_cast<double>(s.n_pos()) / static_cast<double>(s.n());
        CHECK(std::abs(frac - 0.999) <
              3.0 * std::sqrt(0.999 * 0.001 / static_cast<double>(s.n())));
    }

    SUBCASE("lab-recent fraction matches the closed-form probability") {
        // P_rec = frr + (mdri - frr*cutoff) * lambda (1-p) / p
        const double om = mdri(truth);
        const double beta = truth.frr_tail();
        const double p_rec = beta + (om - beta * 2.0) * 0.032 * 0.71 / 0.29;
        long pos = 0, rec = 0;
        for (int chunk = 0; chunk < 20; ++chunk) {
            const auto s = simulate_cross_section(20000, params, truth, testing, {}, 50 + chunk, 0);
            pos += s.n_pos();
            rec += s.n_rec();
        }
        const double frac = static_cast<double>(rec) / static_cast<double>(pos);
        CHECK(std::abs(frac - p_rec) <
              3.0 * std::sqrt(p_rec * (1.0 - p_rec) / static_cast<double>(pos)));
    }

    SUBCASE("universal recent priors only add to the augmented count") {
        auto recent_tests = testing;
        recent_tests.q = 1.0;
        recent_tests.b = 2.0;
        const auto s = simulate_cross_section(20000, params, truth, recent_tests, {}, 7, 0);
        for (const auto& r : s.records())
            if (r.hiv_positive) {
                CHECK(r.has_prior);
                CHECK(*r.prior_time <= 2.0);
            }
        CHECK(s.n_rec_pt(2.0) >= s.n_rec());
    }

    SUBCASE("same seed gives identical samples") {
        const auto a = simulate_cross_section(5000, params, truth, testing, {}, 99, 3);
        const auto b = simulate_cross_section(5000, params, truth, testing, {}, 99, 3);
        REQUIRE(a.records().size() == b.records().size());
        for (size_t i = 0; i < a.records().size(); ++i) {
            CHECK(a.records()[i].hiv_positive == b.records()[i].hiv_positive);
            CHECK(a.records()[i].rita_recent == b.records()[i].rita_recent);
            CHECK(a.records()[i].prior_time == b.records()[i].prior_time);
        }
    }
}

TEST_CASE("calibration dataset generation") {
    const auto sat = testutil::flat_phi(40.0, 0.0, 2.0);
    std::vector<double> grid = {0.1};
    for (const auto& rec : simulate_calibration_dataset(sat, 100, grid, 1))
        CHECK(rec.recent);

    const auto truth = presets::benchmark_assay();
    const auto recs = simulate_calibration_dataset(truth, 3000, grid, 2);
    long hits = 0;
    for (const auto& r : recs) hits += r.recent ? 1 : 0;
    const double target = phi_eval(truth, 0.1);
    const double frac = static_cast<double>(hits) / static_cast<double>(recs.size());
    CHECK(std::abs(frac - target) <
          3.0 * std::sqrt(target * (1.0 - target) / static_cast<double>(recs.size())));

    CHECK_THROWS_AS(simulate_calibration_dataset(truth, 10, {2.5}, 3), DomainError);
    CHECK_THROWS_AS(simulate_calibration_dataset(truth, 10, {}, 3), DomainError);
}

TEST_CASE("calibration round trip recovers the benchmark mean duration") {
    const auto truth = presets::benchmark_assay();
    CHECK(mdri(truth) == doctest::Approx(98.0 / 365.25).epsilon(1e-6));
    const auto grid = CalibrationDesign::default_grid(2.0);
    const auto recs = simulate_calibration_dataset(truth, 400, grid, 909);
    const auto fit = fit_phi(recs, 2, 2.0, truth.frr_tail());
    CHECK(std::abs(mdri(fit) - 98.0 / 365.25) < 10.0 / 365.25);
}
