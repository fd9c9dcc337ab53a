// Acceptance suite. Each numbered criterion prints a single PASS/FAIL line;
// the process exits nonzero if any fails.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "support/test_util.hpp"
#include "support/wmoments_oracle.hpp"
#include "xsinc/estimators.hpp"
#include "xsinc/harness.hpp"
#include "xsinc/presets.hpp"
#include "xsinc/quadrature.hpp"
#include "xsinc/stats.hpp"

using namespace xsinc;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& label, const std::string& detail) {
    std::printf("criterion %2d [%s] %s (%s)\n", id, pass ? "PASS" : "FAIL", label.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

PlugInMoments random_moments(CounterRng& rng) {
    PlugInMoments m;
    m.p = rng.uniform(0.1, 0.5);
    m.P_rec = rng.uniform(0.02, 0.2);
    m.P_rec_pt = rng.uniform(0.02, 0.25);
    const double q = rng.uniform(0.0, 0.9);
    const double c = rng.uniform(0.1, 0.9);
    m.P_A = q * c;
    m.P_B = q * (1.0 - c);
    m.mu_TA = rng.uniform(0.2, 1.8);
    m.sigma2_TA = rng.uniform(0.0, 0.4);
    m.mu_TB = rng.uniform(2.0, 6.0);
    m.sigma2_TB = rng.uniform(0.0, 2.0);
    m.omega_TA = m.mu_TA * rng.uniform(0.05, 0.5);
    m.sigma2_omega_TA = rng.uniform(0.0, 0.05);
    m.omega_star_TA = m.mu_TA * m.omega_TA * rng.uniform(0.8, 1.2);
    m.r_TA = rng.uniform(0.0, 1e-3);
    m.r_prime_TA = rng.uniform(0.0, 1e-3);
    m.r_star_TA = rng.uniform(0.0, 1e-3);
    m.n_A = 50;
    m.n_B = 50;
    return m;
}

RitaCharacteristics random_chars(CounterRng& rng) {
    RitaCharacteristics c;
    c.cutoff = 2.0;
    c.frr = rng.uniform(0.0, 0.05);
    c.frr_variance = rng.uniform(0.0, 1e-5);
    c.mdri = rng.uniform(0.15, 0.6) + c.frr * c.cutoff;
    c.mdri_variance = rng.uniform(0.0, 1e-3);
    return c;
}

// ---------------------------------------------------------------------------

void criterion_1_reduction_identity() {
    CounterRng rng = CounterRng::substream(7001, 0, 0);
    const auto f = testutil::half_phi(2.0, 0.014);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const auto sample = testutil::random_plain_sample(
            rng, 100 + static_cast<long>(rng.uniform(0, 900)), rng.uniform(0.1, 0.5),
            rng.uniform(0.02, 0.3), 4.0);
        RitaCharacteristics chars;
        chars.cutoff = 2.0;
        chars.frr = rng.uniform(0.0, 0.02);
        chars.mdri = rng.uniform(0.1, 0.5) + chars.frr * 2.0;
        const double s =
            standard_estimate(sample.n_rec(), sample.n_pos(), sample.n_neg(), chars);
        const double e = enhanced_estimate(sample, f, chars).lambda;
        worst = std::max(worst, std::abs(e - s));
    }
    report(1, worst < 1e-12, "no-prior reduction to the standard estimator",
           "max |enhanced - standard| = " + fmt(worst));
}

void criterion_2_perfect_test_identity() {
    CounterRng rng = CounterRng::substream(7002, 0, 0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        std::vector<CalibrationRecord> cal;
        for (int i = 0; i < 600; ++i) {
            const double u = rng.uniform(0.01, 2.0);
            cal.push_back({u, rng.bernoulli(1.0 / (1.0 + 4.0 * u))});
        }
        const auto f = fit_phi(cal, 2, 2.0, rng.uniform(0.0, 0.02));
        const auto chars = characteristics_from_fit(f, f.frr_tail(), 0.0);

        std::vector<CrossSectionRecord> recs;
        const long n = 200 + static_cast<long>(rng.uniform(0, 400));
        for (long i = 0; i < n; ++i) {
            if (rng.bernoulli(0.3))
                recs.push_back(
                    testutil::positive_record(rng.bernoulli(0.3), 2.0, rng.bernoulli(0.5)));
            else
                recs.push_back(testutil::negative_record());
        }
        recs[0] = testutil::positive_record(true, 2.0, false);
        recs[1] = testutil::negative_record();
        const Sample sample(std::move(recs), 4.0);
        const double expected = static_cast<double>(sample.n_rec_pt(2.0)) /
                                (static_cast<double>(sample.n_neg()) * 2.0);
        worst = std::max(worst,
                         std::abs(enhanced_estimate(sample, f, chars).lambda - expected));
    }
    report(2, worst < 1e-12, "universal cutoff-aged priors give count ratio / (n_neg * cutoff)",
           "max deviation = " + fmt(worst));
}

void criterion_3_indicator_equivalence() {
    bool ok = true;
    const double cutoff = 2.0;
    for (bool r : {false, true}) {
        ok = ok && (pt_recency_indicator(r, false, {}, {}, cutoff) == r);
        for (bool delta : {false, true})
            for (double t : {0.5, 2.0, 3.5}) {
                const bool removed = r && (t >= cutoff) && delta;
                const bool added = !r && (t <= cutoff) && !delta;
                const int expected = (r ? 1 : 0) - (removed ? 1 : 0) + (added ? 1 : 0);
                ok = ok &&
                     (static_cast<int>(pt_recency_indicator(r, true, t, delta, cutoff)) ==
                      expected);
            }
    }
    report(3, ok, "indicator form equals add/remove form on the full enumeration",
           ok ? "all 14 consistent combinations agree" : "mismatch found");
}

void criterion_4_variance_transcription() {
    CounterRng rng = CounterRng::substream(7004, 0, 0);
    double worst_rel = 0.0;
    for (int k = 0; k < 50; ++k) {
        const auto m = random_moments(rng);
        const auto chars = random_chars(rng);
        const long n = 500 + static_cast<long>(rng.uniform(0, 5000));
        const auto got = w_moments(m, chars, n);
        const auto ref = oracle::w_moments_reference(m, chars, n);
        for (int i = 0; i < 5; ++i) {
            worst_rel = std::max(worst_rel, std::abs(got.mean[i] - ref.mean[i]) /
                                                (std::abs(ref.mean[i]) + 1e-30));
            for (int j = 0; j < 5; ++j)
                worst_rel =
                    std::max(worst_rel, std::abs(got.covariance(i, j) - ref.cov(i, j)) /
                                            (std::abs(ref.cov(i, j)) + 1e-30));
        }
    }

    bool reduction_exact = true;
    for (int k = 0; k < 20; ++k) {
        auto m = random_moments(rng);
        m.P_A = 0.0;
        m.P_B = 0.0;
        m.P_rec_pt = m.P_rec;
        const auto chars = random_chars(rng);
        const auto got = w_moments(m, chars, 3000);
        const auto ref = oracle::w_moments_standard_reference(m.p, m.P_rec, chars, 3000);
        for (int i = 0; i < 5; ++i) {
            reduction_exact = reduction_exact && got.mean[i] == ref.mean[i];
            for (int j = 0; j < 5; ++j)
                reduction_exact = reduction_exact && got.covariance(i, j) == ref.cov(i, j);
        }
    }
    report(4, worst_rel <= 1e-10 && reduction_exact,
           "variance model matches the independent transcription",
           "max rel diff = " + fmt(worst_rel) +
               (reduction_exact ? ", no-prior reduction exact" : ", reduction MISMATCH"));
}

void criterion_5_variance_calibration() {
    auto cfg = presets::efficiency_scenario(0.2, 0.0, 2.0, 2000, 7005);
    const auto table = run_scenario(cfg);
    bool pass = true;
    std::string detail;
    for (const auto& row : table.rows) {
        const double ratio = row.see / row.se;
        pass = pass && ratio >= 0.9 && ratio <= 1.1;
        detail += row.estimator + " SEE/SE = " + fmt(ratio) + "  ";
    }
    report(5, pass, "analytic SE tracks empirical SE at N=5000, R=2000", detail);
}

struct TableRun {
    double reduction = 0.0;
    std::vector<double> coverages;
};

TableRun table_run(double a, double b, long replicates, std::uint64_t seed) {
    const auto table = run_scenario(presets::efficiency_scenario(0.2, a, b, replicates, seed));
    TableRun out;
    for (const auto& row : table.rows) {
        out.coverages.push_back(row.coverage_pct);
        if (row.estimator == "enhanced") out.reduction = row.pct_mse_reduction;
    }
    return out;
}

void criteria_6_7_table_reproduction() {
    const auto r02 = table_run(0.0, 2.0, 1000, 7006);
    const auto r04 = table_run(0.0, 4.0, 1000, 7006);
    const auto r24 = table_run(2.0, 4.0, 1000, 7006);

    const bool band_02 = r02.reduction >= 50.0 && r02.reduction <= 68.0;
    const bool band_04 = r04.reduction >= 38.0 && r04.reduction <= 57.0;
    const bool band_24 = r24.reduction >= 10.0 && r24.reduction <= 31.0;
    bool coverage_ok = true;
    double cov_lo = 100.0, cov_hi = 0.0;
    for (const auto& run : {r02, r04, r24})
        for (double c : run.coverages) {
            coverage_ok = coverage_ok && c >= 93.0 && c <= 97.0;
            cov_lo = std::min(cov_lo, c);
            cov_hi = std::max(cov_hi, c);
        }
    report(6, band_02 && band_04 && band_24 && coverage_ok,
           "benchmark MSE reductions and coverage at R=1000",
           "reductions = " + fmt(r02.reduction) + " / " + fmt(r04.reduction) + " / " +
               fmt(r24.reduction) + "; coverage in [" + fmt(cov_lo) + ", " + fmt(cov_hi) +
               "]");

    const bool ordered = r02.reduction > r04.reduction && r04.reduction > r24.reduction;
    report(7, ordered, "information ordering of prior-test windows",
           fmt(r02.reduction) + " > " + fmt(r04.reduction) + " > " + fmt(r24.reduction));
}

void criterion_8_sampler() {
    const auto rep = oracle_inverse_sampler(presets::benchmark_epidemic(0.0039), 100000, 7008);
    const bool pass =
        rep.max_abs_diff < 1e-8 && rep.ks_statistic < 0.006 && rep.continuity_gap < 1e-6;
    report(8, pass, "piecewise-incidence inversion against bisection and KS",
           "max diff = " + fmt(rep.max_abs_diff) + ", KS = " + fmt(rep.ks_statistic) +
               ", continuity gap = " + fmt(rep.continuity_gap));
}

void criterion_9_pt_characteristics() {
    CounterRng rng = CounterRng::substream(7009, 0, 0);
    bool mdri_ok = true;
    std::string detail;
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd coef(2);
        coef << rng.uniform(-2.5, 0.5), rng.uniform(-3.0, -0.5);
        const TestRecentFunction f(1, coef, Eigen::MatrixXd::Zero(2, 2),
                                   rng.uniform(0.0, 0.03), 2.0);
        PriorTestingSpec spec;
        spec.mechanism = PriorTestingSpec::Mechanism::uniform;
        spec.q = rng.uniform(0.2, 1.0);
        spec.a = rng.uniform(0.0, 1.0);
        spec.b = spec.a + rng.uniform(0.5, 3.0);
        const auto rep = oracle_pt_mdri_mc(f, spec, 400000, 7100 + k);
        const double tol = 3.0 * std::sqrt(rep.mc_stderr * rep.mc_stderr +
                                           rep.formula_stderr * rep.formula_stderr);
        mdri_ok = mdri_ok && std::abs(rep.diff) < tol;
    }

    bool frr_ok = true;
    double worst_excess = -1.0;
    for (int k = 0; k < 20; ++k) {
        const double frr = rng.uniform(0.002, 0.05);
        const auto f = testutil::flat_phi(rng.uniform(-1.0, 1.0), frr, 2.0);
        const double q = rng.uniform(0.0, 1.0);
        const double b = rng.uniform(0.5, 8.0);
        const double scale = rng.uniform(1.0, 6.0);
        const auto dur = [&](CounterRng& r) { return 2.0 + r.gamma(1.0) * scale; };
        const auto tests = [=](double u, CounterRng& r) {
            PriorTriple pt;
            if (!r.bernoulli(q)) return pt;
            pt.q = true;
            pt.t = r.uniform(0.0, b);
            pt.delta = pt.t <= u;
            return pt;
        };
        const auto est = pt_frr_mc(f, dur, tests, 50000, 7200 + k);
        const double excess = est.estimate - (frr + 3.0 * est.mc_stderr);
        worst_excess = std::max(worst_excess, excess);
        frr_ok = frr_ok && excess <= 0.0;
    }
    report(9, mdri_ok && frr_ok, "augmented-algorithm characteristics",
           std::string(mdri_ok ? "mean-duration formula within 3 MC SE x5" : "mean-duration MISMATCH") +
               "; max (rate - bound) = " + fmt(worst_excess));
}

void criterion_10_violation_directionality() {
    // dependent testing
    auto base_cfg = presets::efficiency_scenario(0.25, 0.0, 4.0, 1000, 7010);
    const auto base = run_scenario(base_cfg);
    const auto dep = run_scenario(presets::dependent_testing_scenario(0.25, 1000, 7010));
    double base_cov = 0.0, dep_cov = 0.0, dep_bias = 0.0, dep_q = 0.0;
    for (const auto& row : base.rows)
        if (row.estimator == "enhanced") base_cov = row.coverage_pct;
    for (const auto& row : dep.rows)
        if (row.estimator == "enhanced") {
            dep_cov = row.coverage_pct;
            dep_bias = row.bias;
            dep_q = row.realized_q_star;
        }
    const bool dep_ok =
        dep_bias < 0.0 && dep_cov < 85.0 && base_cov >= 93.0 && base_cov <= 97.0;

    // recall-bias perturbations: result flipping dominates
    struct Perturbation {
        const char* name;
        RecallBiasSpec spec;
    };
    std::vector<Perturbation> perts(4);
    perts[0].name = "jitter_1mo";
    perts[0].spec.time_jitter_sd = 1.0 / 12.0;
    perts[1].name = "jitter_6mo";
    perts[1].spec.time_jitter_sd = 0.5;
    perts[2].name = "nonreport";
    perts[2].spec.nonreport_positive_prob = 0.1;
    perts[3].name = "flip";
    perts[3].spec.flip_positive_prob = 0.1;
    double flip_bias = 0.0, other_max = 0.0;
    for (const auto& p : perts) {
        const auto t = run_scenario(presets::recall_bias_scenario(p.spec, 1000, 7010));
        for (const auto& row : t.rows)
            if (row.estimator == "enhanced") {
                if (std::string(p.name) == "flip")
                    flip_bias = std::abs(row.bias);
                else
                    other_max = std::max(other_max, std::abs(row.bias));
            }
    }
    const bool flip_ok = flip_bias > other_max;

    // piecewise incidence: dropping non-recent tests shrinks the bias
    const auto pw = run_scenario(presets::piecewise_incidence_scenario(12.0, 1000, 7010));
    double bias_all = 0.0, bias_recent = 0.0;
    for (const auto& row : pw.rows) {
        if (row.estimator == "enhanced") bias_all = row.bias;
        if (row.estimator == "enhanced_only_recent") bias_recent = row.bias;
    }
    const bool pw_ok = std::abs(bias_recent) < std::abs(bias_all);

    report(10, dep_ok && flip_ok && pw_ok, "assumption-violation directionality",
           "dependent testing bias = " + fmt(dep_bias) + ", coverage " + fmt(dep_cov) +
               " vs base " + fmt(base_cov) + " (q* = " + fmt(dep_q) + "); flip |bias| " +
               fmt(flip_bias) + " vs others " + fmt(other_max) + "; piecewise |bias| " +
               fmt(std::abs(bias_all)) + " -> " + fmt(std::abs(bias_recent)));
}

void criterion_11_gradient() {
    CounterRng rng = CounterRng::substream(7011, 0, 0);
    double worst = 0.0;
    const auto log_lambda = [](const Eigen::Matrix<double, 5, 1>& e, double n) {
        return std::log(e[0]) - std::log(n - e[1]) - std::log(e[2] + (e[3] + e[4]) / e[1]);
    };
    for (int k = 0; k < 20; ++k) {
        WMoments w;
        w.mean << rng.uniform(10, 100), rng.uniform(500, 2000), rng.uniform(0.1, 0.6),
            rng.uniform(5, 300), rng.uniform(0.1, 50);
        const double n = 5000.0;
        const auto g = log_lambda_gradient(w, 5000);
        for (int i = 0; i < 5; ++i) {
            Eigen::Matrix<double, 5, 1> up = w.mean, dn = w.mean;
            const double h = std::max(1e-6, 1e-6 * std::abs(w.mean[i]));
            up[i] += h;
            dn[i] -= h;
            const double fd = (log_lambda(up, n) - log_lambda(dn, n)) / (2.0 * h);
            worst = std::max(worst, std::abs(g[i] - fd) / std::abs(fd));
        }
    }
    report(11, worst < 1e-6, "closed-form gradient against central differences",
           "max rel diff = " + fmt(worst));
}

void criterion_12_quadrature() {
    CounterRng rng = CounterRng::substream(7012, 0, 0);
    double worst_identity = 0.0;
    double worst_step = 0.0;
    for (int k = 0; k < 20; ++k) {
        std::vector<CalibrationRecord> cal;
        const double rate = rng.uniform(1.0, 8.0);
        for (int i = 0; i < 800; ++i) {
            const double u = rng.uniform(0.01, 2.0);
            cal.push_back({u, rng.bernoulli(1.0 / (1.0 + rate * u))});
        }
        const auto f = fit_phi(cal, 2, 2.0, 0.014);
        worst_identity = std::max(
            worst_identity, std::abs(residual_integral(f, 2.0) + mdri(f) - 2.0));
        const auto integral = [&](double tol) {
            const double fl = f.duration_floor();
            return fl * f.core(fl) +
                   adaptive_simpson([&](double u) { return f.core(u); }, fl, 2.0, tol);
        };
        worst_step = std::max(worst_step, std::abs(integral(1e-9) - integral(1e-9 / 16.0)));
    }
    report(12, worst_identity <= 1e-10 && worst_step < 1e-8,
           "quadrature identity and step-halving stability",
           "max |resid + mdri - cutoff| = " + fmt(worst_identity) +
               ", max halving change = " + fmt(worst_step));
}

} // namespace

int main() {
    criterion_1_reduction_identity();
    criterion_2_perfect_test_identity();
    criterion_3_indicator_equivalence();
    criterion_4_variance_transcription();
    criterion_5_variance_calibration();
    criteria_6_7_table_reproduction();
    criterion_8_sampler();
    criterion_9_pt_characteristics();
    criterion_10_violation_directionality();
    criterion_11_gradient();
    criterion_12_quadrature();

    if (g_failures == 0)
        std::printf("acceptance: all criteria passed\n");
    else
        std::printf("acceptance: %d criteria FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
