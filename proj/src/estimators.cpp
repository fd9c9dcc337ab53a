#include "xsinc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xsinc/quadrature.hpp"
#include "xsinc/stats.hpp"

namespace xsinc {

namespace {

void check_record(const CrossSectionRecord& r, long row, double tau) {
    const auto where = [&](const char* what) {
        return "record " + std::to_string(row) + ": " + what;
    };
    if (r.hiv_positive != r.rita_recent.has_value())
        throw SchemaError(where("rita_recent must be present exactly for positives"));
    if (!r.hiv_positive && r.has_prior)
        throw SchemaError(where("has_prior set on an HIV-negative record"));
    const bool prior_fields = r.prior_time.has_value() || r.prior_result.has_value();
    if (r.has_prior != prior_fields ||
        (r.has_prior && !(r.prior_time.has_value() && r.prior_result.has_value())))
        throw SchemaError(where("prior_time/prior_result must be present exactly when has_prior"));
    if (r.has_prior) {
        if (!(*r.prior_time >= 0.0))
            throw SchemaError(where("prior_time must be nonnegative"));
        if (*r.prior_time > tau * (1.0 + 1e-12))
            throw SchemaError(where("prior_time exceeds tau"));
    }
}

} // namespace

Sample::Sample(std::vector<CrossSectionRecord> records, double tau)
    : records_(std::move(records)), tau_(tau) {
    if (!(tau_ > 0.0)) throw DomainError("Sample: tau must be positive");
    long row = 0;
    for (const auto& r : records_) {
        check_record(r, row++, tau_);
        ++n_;
        if (r.hiv_positive) {
            ++n_pos_;
            if (*r.rita_recent) ++n_rec_;
        }
    }
}

long Sample::n_rec_pt(double cutoff) const {
    long count = 0;
    for (const auto& r : records_) {
        if (!r.hiv_positive) continue;
        if (pt_recency_indicator(*r.rita_recent, r.has_prior, r.prior_time, r.prior_result,
                                 cutoff))
            ++count;
    }
    return count;
}

Sample strip_prior_tests(const Sample& sample) {
    std::vector<CrossSectionRecord> recs = sample.records();
    for (auto& r : recs) {
        r.has_prior = false;
        r.prior_time.reset();
        r.prior_result.reset();
    }
    return Sample(std::move(recs), sample.tau());
}

Sample drop_nonrecent_prior_tests(const Sample& sample, double cutoff) {
    std::vector<CrossSectionRecord> recs = sample.records();
    for (auto& r : recs) {
        if (r.has_prior && *r.prior_time > cutoff) {
            r.has_prior = false;
            r.prior_time.reset();
            r.prior_result.reset();
        }
    }
    return Sample(std::move(recs), sample.tau());
}

std::string IncidenceEstimate::flags() const {
    std::string out;
    const auto append = [&](const char* f) {
        if (!out.empty()) out += ';';
        out += f;
    };
    if (dropped_nonrecent_singleton) append("dropped_nonrecent_singleton");
    if (variance_clamped) append("variance_clamped");
    if (wald_fallback) append("wald_fallback");
    return out;
}

double standard_estimate(long n_rec, long n_pos, long n_neg,
                         const RitaCharacteristics& chars) {
    chars.validate();
    if (n_neg <= 0) throw EstimationError("standard_estimate: no HIV-negative subjects");
    const double denom_rate = chars.mdri - chars.frr * chars.cutoff;
    if (!(denom_rate > 0.0))
        throw EstimationError("standard_estimate: mdri - frr*cutoff is not positive");
    return (static_cast<double>(n_rec) - static_cast<double>(n_pos) * chars.frr) /
           (static_cast<double>(n_neg) * denom_rate);
}

IncidenceEstimate enhanced_estimate(const Sample& sample, const TestRecentFunction& f,
                                    const RitaCharacteristics& chars) {
    chars.validate();
    if (f.cutoff() != chars.cutoff)
        throw DomainError("enhanced_estimate: cutoff mismatch between curve and characteristics");
    const long n_pos = sample.n_pos();
    const long n_neg = sample.n_neg();
    if (n_pos <= 0) throw EstimationError("enhanced_estimate: no HIV-positive subjects");
    if (n_neg <= 0) throw EstimationError("enhanced_estimate: no HIV-negative subjects");
    const double cutoff = chars.cutoff;

    // Sums run over prior-test carriers only, so a sample without prior tests
    // evaluates to the standard estimator's arithmetic exactly.
    double sum_resid = 0.0; // residual integrals of recent prior tests
    double sum_tb = 0.0;    // times of non-recent prior tests
    long n_b = 0;
    for (const auto& r : sample.records()) {
        if (!r.hiv_positive || !r.has_prior) continue;
        const double t = *r.prior_time;
        if (t >= cutoff) {
            ++n_b;
            sum_tb += t;
        }
        if (t <= cutoff) sum_resid += residual_integral(f, t);
    }

    const long n_rec_pt = sample.n_rec_pt(cutoff);
    const double numerator =
        static_cast<double>(n_rec_pt) - chars.frr * static_cast<double>(n_pos - n_b);
    const double inner =
        chars.mdri +
        (sum_resid - chars.frr * (cutoff * static_cast<double>(n_pos) - sum_tb)) /
            static_cast<double>(n_pos);
    const double denominator = static_cast<double>(n_neg) * inner;
    if (!(denominator > 0.0))
        throw EstimationError("enhanced_estimate: nonpositive denominator (" +
                              std::to_string(inner) + " per positive)");

    IncidenceEstimate out;
    out.method = EstimateMethod::enhanced;
    out.lambda = numerator / denominator;
    out.ci_lower = out.lambda;
    out.ci_upper = out.lambda;
    return out;
}

PlugInMoments plug_in_moments(const Sample& sample, const TestRecentFunction& f) {
    const long n_pos = sample.n_pos();
    if (n_pos <= 0) throw EstimationError("plug_in_moments: no HIV-positive subjects");
    const double cutoff = f.cutoff();

    std::vector<double> ta, tb;
    for (const auto& r : sample.records()) {
        if (!r.hiv_positive || !r.has_prior) continue;
        const double t = *r.prior_time;
        if (t <= cutoff)
            ta.push_back(t); // ties at the cutoff stay in A only
        else
            tb.push_back(t);
    }

    PlugInMoments m;
    m.p = static_cast<double>(n_pos) / static_cast<double>(sample.n());
    m.P_rec = static_cast<double>(sample.n_rec()) / static_cast<double>(n_pos);
    m.P_rec_pt = static_cast<double>(sample.n_rec_pt(cutoff)) / static_cast<double>(n_pos);
    m.n_A = static_cast<long>(ta.size());
    m.n_B = static_cast<long>(tb.size());
    m.P_A = static_cast<double>(m.n_A) / static_cast<double>(n_pos);
    m.P_B = static_cast<double>(m.n_B) / static_cast<double>(n_pos);

    m.mu_TA = mean(ta);
    m.sigma2_TA = sample_variance(ta);
    m.mu_TB = mean(tb);
    m.sigma2_TB = sample_variance(tb);

    if (!ta.empty()) {
        std::vector<double> om(ta.size());
        std::vector<double> t_om(ta.size());
        std::vector<Eigen::VectorXd> grads(ta.size());
        for (size_t i = 0; i < ta.size(); ++i) {
            om[i] = ta[i] - residual_integral(f, ta[i]);
            t_om[i] = ta[i] * om[i];
            grads[i] = integrated_gradient(f, ta[i]);
        }
        m.omega_TA = mean(om);
        m.sigma2_omega_TA = sample_variance(om);
        m.omega_star_TA = mean(t_om);

        // r moments factorize through the integrated gradient, so the mean over
        // all ordered pairs is exact in O(n_A).
        const Eigen::MatrixXd& cov = f.coefficient_covariance();
        const Eigen::VectorXd g_star = integrated_gradient(f, cutoff);
        Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(f.degree() + 1);
        double diag_sum = 0.0;
        double star_sum = 0.0;
        for (const auto& g : grads) {
            diag_sum += g.dot(cov * g);
            star_sum += g.dot(cov * g_star);
            g_sum += g;
        }
        const double n_a = static_cast<double>(ta.size());
        m.r_TA = diag_sum / n_a;
        m.r_star_TA = star_sum / n_a;
        if (ta.size() > 1)
            m.r_prime_TA = (g_sum.dot(cov * g_sum) - diag_sum) / (n_a * (n_a - 1.0));
    }
    return m;
}

WMoments w_moments(const PlugInMoments& m, const RitaCharacteristics& chars, long n_total) {
    chars.validate();
    if (n_total < 1) throw DomainError("w_moments: n_total must be at least 1");
    const double N = static_cast<double>(n_total);
    const double p = m.p;
    const double np = N * p;
    const double beta = chars.frr;
    const double s2b = chars.frr_variance;
    const double tstar = chars.cutoff;
    const double w3 = chars.mdri - beta * tstar;
    if (!(w3 > 0.0))
        throw EstimationError("w_moments: mdri - frr*cutoff is not positive");

    const double ppt = m.P_rec_pt;
    const double prec = m.P_rec;
    const double pa = m.P_A, pb = m.P_B;
    const double mu_a = m.mu_TA, s2_a = m.sigma2_TA;
    const double mu_b = m.mu_TB, s2_b = m.sigma2_TB;
    const double om_a = m.omega_TA, s2om_a = m.sigma2_omega_TA, omst_a = m.omega_star_TA;
    const double r_a = m.r_TA, rp_a = m.r_prime_TA, rs_a = m.r_star_TA;
    // lambda(1-p)/p eliminated via the recency-probability identity.
    const double ratio = (prec - beta) / w3;

    WMoments w;
    w.mean << np * (ppt - beta * (1.0 - pb)),
              np,
              w3,
              np * pa * (mu_a - om_a),
              np * beta * pb * mu_b;

    auto& V = w.covariance;
    V(0, 0) = np * (ppt * (1.0 - ppt) + (1.0 - p) * (ppt - (1.0 - pb) * beta) * (ppt - (1.0 - pb) * beta)
                    + s2b * (1.0 - pb) * (1.0 - (1.0 - pb) * p + np * (1.0 - pb))
                    + beta * pb * (beta * (1.0 - pb)
                                   - 2.0 * (ppt - (prec - beta) * (1.0 + mu_b * beta / w3))));
    V(1, 1) = np * (1.0 - p);
    V(2, 2) = chars.mdri_variance + s2b * tstar * tstar;
    V(3, 3) = np * pa * ((s2_a + s2om_a) + (mu_a * mu_a + om_a * om_a)
                         - p * pa * (mu_a - om_a) * (mu_a - om_a)
                         + r_a + pa * rp_a * (np - p) - 2.0 * omst_a);
    V(4, 4) = np * pb * (s2b * mu_b * mu_b * pb * np
                         + (s2b + beta * beta) * (s2_b + mu_b * mu_b * (1.0 - pb * p)));

    V(0, 1) = np * (1.0 - p) * (ppt - (1.0 - pb) * beta);
    V(0, 2) = np * tstar * s2b * (1.0 - pb);
    V(0, 3) = np * pa * ((mu_a - om_a) * (prec - p * ppt - beta * (1.0 - p + p * pb))
                         + ratio * (mu_a * mu_a + s2_a + om_a * om_a + s2om_a - 2.0 * omst_a));
    V(0, 4) = np * pb * (beta * ((prec - beta) * (mu_b + (s2_b + mu_b * mu_b) * beta / w3)
                                 - p * ppt * mu_b)
                         + p * (s2b + beta * beta) * mu_b * (1.0 - pb)
                         - s2b * np * (1.0 - pb) * mu_b);
    V(1, 2) = 0.0;
    V(1, 3) = np * (1.0 - p) * pa * (mu_a - om_a);
    V(1, 4) = np * (1.0 - p) * beta * pb * mu_b;
    V(2, 3) = -np * pa * rs_a;
    V(2, 4) = -np * tstar * pb * mu_b * s2b;
    V(3, 4) = -np * p * beta * pb * pa * mu_b * (mu_a - om_a);

    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < i; ++j) V(i, j) = V(j, i);
    return w;
}

Eigen::Matrix<double, 5, 1> log_lambda_gradient(const WMoments& w, long n_total) {
    const double N = static_cast<double>(n_total);
    const auto& e = w.mean;
    if (!(e[0] > 0.0)) throw EstimationError("delta method: mean of W1 is not positive");
    if (!(e[1] > 0.0 && e[1] < N))
        throw EstimationError("delta method: mean of W2 outside (0, N)");
    const double d = (e[3] + e[4]) / e[1];
    if (!(e[2] + d > 0.0))
        throw EstimationError("delta method: W3 + (W4+W5)/W2 is not positive");

    Eigen::Matrix<double, 5, 1> g;
    g[0] = 1.0 / e[0];
    g[1] = 1.0 / (N - e[1]) + d / (e[2] * e[1] + e[3] + e[4]);
    g[2] = -1.0 / (e[2] + d);
    g[3] = -1.0 / (e[1] * (e[2] + d));
    g[4] = g[3];
    return g;
}

DeltaVariance delta_method_variance(const WMoments& w, long n_total) {
    const Eigen::Matrix<double, 5, 1> g = log_lambda_gradient(w, n_total);
    const auto& e = w.mean;
    const double d = (e[3] + e[4]) / e[1];

    DeltaVariance out;
    out.lambda = e[0] / ((static_cast<double>(n_total) - e[1]) * (e[2] + d));
    out.var_log_lambda = g.dot(w.covariance * g);
    if (out.var_log_lambda < 0.0) {
        // The covariance is assembled entry-wise from plug-ins and need not be
        // positive semidefinite.
        out.var_log_lambda = 0.0;
        out.clamped = true;
    }
    out.var_lambda = out.lambda * out.lambda * out.var_log_lambda;
    return out;
}

IncidenceEstimate estimate_with_ci(const Sample& sample, const TestRecentFunction& f,
                                   const RitaCharacteristics& chars, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw DomainError("estimate_with_ci: level outside (0,1)");

    // A lone non-recent prior test leaves the group-B time variance undefined;
    // drop that single prior test.
    long nonrecent = 0;
    size_t single_idx = 0;
    const auto& recs = sample.records();
    for (size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        if (r.hiv_positive && r.has_prior && *r.prior_time > chars.cutoff) {
            ++nonrecent;
            single_idx = i;
        }
    }
    bool dropped = false;
    Sample effective = sample;
    if (nonrecent == 1) {
        std::vector<CrossSectionRecord> copy = recs;
        copy[single_idx].has_prior = false;
        copy[single_idx].prior_time.reset();
        copy[single_idx].prior_result.reset();
        effective = Sample(std::move(copy), sample.tau());
        dropped = true;
    }

    IncidenceEstimate est = enhanced_estimate(effective, f, chars);
    est.dropped_nonrecent_singleton = dropped;

    const PlugInMoments m = plug_in_moments(effective, f);
    const WMoments w = w_moments(m, chars, effective.n());

    if (!(est.lambda > 0.0)) {
        // Log-scale machinery is undefined; use the direct delta variance and a
        // plain symmetric interval.
        const double N = static_cast<double>(effective.n());
        const auto& e = w.mean;
        const double d = (e[3] + e[4]) / e[1];
        Eigen::Matrix<double, 5, 1> g;
        g[0] = 1.0 / ((N - e[1]) * (e[2] + d));
        g[1] = est.lambda * (1.0 / (N - e[1]) + d / (e[2] * e[1] + e[3] + e[4]));
        g[2] = -est.lambda / (e[2] + d);
        g[3] = -est.lambda / (e[1] * (e[2] + d));
        g[4] = g[3];
        double var = g.dot(w.covariance * g);
        if (var < 0.0) {
            var = 0.0;
            est.variance_clamped = true;
        }
        est.variance = var;
        est.var_log_lambda = std::numeric_limits<double>::quiet_NaN();
        est.wald_fallback = true;
        const double half = normal_quantile(0.5 * (1.0 + level)) * std::sqrt(var);
        est.ci_lower = est.lambda - half;
        est.ci_upper = est.lambda + half;
        return est;
    }

    const DeltaVariance dv = delta_method_variance(w, effective.n());
    est.var_log_lambda = dv.var_log_lambda;
    est.variance_clamped = dv.clamped;
    est.variance = est.lambda * est.lambda * dv.var_log_lambda;

    const double z = normal_quantile(0.5 * (1.0 + level));
    const double half = z * std::sqrt(dv.var_log_lambda);
    est.ci_lower = est.lambda * std::exp(-half);
    est.ci_upper = est.lambda * std::exp(half);
    return est;
}

IncidenceEstimate standard_estimate_with_ci(const Sample& sample,
                                            const TestRecentFunction& f,
                                            const RitaCharacteristics& chars,
                                            double level) {
    IncidenceEstimate est = estimate_with_ci(strip_prior_tests(sample), f, chars, level);
    est.method = EstimateMethod::standard;
    return est;
}

double shadow_period(const TestRecentFunction& f, const RitaCharacteristics& chars,
                     const std::vector<PriorTest>& prior_tests) {
    chars.validate();
    if (f.cutoff() != chars.cutoff)
        throw DomainError("shadow_period: cutoff mismatch between curve and characteristics");
    const double tstar = chars.cutoff;
    const double beta = chars.frr;
    const double n = static_cast<double>(prior_tests.size());

    // Empirical means over the prior-test collection.
    double mean_resid_a = 0.0;
    double mean_t_b = 0.0;
    std::vector<double> t_a, t_b;
    for (const auto& pt : prior_tests) {
        if (!pt.q) continue;
        if (!(pt.t >= 0.0) || !std::isfinite(pt.t))
            throw DomainError("shadow_period: prior test time must be finite and nonnegative");
        if (pt.t <= tstar) {
            mean_resid_a += residual_integral(f, pt.t);
            t_a.push_back(pt.t);
        }
        if (pt.t >= tstar) {
            mean_t_b += pt.t;
            t_b.push_back(pt.t);
        }
    }
    if (n > 0.0) {
        mean_resid_a /= n;
        mean_t_b /= n;
    }
    const double denominator = (chars.mdri - beta * tstar) + mean_resid_a + beta * mean_t_b;
    if (!(denominator > 0.0))
        throw EstimationError("shadow_period: nonpositive denominator");

    const double fl = f.duration_floor();
    const auto weighted_core = [&](double lo, double hi, auto&& integrand) {
        // integrand has a kink where the log clamp engages
        double s = 0.0;
        if (lo < fl) {
            const double cap = std::min(hi, fl);
            s += adaptive_simpson(integrand, lo, cap);
            lo = cap;
        }
        if (lo < hi) s += adaptive_simpson(integrand, lo, hi);
        return s;
    };

    double numerator =
        weighted_core(0.0, tstar, [&](double u) { return (f.core(u) - beta) * u; });

    if (!t_a.empty() || !t_b.empty()) {
        // The availability-weighted integral is piecewise smooth between
        // consecutive prior-test times; the weight at u counts tests not older
        // than u.
        std::sort(t_a.begin(), t_a.end());
        std::sort(t_b.begin(), t_b.end());
        const double t_max = std::max(
            {tstar, t_a.empty() ? 0.0 : t_a.back(), t_b.empty() ? 0.0 : t_b.back()});
        std::vector<double> cuts;
        cuts.push_back(0.0);
        for (double t : t_a) cuts.push_back(t);
        for (double t : t_b) cuts.push_back(t);
        cuts.push_back(t_max);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        for (size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double lo = cuts[k], hi = cuts[k + 1];
            if (!(hi > lo)) continue;
            const double count_a = static_cast<double>(
                t_a.end() - std::lower_bound(t_a.begin(), t_a.end(), hi));
            const double count_b = static_cast<double>(
                t_b.end() - std::lower_bound(t_b.begin(), t_b.end(), hi));
            const double c_a = count_a / n;
            const double c_b = count_b / n;
            if (c_a > 0.0)
                numerator += c_a * weighted_core(lo, hi, [&](double u) {
                    return u * (1.0 - f.core(u));
                });
            if (c_b > 0.0) numerator += c_b * beta * 0.5 * (hi * hi - lo * lo);
        }
    }
    return numerator / denominator;
}

} // namespace xsinc
