#include "xsinc/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include "xsinc/stats.hpp"

namespace xsinc {

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

struct ReplicateResult {
    bool calibration_failed = false;
    // one slot per configured estimator variant
    std::vector<bool> failed;
    std::vector<double> lambda;
    std::vector<double> variance;
    std::vector<double> ci_lower;
    std::vector<double> ci_upper;
    std::vector<bool> covered;
    std::vector<double> q_star;
};

ReplicateResult run_replicate(const ScenarioConfig& cfg, long rep) {
    const size_t n_var = cfg.estimators.size();
    ReplicateResult out;
    out.failed.assign(n_var, true);
    out.lambda.assign(n_var, 0.0);
    out.variance.assign(n_var, 0.0);
    out.ci_lower.assign(n_var, 0.0);
    out.ci_upper.assign(n_var, 0.0);
    out.covered.assign(n_var, false);
    out.q_star.assign(n_var, 0.0);

    const std::uint64_t n = static_cast<std::uint64_t>(cfg.sample_size);
    const std::uint64_t cal_base = n;
    const std::uint64_t frr_idx = n + static_cast<std::uint64_t>(cfg.calibration.n_subjects);

    RitaCharacteristics chars;
    TestRecentFunction fitted = cfg.assay_truth; // replaced below
    try {
        // Each replicate refits the curve on fresh calibration data.
        std::vector<CalibrationRecord> cal;
        cal.reserve(static_cast<size_t>(cfg.calibration.n_subjects) *
                    cfg.calibration.visit_grid.size());
        for (long s = 0; s < cfg.calibration.n_subjects; ++s) {
            CounterRng rng = CounterRng::substream(cfg.seed, static_cast<std::uint64_t>(rep),
                                                   cal_base + static_cast<std::uint64_t>(s));
            for (double u : cfg.calibration.visit_grid)
                cal.push_back({u, rng.bernoulli(phi_eval(cfg.assay_truth, u))});
        }
        fitted = fit_phi(cal, cfg.fit_degree, cfg.assay_truth.cutoff(),
                         cfg.assay_truth.frr_tail(), cfg.assay_truth.duration_floor());

        CounterRng frr_rng =
            CounterRng::substream(cfg.seed, static_cast<std::uint64_t>(rep), frr_idx);
        const double frr_hat =
            cfg.frr_stderr > 0.0
                ? std::clamp(frr_rng.normal(cfg.assay_truth.frr_tail(), cfg.frr_stderr), 0.0, 1.0)
                : cfg.assay_truth.frr_tail();
        chars = characteristics_from_fit(fitted, frr_hat, cfg.frr_stderr * cfg.frr_stderr);
    } catch (const std::exception&) {
        out.calibration_failed = true;
        return out;
    }

    const Sample sample =
        simulate_cross_section(cfg.sample_size, cfg.epidemic, cfg.assay_truth,
                               cfg.prior_testing, cfg.recall_bias, cfg.seed,
                               static_cast<std::uint64_t>(rep));

    for (size_t v = 0; v < n_var; ++v) {
        try {
            const EstimatorVariant variant = cfg.estimators[v];
            const Sample* view = &sample;
            std::optional<Sample> filtered;
            if (variant == EstimatorVariant::enhanced_only_recent) {
                filtered = drop_nonrecent_prior_tests(sample, chars.cutoff);
                view = &*filtered;
            }
            IncidenceEstimate est;
            long with_prior = 0;
            if (variant == EstimatorVariant::standard) {
                est = standard_estimate_with_ci(*view, fitted, chars, cfg.level);
            } else {
                est = estimate_with_ci(*view, fitted, chars, cfg.level);
                for (const auto& r : view->records())
                    if (r.hiv_positive && r.has_prior) ++with_prior;
            }
            out.lambda[v] = est.lambda;
            out.variance[v] = est.variance;
            out.ci_lower[v] = est.ci_lower;
            out.ci_upper[v] = est.ci_upper;
            out.covered[v] =
                est.ci_lower <= cfg.epidemic.lambda && cfg.epidemic.lambda <= est.ci_upper;
            out.q_star[v] = view->n_pos() > 0 ? static_cast<double>(with_prior) /
                                                    static_cast<double>(view->n_pos())
                                              : 0.0;
            out.failed[v] = false;
        } catch (const std::exception&) {
            out.failed[v] = true;
        }
    }
    return out;
}

std::vector<ReplicateResult> run_all_replicates(const ScenarioConfig& cfg) {
    const long R = cfg.replicates;
    std::vector<ReplicateResult> results(static_cast<size_t>(R));
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("XSINC_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = static_cast<unsigned>(v);
    }
    const unsigned workers = static_cast<unsigned>(std::min<long>(R, hw));
    std::vector<std::future<void>> futs;
    futs.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&, w] {
            for (long r = w; r < R; r += workers)
                results[static_cast<size_t>(r)] = run_replicate(cfg, r);
        }));
    }
    for (auto& f : futs) f.get();
    return results;
}

} // namespace

std::vector<double> CalibrationDesign::default_grid(double cutoff, int n_visits) {
    std::vector<double> grid(static_cast<size_t>(n_visits));
    for (int j = 0; j < n_visits; ++j)
        grid[static_cast<size_t>(j)] = (j + 0.5) / n_visits * cutoff;
    return grid;
}

std::string variant_name(EstimatorVariant v) {
    switch (v) {
        case EstimatorVariant::standard: return "standard";
        case EstimatorVariant::enhanced: return "enhanced";
        case EstimatorVariant::enhanced_only_recent: return "enhanced_only_recent";
    }
    return "unknown";
}

double mse_reduction(double standard_mse, double enhanced_mse) {
    if (!(standard_mse > 0.0)) throw DomainError("mse_reduction: standard MSE must be positive");
    return 100.0 * (1.0 - enhanced_mse / standard_mse);
}

MetricsTable run_scenario(const ScenarioConfig& cfg,
                          std::vector<ReplicateEstimate>* per_replicate) {
    if (cfg.sample_size < 1) throw DomainError("run_scenario: sample_size must be at least 1");
    if (cfg.replicates < 1) throw DomainError("run_scenario: replicates must be at least 1");
    if (cfg.estimators.empty()) throw DomainError("run_scenario: no estimators configured");
    if (cfg.calibration.n_subjects < 1 || cfg.calibration.visit_grid.empty())
        throw DomainError("run_scenario: empty calibration design");

    const auto results = run_all_replicates(cfg);

    if (per_replicate) {
        per_replicate->clear();
        for (long r = 0; r < cfg.replicates; ++r) {
            const auto& res = results[static_cast<size_t>(r)];
            for (size_t v = 0; v < cfg.estimators.size(); ++v) {
                ReplicateEstimate e;
                e.replicate = r;
                e.estimator = variant_name(cfg.estimators[v]);
                e.failed = res.calibration_failed || res.failed[v];
                if (!e.failed) {
                    e.lambda = res.lambda[v];
                    e.variance = res.variance[v];
                    e.ci_lower = res.ci_lower[v];
                    e.ci_upper = res.ci_upper[v];
                }
                per_replicate->push_back(std::move(e));
            }
        }
    }

    MetricsTable table;
    std::optional<double> standard_mse;
    for (size_t v = 0; v < cfg.estimators.size(); ++v) {
        MetricsRow row;
        row.scenario = cfg.name;
        row.estimator = variant_name(cfg.estimators[v]);

        std::vector<double> lambdas;
        KahanSum see_sum, sq_sum, cover_sum, q_sum;
        for (const auto& res : results) {
            if (res.calibration_failed || res.failed[v]) {
                ++row.failures;
                continue;
            }
            lambdas.push_back(res.lambda[v]);
            see_sum.add(std::sqrt(res.variance[v]));
            sq_sum.add((res.lambda[v] - cfg.epidemic.lambda) *
                       (res.lambda[v] - cfg.epidemic.lambda));
            cover_sum.add(res.covered[v] ? 1.0 : 0.0);
            q_sum.add(res.q_star[v]);
        }
        row.replicates_used = static_cast<long>(lambdas.size());
        if (row.replicates_used > 0) {
            const double R = static_cast<double>(row.replicates_used);
            row.bias = mean(lambdas) - cfg.epidemic.lambda;
            row.se = std::sqrt(sample_variance(lambdas));
            if (row.replicates_used == 1) row.flags = "se_undefined";
            row.see = see_sum.value() / R;
            row.mse = sq_sum.value() / R;
            row.coverage_pct = 100.0 * cover_sum.value() / R;
            row.realized_q_star = q_sum.value() / R;
        }
        row.pct_mse_reduction = std::numeric_limits<double>::quiet_NaN();
        if (cfg.estimators[v] == EstimatorVariant::standard)
            standard_mse = row.mse;
        else if (standard_mse && *standard_mse > 0.0)
            row.pct_mse_reduction = mse_reduction(*standard_mse, row.mse);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string MetricsTable::to_csv() const {
    std::ostringstream os;
    os << "scenario,estimator,replicates_used,failures,bias,se,see,mse,coverage_pct,"
          "pct_mse_reduction,realized_q_star,flags\n";
    for (const auto& r : rows) {
        os << r.scenario << ',' << r.estimator << ',' << r.replicates_used << ','
           << r.failures << ',' << fmt(r.bias) << ',' << fmt(r.se) << ',' << fmt(r.see)
           << ',' << fmt(r.mse) << ',' << fmt(r.coverage_pct) << ','
           << fmt(r.pct_mse_reduction) << ',' << fmt(r.realized_q_star) << ',' << r.flags
           << '\n';
    }
    return os.str();
}

VarianceOracleReport oracle_variance_mc(const ScenarioConfig& cfg, EstimatorVariant variant) {
    if (cfg.replicates < 500)
        throw DomainError("oracle_variance_mc: at least 500 replicates required");
    ScenarioConfig local = cfg;
    local.estimators = {variant};
    const auto results = run_all_replicates(local);

    VarianceOracleReport rep;
    std::vector<double> lambdas;
    KahanSum var_sum;
    for (const auto& res : results) {
        if (res.calibration_failed || res.failed[0]) {
            ++rep.failures;
            continue;
        }
        lambdas.push_back(res.lambda[0]);
        var_sum.add(res.variance[0]);
    }
    rep.replicates_used = static_cast<long>(lambdas.size());
    if (rep.replicates_used > 1) {
        rep.empirical_var = sample_variance(lambdas);
        rep.mean_analytic_var = var_sum.value() / static_cast<double>(rep.replicates_used);
        rep.ratio = rep.mean_analytic_var / rep.empirical_var;
    }
    return rep;
}

PtMdriOracleReport oracle_pt_mdri_mc(const TestRecentFunction& f,
                                     const PriorTestingSpec& testing, long n_draws,
                                     std::uint64_t seed) {
    if (n_draws < 10000) throw DomainError("oracle_pt_mdri_mc: n_draws must be at least 10^4");
    const double cutoff = f.cutoff();
    const int grid_n = 200;
    const long per_node = std::max<long>(1, n_draws / grid_n);

    // Empirical augmented test-recent curve on a duration grid, integrated.
    PtMdriOracleReport rep;
    double integral = 0.0, var_sum = 0.0;
    const double h = cutoff / grid_n;
    for (int k = 0; k < grid_n; ++k) {
        const double u = (k + 0.5) * h;
        CounterRng rng = CounterRng::substream(seed, 0, static_cast<std::uint64_t>(k));
        long hits = 0;
        for (long i = 0; i < per_node; ++i) {
            const bool r = rng.bernoulli(phi_eval(f, u));
            const PriorTriple pt = draw_prior_test_uniform(testing, u, rng);
            const bool rpt =
                pt.q ? pt_recency_indicator(r, true, pt.t, pt.delta, cutoff) : r;
            hits += rpt ? 1 : 0;
        }
        const double p_hat = static_cast<double>(hits) / static_cast<double>(per_node);
        integral += p_hat * h;
        var_sum += h * h * p_hat * (1.0 - p_hat) / static_cast<double>(per_node);
    }
    rep.mc_estimate = integral;
    rep.mc_stderr = std::sqrt(var_sum);

    // Closed form on an independent empirical draw of (q, t).
    std::vector<PriorTest> draws;
    std::vector<double> contrib;
    draws.reserve(static_cast<size_t>(n_draws));
    for (long i = 0; i < n_draws; ++i) {
        CounterRng rng = CounterRng::substream(seed, 1, static_cast<std::uint64_t>(i));
        const PriorTriple pt = draw_prior_test_uniform(testing, 0.0, rng);
        draws.push_back({pt.q, pt.t});
        contrib.push_back(pt.q && pt.t <= cutoff ? residual_integral(f, pt.t) : 0.0);
    }
    rep.formula_value = pt_mdri(f, draws);
    rep.formula_stderr =
        std::sqrt(sample_variance(contrib) / static_cast<double>(n_draws));
    rep.diff = rep.mc_estimate - rep.formula_value;
    return rep;
}

double infection_duration_cdf(const EpidemicParams& params, double u) {
    params.validate();
    if (u <= 0.0) return 0.0;
    const double scale = (1.0 - params.prevalence) / params.prevalence;
    double acc = params.lambda * u;
    if (u > params.cutoff)
        acc += 0.5 * params.rho * (u - params.cutoff) * (u - params.cutoff);
    return std::min(1.0, scale * acc);
}

InverseSamplerReport oracle_inverse_sampler(const EpidemicParams& params, long n_draws,
                                            std::uint64_t seed) {
    InverseSamplerReport rep;

    // True upper support: the closed form evaluated at vanishing e.
    const double u_max = draw_infection_duration(params, 1e-15);

    const long n_shared = 10000;
    for (long i = 0; i < n_shared; ++i) {
        CounterRng rng = CounterRng::substream(seed, 0, static_cast<std::uint64_t>(i));
        const double e = rng.uniform01();
        const double closed = draw_infection_duration(params, e);
        // Bisection on F(u) = 1 - e.
        double lo = 0.0, hi = u_max;
        const double target = 1.0 - e;
        for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if (infection_duration_cdf(params, mid) < target)
                lo = mid;
            else
                hi = mid;
        }
        rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(closed - 0.5 * (lo + hi)));
    }

    std::vector<double> draws(static_cast<size_t>(n_draws));
    for (long i = 0; i < n_draws; ++i) {
        CounterRng rng = CounterRng::substream(seed, 1, static_cast<std::uint64_t>(i));
        draws[static_cast<size_t>(i)] = draw_infection_duration(params, rng.uniform01());
    }
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(n_draws);
    for (long i = 0; i < n_draws; ++i) {
        const double f = infection_duration_cdf(params, draws[static_cast<size_t>(i)]);
        const double hi = (i + 1.0) / n - f;
        const double lo = f - i / n;
        rep.ks_statistic = std::max({rep.ks_statistic, hi, lo});
    }

    if (params.rho > 0.0) {
        const double e_star = uniform_branch_threshold(params);
        constexpr double probe = 1e-9;
        rep.continuity_gap = std::abs(draw_infection_duration(params, e_star - probe) -
                                      draw_infection_duration(params, e_star + probe));
    }
    return rep;
}

} // namespace xsinc
