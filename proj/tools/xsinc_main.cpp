// Command-line front end: estimate incidence from a cross-sectional sample,
// calibrate a test-recent curve, compute the shadow period, and run replicated
// simulation studies.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "xsinc/estimators.hpp"
#include "xsinc/harness.hpp"
#include "xsinc/io.hpp"
#include "xsinc/presets.hpp"

namespace fs = std::filesystem;
using namespace xsinc;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitInternal = 4;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
    out << text;
}

int cmd_estimate(const std::string& sample_path, const std::string& phi_path,
                 const std::string& chars_path, bool only_recent, double level,
                 const std::string& out_path) {
    const Sample sample = read_sample_csv(sample_path);
    const TestRecentFunction f = read_phi_model(phi_path);
    const RitaCharacteristics chars = read_characteristics(chars_path);

    const Sample* view = &sample;
    std::optional<Sample> filtered;
    if (only_recent) {
        filtered = drop_nonrecent_prior_tests(sample, chars.cutoff);
        view = &*filtered;
    }
    std::vector<IncidenceEstimate> rows;
    rows.push_back(standard_estimate_with_ci(*view, f, chars, level));
    rows.push_back(estimate_with_ci(*view, f, chars, level));
    const std::string csv = estimates_csv(rows, *view, chars.cutoff);
    if (out_path.empty())
        std::cout << csv;
    else
        write_text(out_path, csv);
    return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 bool per_replicate, bool emit_sample) {
    const ScenarioConfig cfg = read_scenario(scenario_path);
    fs::create_directories(out_dir);
    std::vector<ReplicateEstimate> estimates;
    const MetricsTable table = run_scenario(cfg, per_replicate ? &estimates : nullptr);
    write_text(fs::path(out_dir) / "metrics.csv", table.to_csv());
    write_text(fs::path(out_dir) / "metrics.json", metrics_json(table));
    if (per_replicate)
        write_text(fs::path(out_dir) / "replicate_estimates.csv",
                   replicate_estimates_csv(estimates));
    if (emit_sample) {
        const Sample s = simulate_cross_section(cfg.sample_size, cfg.epidemic,
                                                cfg.assay_truth, cfg.prior_testing,
                                                cfg.recall_bias, cfg.seed, 0);
        write_sample_csv(fs::path(out_dir) / "replicate0_sample.csv", s);
    }
    std::cout << table.to_csv();
    return 0;
}

int cmd_calibrate(const std::string& data_path, int degree, double cutoff, double frr,
                  double frr_variance, const std::string& out_model,
                  const std::string& out_chars) {
    const auto records = read_calibration_csv(data_path);
    const TestRecentFunction f = fit_phi(records, degree, cutoff, frr);
    const RitaCharacteristics chars = characteristics_from_fit(f, frr, frr_variance);
    if (!out_model.empty()) write_phi_model(out_model, f);
    if (!out_chars.empty()) write_characteristics(out_chars, chars);

    const double z = normal_quantile(0.975);
    const double sd = std::sqrt(chars.mdri_variance);
    std::printf("records_used=%zu\n", records.size());
    std::printf("mdri_years=%s\n", format_double(chars.mdri).c_str());
    std::printf("mdri_days=%s\n", format_double(chars.mdri * 365.25).c_str());
    std::printf("mdri_ci_lower_days=%s\n",
                format_double((chars.mdri - z * sd) * 365.25).c_str());
    std::printf("mdri_ci_upper_days=%s\n",
                format_double((chars.mdri + z * sd) * 365.25).c_str());
    std::printf("frr=%s\n", format_double(frr).c_str());
    return 0;
}

int cmd_shadow(const std::string& phi_path, const std::string& chars_path,
               const std::string& prior_tests_path) {
    const TestRecentFunction f = read_phi_model(phi_path);
    const RitaCharacteristics chars = read_characteristics(chars_path);
    std::vector<PriorTest> tests;
    if (!prior_tests_path.empty()) tests = read_prior_tests_csv(prior_tests_path);
    std::printf("shadow_period_years=%s\n",
                format_double(shadow_period(f, chars, tests)).c_str());
    return 0;
}

int cmd_reproduce(const std::string& out_dir, long replicates, std::uint64_t seed) {
    fs::create_directories(out_dir);
    std::string all;
    // x/y series for the efficiency grid: MSE reduction against availability q,
    // one series per prior-test window
    std::string plot = "window,q,pct_mse_reduction\n";
    MetricsTable combined;
    bool header = true;
    for (const auto& cfg : presets::reproduction_suite(replicates, seed)) {
        std::cerr << "running " << cfg.name << " (R=" << cfg.replicates << ")\n";
        const MetricsTable t = run_scenario(cfg);
        for (const auto& row : t.rows) combined.rows.push_back(row);
        std::string csv = t.to_csv();
        if (!header) csv.erase(0, csv.find('\n') + 1);
        header = false;
        all += csv;
        if (cfg.name.rfind("uniform_", 0) == 0 &&
            cfg.prior_testing.mechanism == PriorTestingSpec::Mechanism::uniform) {
            for (const auto& row : t.rows)
                if (row.estimator == "enhanced")
                    plot += "[" + format_double(cfg.prior_testing.a) + "," +
                            format_double(cfg.prior_testing.b) + "]," +
                            format_double(cfg.prior_testing.q) + "," +
                            format_double(row.pct_mse_reduction) + "\n";
        }
    }
    write_text(fs::path(out_dir) / "reproduction_metrics.csv", all);
    write_text(fs::path(out_dir) / "reproduction_metrics.json", metrics_json(combined));
    write_text(fs::path(out_dir) / "plot_mse_reduction.csv", plot);
    std::cout << all;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-sectional incidence estimation from recency assays with prior HIV tests"};
    app.require_subcommand(1);

    std::string sample_path, phi_path, chars_path, out_path;
    bool only_recent = false;
    double level = 0.95;
    auto* est = app.add_subcommand("estimate", "Standard and enhanced incidence estimates");
    est->add_option("--sample", sample_path, "Sample CSV")->required();
    est->add_option("--phi", phi_path, "Fitted curve JSON")->required();
    est->add_option("--chars", chars_path, "Assay characteristics JSON")->required();
    est->add_flag("--only-recent", only_recent, "Drop prior tests older than the cutoff");
    est->add_option("--level", level, "Confidence level")->default_val(0.95);
    est->add_option("--out", out_path, "Output CSV (stdout when omitted)");

    std::string scenario_path, out_dir;
    bool per_replicate = false;
    bool emit_sample = false;
    auto* sim = app.add_subcommand("simulate", "Run a replicated scenario study");
    sim->add_option("--scenario", scenario_path, "Scenario JSON")->required();
    sim->add_option("--out-dir", out_dir, "Output directory")->required();
    sim->add_flag("--per-replicate", per_replicate,
                  "Also write per-replicate estimates CSV");
    sim->add_flag("--emit-sample", emit_sample,
                  "Also write the first replicate's dataset as a sample CSV");

    std::string cal_path, out_model, out_chars;
    int degree = 2;
    double cutoff = 2.0, frr = 0.0, frr_variance = 0.0;
    auto* cal = app.add_subcommand("calibrate", "Fit the test-recent curve");
    cal->add_option("--data", cal_path, "Calibration CSV")->required();
    cal->add_option("--degree", degree, "Polynomial degree in log duration")->default_val(2);
    cal->add_option("--cutoff", cutoff, "Recency cutoff in years")->default_val(2.0);
    cal->add_option("--frr", frr, "False recent rate beyond the cutoff")->default_val(0.0);
    cal->add_option("--frr-variance", frr_variance, "Variance of the false recent rate")
        ->default_val(0.0);
    cal->add_option("--out", out_model, "Output model JSON");
    cal->add_option("--out-chars", out_chars, "Output characteristics JSON");

    std::string pt_path;
    auto* shadow = app.add_subcommand("shadow", "Mean shadow period");
    shadow->add_option("--phi", phi_path, "Fitted curve JSON")->required();
    shadow->add_option("--chars", chars_path, "Assay characteristics JSON")->required();
    shadow->add_option("--prior-tests", pt_path, "Prior-test CSV (optional)");

    long replicates = 1000;
    std::uint64_t seed = 1;
    // XSINC_SEED supplies the default; an explicit --seed wins.
    if (const char* env_seed = std::getenv("XSINC_SEED"))
        seed = std::strtoull(env_seed, nullptr, 10);
    auto* rep = app.add_subcommand("reproduce", "Run the bundled benchmark scenario suite");
    rep->add_option("--out-dir", out_dir, "Output directory")->required();
    rep->add_option("--replicates", replicates, "Replicates per scenario")->default_val(1000);
    rep->add_option("--seed", seed, "Base seed (or XSINC_SEED)")->default_val(seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (est->parsed())
            return cmd_estimate(sample_path, phi_path, chars_path, only_recent, level, out_path);
        if (sim->parsed()) return cmd_simulate(scenario_path, out_dir, per_replicate, emit_sample);
        if (cal->parsed())
            return cmd_calibrate(cal_path, degree, cutoff, frr, frr_variance, out_model, out_chars);
        if (shadow->parsed()) return cmd_shadow(phi_path, chars_path, pt_path);
        if (rep->parsed()) return cmd_reproduce(out_dir, replicates, seed);
    } catch (const SchemaError& e) {
        std::cerr << "error: schema: " << e.what() << "\n";
        return kExitSchema;
    } catch (const DomainError& e) {
        std::cerr << "error: domain: " << e.what() << "\n";
        return kExitSchema;
    } catch (const EstimationError& e) {
        std::cerr << "error: estimation: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
