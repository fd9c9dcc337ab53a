#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xsinc/assay.hpp"
#include "xsinc/estimators.hpp"
#include "xsinc/harness.hpp"

namespace xsinc {

// Calibration CSV: header `duration_years,recent`, recent in {0,1}.
std::vector<CalibrationRecord> read_calibration_csv(const std::filesystem::path& path);
void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationRecord>& records);

// Sample CSV: header
//   id,hiv_positive,rita_recent,has_prior,prior_time_years,prior_result
// with empty fields where a value is structurally absent.
Sample read_sample_csv(const std::filesystem::path& path);
void write_sample_csv(const std::filesystem::path& path, const Sample& sample);

// Prior-test CSV: header `has_prior,prior_time_years`.
std::vector<PriorTest> read_prior_tests_csv(const std::filesystem::path& path);

// Fitted test-recent curve as a JSON document with fields
// degree, coefficients, covariance (row-major), frr_tail, cutoff, duration_floor.
TestRecentFunction read_phi_model(const std::filesystem::path& path);
void write_phi_model(const std::filesystem::path& path, const TestRecentFunction& f);

RitaCharacteristics read_characteristics(const std::filesystem::path& path);
void write_characteristics(const std::filesystem::path& path,
                           const RitaCharacteristics& chars);

// Scenario JSON with sections epidemic, assay_truth, prior_testing,
// recall_bias, sample_size, seed (plus harness controls).
ScenarioConfig read_scenario(const std::filesystem::path& path);
void write_scenario(const std::filesystem::path& path, const ScenarioConfig& config);

// Estimate records: method,lambda,variance,ci_lower,ci_upper,n,n_pos,n_rec,n_rec_pt,flags.
std::string estimates_csv(const std::vector<IncidenceEstimate>& estimates,
                          const Sample& sample, double cutoff);

// MetricsTable as a JSON document (one object per row).
std::string metrics_json(const MetricsTable& table);

// Per-replicate estimator outputs as CSV.
std::string replicate_estimates_csv(const std::vector<ReplicateEstimate>& rows);

std::string format_double(double v);

} // namespace xsinc
