#include "xsinc/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace xsinc {

namespace {

using nlohmann::json;

std::string load_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void save_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot open " + path.string() + " for writing");
    out << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct CsvReader {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    CsvReader(const std::filesystem::path& p, const std::vector<std::string>& expected) {
        path = p.string();
        std::istringstream in(load_text(p));
        std::string line;
        if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
        header = split_csv_line(line);
        if (header != expected) {
            std::string want;
            for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
            throw SchemaError(path + ": header must be `" + want + "`");
        }
        long row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty()) continue;
            auto fields = split_csv_line(line);
            if (fields.size() != expected.size())
                throw SchemaError(path + " row " + std::to_string(row) + ": expected " +
                                  std::to_string(expected.size()) + " fields");
            rows.push_back(std::move(fields));
        }
    }

    [[noreturn]] void fail(size_t i, const std::string& msg) const {
        throw SchemaError(path + " row " + std::to_string(i + 2) + ": " + msg);
    }
};

double parse_double(const CsvReader& r, size_t row, const std::string& s, const char* field) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        r.fail(row, std::string(field) + ": not a number: `" + s + "`");
    return v;
}

bool parse_bool(const CsvReader& r, size_t row, const std::string& s, const char* field) {
    if (s == "0") return false;
    if (s == "1") return true;
    r.fail(row, std::string(field) + ": expected 0 or 1, got `" + s + "`");
}

const json& at(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(where + ": missing key `" + key + "`");
    return *it;
}

TestRecentFunction phi_from_json(const json& j, const std::string& where) {
    const int degree = at(j, "degree", where).get<int>();
    const auto coefs = at(j, "coefficients", where).get<std::vector<double>>();
    const double frr_tail = at(j, "frr_tail", where).get<double>();
    const double cutoff = at(j, "cutoff", where).get<double>();
    const double floor = j.value("duration_floor", kDefaultDurationFloor);
    if (static_cast<int>(coefs.size()) != degree + 1)
        throw SchemaError(where + ": coefficients length must be degree+1");
    Eigen::VectorXd c(degree + 1);
    for (int i = 0; i <= degree; ++i) c[i] = coefs[static_cast<size_t>(i)];
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
    if (j.contains("covariance")) {
        const auto flat = j["covariance"].get<std::vector<double>>();
        const size_t p = static_cast<size_t>(degree + 1);
        if (flat.size() != p * p)
            throw SchemaError(where + ": covariance must have (degree+1)^2 entries");
        for (size_t i = 0; i < p; ++i)
            for (size_t k = 0; k < p; ++k) cov(static_cast<long>(i), static_cast<long>(k)) = flat[i * p + k];
    }
    try {
        return TestRecentFunction(degree, c, cov, frr_tail, cutoff, floor);
    } catch (const DomainError& e) {
        throw SchemaError(where + ": " + e.what());
    }
}

json phi_to_json(const TestRecentFunction& f) {
    json j;
    j["degree"] = f.degree();
    j["coefficients"] = std::vector<double>(
        f.coefficients().data(), f.coefficients().data() + f.coefficients().size());
    const auto& cov = f.coefficient_covariance();
    std::vector<double> flat;
    for (long i = 0; i < cov.rows(); ++i)
        for (long k = 0; k < cov.cols(); ++k) flat.push_back(cov(i, k));
    j["covariance"] = flat;
    j["frr_tail"] = f.frr_tail();
    j["cutoff"] = f.cutoff();
    j["duration_floor"] = f.duration_floor();
    return j;
}

json parse_json(const std::filesystem::path& path) {
    try {
        return json::parse(load_text(path));
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::vector<CalibrationRecord> read_calibration_csv(const std::filesystem::path& path) {
    CsvReader r(path, {"duration_years", "recent"});
    std::vector<CalibrationRecord> out;
    out.reserve(r.rows.size());
    for (size_t i = 0; i < r.rows.size(); ++i) {
        CalibrationRecord rec;
        rec.duration_years = parse_double(r, i, r.rows[i][0], "duration_years");
        rec.recent = parse_bool(r, i, r.rows[i][1], "recent");
        if (!(rec.duration_years > 0.0)) r.fail(i, "duration_years must be positive");
        out.push_back(rec);
    }
    return out;
}

void write_calibration_csv(const std::filesystem::path& path,
                           const std::vector<CalibrationRecord>& records) {
    std::ostringstream os;
    os << "duration_years,recent\n";
    for (const auto& rec : records)
        os << format_double(rec.duration_years) << ',' << (rec.recent ? 1 : 0) << '\n';
    save_text(path, os.str());
}

Sample read_sample_csv(const std::filesystem::path& path) {
    CsvReader r(path, {"id", "hiv_positive", "rita_recent", "has_prior", "prior_time_years",
                       "prior_result"});
    std::vector<CrossSectionRecord> recs;
    recs.reserve(r.rows.size());
    double max_t = 0.0;
    for (size_t i = 0; i < r.rows.size(); ++i) {
        const auto& f = r.rows[i];
        CrossSectionRecord rec;
        rec.hiv_positive = parse_bool(r, i, f[1], "hiv_positive");
        if (!f[2].empty()) rec.rita_recent = parse_bool(r, i, f[2], "rita_recent");
        rec.has_prior = parse_bool(r, i, f[3], "has_prior");
        if (!f[4].empty()) rec.prior_time = parse_double(r, i, f[4], "prior_time_years");
        if (!f[5].empty()) rec.prior_result = parse_bool(r, i, f[5], "prior_result");

        if (rec.hiv_positive != rec.rita_recent.has_value())
            r.fail(i, "rita_recent must be present exactly when hiv_positive=1");
        if (rec.has_prior != rec.prior_time.has_value() ||
            rec.has_prior != rec.prior_result.has_value())
            r.fail(i, "prior_time_years/prior_result must be present exactly when has_prior=1");
        if (rec.has_prior && !rec.hiv_positive)
            r.fail(i, "has_prior=1 on an HIV-negative record");
        if (rec.prior_time) {
            if (!(*rec.prior_time >= 0.0)) r.fail(i, "prior_time_years must be nonnegative");
            max_t = std::max(max_t, *rec.prior_time);
        }
        recs.push_back(std::move(rec));
    }
    return Sample(std::move(recs), std::max(max_t, 1.0));
}

void write_sample_csv(const std::filesystem::path& path, const Sample& sample) {
    std::ostringstream os;
    os << "id,hiv_positive,rita_recent,has_prior,prior_time_years,prior_result\n";
    long id = 0;
    for (const auto& r : sample.records()) {
        os << id++ << ',' << (r.hiv_positive ? 1 : 0) << ',';
        if (r.rita_recent) os << (*r.rita_recent ? 1 : 0);
        os << ',' << (r.has_prior ? 1 : 0) << ',';
        if (r.prior_time) os << format_double(*r.prior_time);
        os << ',';
        if (r.prior_result) os << (*r.prior_result ? 1 : 0);
        os << '\n';
    }
    save_text(path, os.str());
}

std::vector<PriorTest> read_prior_tests_csv(const std::filesystem::path& path) {
    CsvReader r(path, {"has_prior", "prior_time_years"});
    std::vector<PriorTest> out;
    out.reserve(r.rows.size());
    for (size_t i = 0; i < r.rows.size(); ++i) {
        PriorTest pt;
        pt.q = parse_bool(r, i, r.rows[i][0], "has_prior");
        if (pt.q) {
            if (r.rows[i][1].empty()) r.fail(i, "prior_time_years required when has_prior=1");
            pt.t = parse_double(r, i, r.rows[i][1], "prior_time_years");
            if (!(pt.t >= 0.0)) r.fail(i, "prior_time_years must be nonnegative");
        } else if (!r.rows[i][1].empty()) {
            r.fail(i, "prior_time_years present with has_prior=0");
        }
        out.push_back(pt);
    }
    return out;
}

TestRecentFunction read_phi_model(const std::filesystem::path& path) {
    return phi_from_json(parse_json(path), path.string());
}

void write_phi_model(const std::filesystem::path& path, const TestRecentFunction& f) {
    save_text(path, phi_to_json(f).dump(2) + "\n");
}

RitaCharacteristics read_characteristics(const std::filesystem::path& path) {
    const json j = parse_json(path);
    const std::string where = path.string();
    RitaCharacteristics c;
    c.mdri = at(j, "mdri", where).get<double>();
    c.mdri_variance = at(j, "mdri_variance", where).get<double>();
    c.frr = at(j, "frr", where).get<double>();
    c.frr_variance = at(j, "frr_variance", where).get<double>();
    c.cutoff = at(j, "cutoff", where).get<double>();
    try {
        c.validate();
    } catch (const DomainError& e) {
        throw SchemaError(where + ": " + e.what());
    }
    return c;
}

void write_characteristics(const std::filesystem::path& path,
                           const RitaCharacteristics& chars) {
    json j;
    j["mdri"] = chars.mdri;
    j["mdri_variance"] = chars.mdri_variance;
    j["frr"] = chars.frr;
    j["frr_variance"] = chars.frr_variance;
    j["cutoff"] = chars.cutoff;
    save_text(path, j.dump(2) + "\n");
}

ScenarioConfig read_scenario(const std::filesystem::path& path) {
    const json j = parse_json(path);
    const std::string where = path.string();

    ScenarioConfig cfg(phi_from_json(at(j, "assay_truth", where), where + ".assay_truth"));
    cfg.name = j.value("name", path.stem().string());
    cfg.sample_size = at(j, "sample_size", where).get<long>();
    cfg.replicates = j.value("replicates", 1L);
    cfg.seed = at(j, "seed", where).get<std::uint64_t>();
    cfg.level = j.value("level", 0.95);
    cfg.frr_stderr = j.value("frr_stderr", 0.0);
    cfg.fit_degree = j.value("fit_degree", 2);

    const json& ep = at(j, "epidemic", where);
    cfg.epidemic.lambda = at(ep, "lambda", where + ".epidemic").get<double>();
    cfg.epidemic.prevalence = at(ep, "prevalence", where + ".epidemic").get<double>();
    cfg.epidemic.rho = ep.value("rho", 0.0);
    cfg.epidemic.cutoff = ep.value("cutoff", cfg.assay_truth.cutoff());
    cfg.epidemic.t_cs = ep.value("t_cs", 0.0);

    if (j.contains("calibration")) {
        const json& cal = j["calibration"];
        cfg.calibration.n_subjects = cal.value("n_subjects", 60L);
        if (cal.contains("visit_grid"))
            cfg.calibration.visit_grid = cal["visit_grid"].get<std::vector<double>>();
        else
            cfg.calibration.visit_grid = CalibrationDesign::default_grid(
                cfg.assay_truth.cutoff(), cal.value("n_visits", 10));
    } else {
        cfg.calibration.visit_grid =
            CalibrationDesign::default_grid(cfg.assay_truth.cutoff());
    }

    const json& pt = at(j, "prior_testing", where);
    const std::string mech = at(pt, "mechanism", where + ".prior_testing").get<std::string>();
    if (mech == "uniform")
        cfg.prior_testing.mechanism = PriorTestingSpec::Mechanism::uniform;
    else if (mech == "infection_driven")
        cfg.prior_testing.mechanism = PriorTestingSpec::Mechanism::infection_driven;
    else if (mech == "mixed")
        cfg.prior_testing.mechanism = PriorTestingSpec::Mechanism::mixed;
    else
        throw SchemaError(where + ": unknown prior-testing mechanism `" + mech + "`");
    cfg.prior_testing.q = pt.value("q", 0.0);
    cfg.prior_testing.a = pt.value("a", 0.0);
    cfg.prior_testing.b = pt.value("b", 0.0);
    cfg.prior_testing.q_prime = pt.value("q_prime", 0.0);
    cfg.prior_testing.a_prime = pt.value("a_prime", 0.0);
    cfg.prior_testing.b_prime = pt.value("b_prime", 0.0);
    if (pt.contains("delay")) {
        const json& d = pt["delay"];
        cfg.prior_testing.delay.scale = at(d, "scale", where + ".delay").get<double>();
        cfg.prior_testing.delay.shape_d = at(d, "shape_d", where + ".delay").get<double>();
        cfg.prior_testing.delay.power_p = at(d, "power_p", where + ".delay").get<double>();
    }

    if (j.contains("recall_bias") && !j["recall_bias"].is_null()) {
        const json& rb = j["recall_bias"];
        RecallBiasSpec bias;
        bias.time_jitter_sd = rb.value("time_jitter_sd", 0.0);
        bias.nonreport_positive_prob = rb.value("nonreport_positive_prob", 0.0);
        bias.flip_positive_prob = rb.value("flip_positive_prob", 0.0);
        cfg.recall_bias = bias;
    }

    cfg.estimators.clear();
    for (const auto& name : j.value("estimators", std::vector<std::string>{"standard", "enhanced"})) {
        if (name == "standard")
            cfg.estimators.push_back(EstimatorVariant::standard);
        else if (name == "enhanced")
            cfg.estimators.push_back(EstimatorVariant::enhanced);
        else if (name == "enhanced_only_recent")
            cfg.estimators.push_back(EstimatorVariant::enhanced_only_recent);
        else
            throw SchemaError(where + ": unknown estimator `" + name + "`");
    }
    return cfg;
}

void write_scenario(const std::filesystem::path& path, const ScenarioConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    j["sample_size"] = cfg.sample_size;
    j["replicates"] = cfg.replicates;
    j["seed"] = cfg.seed;
    j["level"] = cfg.level;
    j["frr_stderr"] = cfg.frr_stderr;
    j["fit_degree"] = cfg.fit_degree;
    j["assay_truth"] = phi_to_json(cfg.assay_truth);
    j["epidemic"] = {{"lambda", cfg.epidemic.lambda},
                     {"prevalence", cfg.epidemic.prevalence},
                     {"rho", cfg.epidemic.rho},
                     {"cutoff", cfg.epidemic.cutoff},
                     {"t_cs", cfg.epidemic.t_cs}};
    j["calibration"] = {{"n_subjects", cfg.calibration.n_subjects},
                        {"visit_grid", cfg.calibration.visit_grid}};
    const char* mech = "uniform";
    if (cfg.prior_testing.mechanism == PriorTestingSpec::Mechanism::infection_driven)
        mech = "infection_driven";
    if (cfg.prior_testing.mechanism == PriorTestingSpec::Mechanism::mixed) mech = "mixed";
    j["prior_testing"] = {{"mechanism", mech},
                          {"q", cfg.prior_testing.q},
                          {"a", cfg.prior_testing.a},
                          {"b", cfg.prior_testing.b},
                          {"q_prime", cfg.prior_testing.q_prime},
                          {"a_prime", cfg.prior_testing.a_prime},
                          {"b_prime", cfg.prior_testing.b_prime},
                          {"delay",
                           {{"scale", cfg.prior_testing.delay.scale},
                            {"shape_d", cfg.prior_testing.delay.shape_d},
                            {"power_p", cfg.prior_testing.delay.power_p}}}};
    if (cfg.recall_bias)
        j["recall_bias"] = {{"time_jitter_sd", cfg.recall_bias->time_jitter_sd},
                            {"nonreport_positive_prob", cfg.recall_bias->nonreport_positive_prob},
                            {"flip_positive_prob", cfg.recall_bias->flip_positive_prob}};
    std::vector<std::string> est;
    for (auto v : cfg.estimators) est.push_back(variant_name(v));
    j["estimators"] = est;
    save_text(path, j.dump(2) + "\n");
}

std::string metrics_json(const MetricsTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows) {
        json row;
        row["scenario"] = r.scenario;
        row["estimator"] = r.estimator;
        row["replicates_used"] = r.replicates_used;
        row["failures"] = r.failures;
        row["bias"] = r.bias;
        row["se"] = r.se;
        row["see"] = r.see;
        row["mse"] = r.mse;
        row["coverage_pct"] = r.coverage_pct;
        if (std::isnan(r.pct_mse_reduction))
            row["pct_mse_reduction"] = nullptr;
        else
            row["pct_mse_reduction"] = r.pct_mse_reduction;
        row["realized_q_star"] = r.realized_q_star;
        row["flags"] = r.flags;
        rows.push_back(std::move(row));
    }
    return rows.dump(2) + "\n";
}

std::string replicate_estimates_csv(const std::vector<ReplicateEstimate>& rows) {
    std::ostringstream os;
    os << "replicate,estimator,failed,lambda,variance,ci_lower,ci_upper\n";
    for (const auto& r : rows) {
        os << r.replicate << ',' << r.estimator << ',' << (r.failed ? 1 : 0) << ',';
        if (!r.failed)
            os << format_double(r.lambda) << ',' << format_double(r.variance) << ','
               << format_double(r.ci_lower) << ',' << format_double(r.ci_upper);
        else
            os << ",,,";
        os << '\n';
    }
    return os.str();
}

std::string estimates_csv(const std::vector<IncidenceEstimate>& estimates,
                          const Sample& sample, double cutoff) {
    std::ostringstream os;
    os << "method,lambda,variance,ci_lower,ci_upper,n,n_pos,n_rec,n_rec_pt,flags\n";
    for (const auto& e : estimates) {
        os << (e.method == EstimateMethod::standard ? "standard" : "enhanced") << ','
           << format_double(e.lambda) << ',' << format_double(e.variance) << ','
           << format_double(e.ci_lower) << ',' << format_double(e.ci_upper) << ','
           << sample.n() << ',' << sample.n_pos() << ',' << sample.n_rec() << ','
           << sample.n_rec_pt(cutoff) << ',' << e.flags() << '\n';
    }
    return os.str();
}

} // namespace xsinc
