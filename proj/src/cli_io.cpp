#include "medpath/cli_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "medpath/rng.hpp"

namespace medpath {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object())
        throw std::invalid_argument("config: '" + context +
                                    "' must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + key +
                                        "' in " + context);
}

double require_number(const json& j, const std::string& context) {
    if (!j.is_number())
        throw std::invalid_argument("config: '" + context +
                                    "' must be a number");
    return j.get<double>();
}

CovariateTerm parse_term(const json& j, const std::string& context) {
    if (j.is_string()) return {j.get<std::string>(), false};
    check_keys(j, {"name", "time_scaled"}, context);
    CovariateTerm t;
    t.name = j.at("name").get<std::string>();
    t.time_scaled = j.value("time_scaled", false);
    return t;
}

ProcessDesign parse_design(const json& j, const std::string& context) {
    check_keys(j, {"init", "slope", "random_slope"}, context);
    ProcessDesign d;
    for (const auto& t : j.value("init", json::array()))
        d.init_covariates.push_back(parse_term(t, context + ".init"));
    for (const auto& t : j.value("slope", json::array()))
        d.slope_covariates.push_back(parse_term(t, context + ".slope"));
    d.random_slope = j.value("random_slope", false);
    return d;
}

ModelSpec parse_model(const json& j) {
    check_keys(j, {"has_confounder", "delta", "timescale", "processes",
                   "influences"},
               "model");
    ModelSpec spec;
    spec.has_confounder = j.value("has_confounder", false);
    if (j.contains("delta")) spec.delta = require_number(j["delta"], "model.delta");
    if (j.contains("timescale")) {
        const auto ts = j["timescale"].get<std::string>();
        if (ts == "time_in_study")
            spec.timescale = Timescale::TimeInStudy;
        else if (ts == "age")
            spec.timescale = Timescale::Age;
        else
            throw std::invalid_argument(
                "config: unknown timescale '" + ts +
                "' (expected time_in_study or age)");
    }
    const json& procs = j.at("processes");
    check_keys(procs, {"L", "M", "Y"}, "model.processes");
    for (Process p : kAllProcesses) {
        const std::string letter = process_name(p);
        if (procs.contains(letter))
            spec.design(p) =
                parse_design(procs[letter], "model.processes." + letter);
    }
    for (const auto& inf : j.value("influences", json::array())) {
        check_keys(inf, {"edge", "modifiers"}, "model.influences[]");
        InfluenceSpec is;
        is.edge = edge_from_tag(inf.at("edge").get<std::string>());
        for (const auto& m : inf.value("modifiers", json::array()))
            is.modifiers.push_back(m.get<std::string>());
        spec.influences.push_back(std::move(is));
    }
    spec.validate();
    return spec;
}

std::vector<double> parse_times(const json& j, const std::string& context) {
    std::vector<double> out;
    if (!j.is_array())
        throw std::invalid_argument("config: '" + context +
                                    "' must be an array");
    for (const auto& v : j) out.push_back(require_number(v, context + "[]"));
    return out;
}

ScenarioConfig parse_scenario(const json& j, const std::string& exposure) {
    check_keys(j,
               {"preset", "with_confounder", "n_subjects", "delta_gen",
                "delta_fit", "exposure_prob", "t0", "entry_min", "entry_max",
                "visit_offsets", "jitter_sd", "lm_visit_offsets",
                "baseline_probs", "dropout", "theta"},
               "scenario");
    if (!j.contains("preset"))
        throw std::invalid_argument("config: scenario requires 'preset'");
    const auto preset = j["preset"].get<std::string>();
    ScenarioConfig cfg;
    if (!preset.empty() && preset[0] == '1')
        cfg = ScenarioConfig::scenario1(preset,
                                        j.value("with_confounder", true));
    else if (!preset.empty() && preset[0] == '2')
        cfg = ScenarioConfig::scenario2(preset);
    else
        throw std::invalid_argument("config: unknown scenario preset '" +
                                    preset + "'");
    cfg.exposure_name = exposure;
    if (j.contains("n_subjects"))
        cfg.n_subjects = j["n_subjects"].get<int>();
    if (j.contains("delta_gen"))
        cfg.delta_gen = require_number(j["delta_gen"], "scenario.delta_gen");
    if (j.contains("delta_fit"))
        cfg.spec.delta = require_number(j["delta_fit"], "scenario.delta_fit");
    if (j.contains("exposure_prob"))
        cfg.exposure_prob =
            require_number(j["exposure_prob"], "scenario.exposure_prob");
    if (j.contains("t0")) cfg.t0 = require_number(j["t0"], "scenario.t0");
    if (j.contains("entry_min"))
        cfg.entry_min = require_number(j["entry_min"], "scenario.entry_min");
    if (j.contains("entry_max"))
        cfg.entry_max = require_number(j["entry_max"], "scenario.entry_max");
    if (j.contains("visit_offsets"))
        cfg.visit_offsets =
            parse_times(j["visit_offsets"], "scenario.visit_offsets");
    if (j.contains("jitter_sd"))
        cfg.jitter_sd = require_number(j["jitter_sd"], "scenario.jitter_sd");
    if (j.contains("lm_visit_offsets"))
        cfg.lm_visit_offsets =
            parse_times(j["lm_visit_offsets"], "scenario.lm_visit_offsets");
    if (j.contains("baseline_probs")) {
        cfg.baseline_probs.clear();
        for (const auto& [name, p] : j["baseline_probs"].items())
            cfg.baseline_probs[name] =
                require_number(p, "scenario.baseline_probs." + name);
    }
    if (j.contains("dropout")) {
        const json& d = j["dropout"];
        check_keys(d, {"kind", "rate", "quantile"}, "scenario.dropout");
        cfg.dropout.kind = dropout_from_name(d.at("kind").get<std::string>());
        if (d.contains("rate"))
            cfg.dropout.rate =
                require_number(d["rate"], "scenario.dropout.rate");
        if (d.contains("quantile"))
            cfg.dropout.quantile =
                require_number(d["quantile"], "scenario.dropout.quantile");
    }
    if (j.contains("theta")) {
        const ThetaMap map = build_theta_map(cfg.spec);
        for (const auto& [name, v] : j["theta"].items())
            cfg.theta_true(map.index(name)) =
                require_number(v, "scenario.theta." + name);
    }
    cfg.validate();
    return cfg;
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") +
                                    e.what());
    }
    check_keys(j,
               {"model", "exposure", "seed", "scenario", "estimator",
                "contrast", "bootstrap", "replicate"},
               "top level");
    RunConfig cfg;
    cfg.exposure_name = j.value("exposure", std::string("X"));
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("model")) cfg.model = parse_model(j["model"]);
    if (j.contains("scenario"))
        cfg.scenario = parse_scenario(j["scenario"], cfg.exposure_name);

    if (j.contains("estimator")) {
        const json& e = j["estimator"];
        check_keys(e, {"max_iterations", "rel_loglik_tol", "grad_tol", "init"},
                   "estimator");
        if (e.contains("max_iterations"))
            cfg.estimator.max_iterations = e["max_iterations"].get<int>();
        if (e.contains("rel_loglik_tol"))
            cfg.estimator.rel_loglik_tol =
                require_number(e["rel_loglik_tol"], "estimator.rel_loglik_tol");
        if (e.contains("grad_tol"))
            cfg.estimator.grad_tol =
                require_number(e["grad_tol"], "estimator.grad_tol");
        if (e.contains("init")) {
            std::unordered_map<std::string, double> init;
            for (const auto& [name, v] : e["init"].items())
                init[name] = require_number(v, "estimator.init." + name);
            cfg.init_named = std::move(init);
        }
    }

    if (j.contains("contrast")) {
        const json& c = j["contrast"];
        check_keys(c, {"effects", "times", "x", "x_prime", "profile", "t0"},
                   "contrast");
        Contrast ct;
        for (const auto& e : c.value("effects", json::array()))
            ct.effects.push_back(effect_from_name(e.get<std::string>()));
        if (c.contains("times"))
            ct.times = parse_times(c["times"], "contrast.times");
        if (c.contains("x")) ct.x = require_number(c["x"], "contrast.x");
        if (c.contains("x_prime"))
            ct.x_prime = require_number(c["x_prime"], "contrast.x_prime");
        if (c.contains("t0")) ct.t0 = require_number(c["t0"], "contrast.t0");
        if (c.contains("profile")) {
            CovariateProfile p;
            p.exposure_name = cfg.exposure_name;
            p.t0 = ct.t0;
            for (const auto& [name, v] : c["profile"].items())
                p.values[name] =
                    require_number(v, "contrast.profile." + name);
            ct.profile = std::move(p);
        }
        cfg.contrast = std::move(ct);
    }

    if (j.contains("bootstrap")) {
        const json& b = j["bootstrap"];
        check_keys(b, {"replicates", "level", "seed"}, "bootstrap");
        if (b.contains("replicates"))
            cfg.bootstrap.replicates = b["replicates"].get<int>();
        if (b.contains("level"))
            cfg.bootstrap.level = require_number(b["level"], "bootstrap.level");
        if (b.contains("seed"))
            cfg.bootstrap.seed = b["seed"].get<std::uint64_t>();
    }

    if (j.contains("replicate")) {
        const json& r = j["replicate"];
        check_keys(r,
                   {"replicates", "oracle_population", "bootstrap_replicates",
                    "init_at_truth"},
                   "replicate");
        if (r.contains("replicates"))
            cfg.replicate.replicates = r["replicates"].get<int>();
        if (r.contains("oracle_population"))
            cfg.replicate.oracle_population =
                r["oracle_population"].get<int>();
        if (r.contains("bootstrap_replicates"))
            cfg.replicate.bootstrap_replicates =
                r["bootstrap_replicates"].get<int>();
        if (r.contains("init_at_truth"))
            cfg.replicate.init_at_truth = r["init_at_truth"].get<bool>();
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

const ModelSpec& RunConfig::working_model() const {
    if (model) return *model;
    if (scenario) return scenario->spec;
    throw std::invalid_argument(
        "config: requires a 'model' block or a 'scenario' block");
}

RunConfig::Contrast RunConfig::effective_contrast() const {
    Contrast c = contrast.value_or(Contrast{});
    const ModelSpec& spec = working_model();
    if (c.effects.empty()) {
        if (spec.has_confounder)
            c.effects = {EffectKind::TE, EffectKind::PSE_XY,
                         EffectKind::PSE_XMY, EffectKind::PSE_XLMY};
        else
            c.effects = {EffectKind::TE, EffectKind::NDE, EffectKind::NIE};
    }
    const bool age = spec.timescale == Timescale::Age;
    if (c.times.empty())
        c.times = age ? std::vector<double>{65, 70, 75, 80, 85}
                      : std::vector<double>{1, 2, 3, 4, 5};
    if (!contrast || !contrast->profile) {
        if (age && c.t0 == 0.0) c.t0 = scenario ? scenario->t0 : 65.0;
    }
    return c;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open file for writing: " + tmp);
        out << content;
        if (!out)
            throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_strict_double(const std::string& s, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("non-numeric value '" + s + "' in " +
                                    context);
    return v;
}

std::string read_line_trimmed(std::istream& in, bool& ok) {
    std::string line;
    ok = static_cast<bool>(std::getline(in, line));
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
        line.pop_back();
    return line;
}

} // namespace

Dataset read_dataset(const std::string& dir) {
    const fs::path base = fs::path(dir) / "baseline.csv";
    const fs::path longp = fs::path(dir) / "long.csv";
    std::ifstream bin(base);
    if (!bin)
        throw std::invalid_argument("cannot open " + base.string());
    bool ok = false;
    const std::string header = read_line_trimmed(bin, ok);
    if (!ok) throw std::invalid_argument("empty baseline.csv");
    const auto cols = split_csv_line(header);
    if (cols.empty() || cols[0] != "id")
        throw std::invalid_argument(
            "baseline.csv: first column must be 'id'");

    Dataset data;
    std::unordered_map<std::string, size_t> by_id;
    for (;;) {
        const std::string line = read_line_trimmed(bin, ok);
        if (!ok) break;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != cols.size())
            throw std::invalid_argument("baseline.csv: row for id '" +
                                        (fields.empty() ? "" : fields[0]) +
                                        "' has wrong field count");
        SubjectRecord s;
        s.id = fields[0];
        for (size_t c = 1; c < cols.size(); ++c) {
            const double v = parse_strict_double(
                fields[c], "baseline.csv column " + cols[c]);
            if (cols[c] == "t0")
                s.t0 = v;
            else
                s.baseline[cols[c]] = v;
        }
        if (by_id.count(s.id))
            throw std::invalid_argument("baseline.csv: duplicate id '" +
                                        s.id + "'");
        by_id[s.id] = data.subjects.size();
        data.subjects.push_back(std::move(s));
    }

    std::ifstream lin(longp);
    if (!lin)
        throw std::invalid_argument("cannot open " + longp.string());
    const std::string lheader = read_line_trimmed(lin, ok);
    if (!ok || lheader != "id,marker,time,value")
        throw std::invalid_argument(
            "long.csv: header must be 'id,marker,time,value'");
    for (;;) {
        const std::string line = read_line_trimmed(lin, ok);
        if (!ok) break;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4)
            throw std::invalid_argument("long.csv: malformed row '" + line +
                                        "'");
        auto it = by_id.find(fields[0]);
        if (it == by_id.end())
            throw std::invalid_argument("long.csv: id '" + fields[0] +
                                        "' not present in baseline.csv");
        if (fields[1].size() != 1)
            throw std::invalid_argument("long.csv: unknown marker '" +
                                        fields[1] + "'");
        const Process p = process_from_letter(fields[1][0]);
        const double t = parse_strict_double(fields[2], "long.csv time");
        if (fields[3].empty()) continue;  // missing by design
        const double v = parse_strict_double(fields[3], "long.csv value");
        data.subjects[it->second].obs(p).push_back({t, v});
    }
    data.validate();
    return data;
}

void write_dataset(const Dataset& data, const std::string& dir) {
    fs::create_directories(dir);
    std::set<std::string> covs;
    for (const auto& s : data.subjects)
        for (const auto& [name, v] : s.baseline) covs.insert(name);

    std::ostringstream base;
    base << "id,t0";
    for (const auto& c : covs) base << "," << c;
    base << "\n";
    for (const auto& s : data.subjects) {
        base << s.id << "," << format_double(s.t0);
        for (const auto& c : covs) {
            auto it = s.baseline.find(c);
            base << ","
                 << (it == s.baseline.end() ? "0" : format_double(it->second));
        }
        base << "\n";
    }
    atomic_write((fs::path(dir) / "baseline.csv").string(), base.str());

    std::ostringstream lng;
    lng << "id,marker,time,value\n";
    for (const auto& s : data.subjects)
        for (Process p : kAllProcesses)
            for (const auto& o : s.obs(p))
                lng << s.id << "," << process_letter(p) << ","
                    << format_double(o.time) << "," << format_double(o.value)
                    << "\n";
    atomic_write((fs::path(dir) / "long.csv").string(), lng.str());
}

void write_fit_json(const FitResult& fit, const ThetaMap& map,
                    const std::string& path) {
    json j;
    j["names"] = map.names();
    j["theta"] = std::vector<double>(fit.theta_hat.data(),
                                     fit.theta_hat.data() + fit.theta_hat.size());
    j["loglik"] = fit.loglik;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["final_grad_norm"] = fit.final_grad_norm;
    j["message"] = fit.message;
    auto matrix = [](const Eigen::MatrixXd& m) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    j["hessian"] = matrix(fit.hessian);
    j["vcov"] = matrix(fit.vcov);
    atomic_write(path, j.dump(2) + "\n");
}

FitResult read_fit_json(const std::string& path, const ThetaMap& map) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open fit file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("fit file: invalid JSON: ") +
                                    e.what());
    }
    const auto names = j.at("names").get<std::vector<std::string>>();
    if (names != map.names())
        throw std::invalid_argument(
            "fit file: parameter names do not match the configured model");
    FitResult fit;
    const auto theta = j.at("theta").get<std::vector<double>>();
    if (theta.size() != names.size())
        throw std::invalid_argument("fit file: theta length mismatch");
    fit.theta_hat = Eigen::Map<const Eigen::VectorXd>(
        theta.data(), static_cast<Eigen::Index>(theta.size()));
    fit.loglik = j.at("loglik").get<double>();
    fit.converged = j.at("converged").get<bool>();
    fit.iterations = j.value("iterations", 0);
    fit.final_grad_norm = j.value("final_grad_norm", 0.0);
    fit.message = j.value("message", std::string());
    auto matrix = [&](const json& rows) {
        const auto n = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd m(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& row = rows.at(static_cast<size_t>(r));
            if (static_cast<Eigen::Index>(row.size()) != n)
                throw std::invalid_argument("fit file: non-square matrix");
            for (Eigen::Index c = 0; c < n; ++c)
                m(r, c) = row.at(static_cast<size_t>(c)).get<double>();
        }
        return m;
    };
    if (j.contains("hessian")) fit.hessian = matrix(j["hessian"]);
    if (j.contains("vcov")) fit.vcov = matrix(j["vcov"]);
    return fit;
}

void write_effects_csv(const std::vector<ContrastSeries>& series,
                       const std::string& path) {
    std::ostringstream out;
    out << "effect,time,estimate,ci_lower,ci_upper\n";
    for (const auto& s : series) {
        for (size_t k = 0; k < s.times.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            out << effect_name(s.kind) << "," << format_double(s.times[k])
                << "," << format_double(s.estimate(i)) << ",";
            if (s.ci_lower) out << format_double((*s.ci_lower)(i));
            out << ",";
            if (s.ci_upper) out << format_double((*s.ci_upper)(i));
            out << "\n";
        }
    }
    atomic_write(path, out.str());
}

void write_report_csv(const ReplicationReport& report,
                      const std::string& path) {
    std::ostringstream out;
    out << "effect,time,truth,mean_rel_bias_pct,coverage_pct,replicates,"
           "failures\n";
    for (size_t e = 0; e < report.effects.size(); ++e) {
        const auto ei = static_cast<Eigen::Index>(e);
        const auto& truth = report.truth.at(report.effects[e]);
        for (size_t t = 0; t < report.times.size(); ++t) {
            const auto ti = static_cast<Eigen::Index>(t);
            out << effect_name(report.effects[e]) << ","
                << format_double(report.times[t]) << ","
                << format_double(truth(ti)) << ","
                << format_double(report.mean_rel_bias_pct(ei, ti)) << ","
                << format_double(report.coverage_pct(ei, ti)) << ","
                << report.replicates << "," << report.failures << "\n";
        }
    }
    atomic_write(path, out.str());
}

void write_truth_json(const TruthHandle& truth, const std::string& path) {
    json j;
    j["population"] = truth.population;
    j["times"] = truth.times;
    json effects = json::object();
    for (EffectKind e : truth.effects) {
        const auto& tr = truth.truth.at(e);
        const auto& se = truth.mc_se.at(e);
        json entry;
        entry["truth"] = std::vector<double>(tr.data(), tr.data() + tr.size());
        entry["mc_se"] = std::vector<double>(se.data(), se.data() + se.size());
        effects[effect_name(e)] = std::move(entry);
    }
    j["effects"] = std::move(effects);
    atomic_write(path, j.dump(2) + "\n");
}

namespace {

void apply_threads_env() {
    if (const char* env = std::getenv("MEDPATH_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) Eigen::setNbThreads(n);
    }
}

Eigen::VectorXd initial_theta(const RunConfig& cfg, const ModelSpec& spec,
                              const ThetaMap& map, const Dataset& data) {
    Eigen::VectorXd init = default_init(spec, map, data);
    if (cfg.init_named)
        for (const auto& [name, v] : *cfg.init_named)
            init(map.index(name)) = v;
    return init;
}

ChiBarMixture parse_mixture(const std::string& text) {
    // "df:weight,df:weight" e.g. "0:0.5,1:0.5"
    ChiBarMixture mix;
    std::istringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument(
                "mixture: expected df:weight entries, got '" + part + "'");
        mix.components.push_back(
            {std::stoi(part.substr(0, colon)),
             parse_strict_double(part.substr(colon + 1), "mixture weight")});
    }
    mix.validate();
    return mix;
}

int run_simulate(const RunConfig& cfg, const std::string& out_dir,
                 std::uint64_t seed) {
    if (!cfg.scenario)
        throw std::invalid_argument("simulate: config requires a scenario");
    const Dataset data = generate_dataset(*cfg.scenario, seed);
    write_dataset(data, out_dir);
    const auto contrast = cfg.effective_contrast();
    const TruthHandle truth = true_effects_oracle(
        *cfg.scenario, contrast.times, contrast.x, contrast.x_prime,
        cfg.replicate.oracle_population, derive_seed(seed, 0x6f7261636cULL));
    write_truth_json(truth, (fs::path(out_dir) / "truth.json").string());
    std::printf("wrote %zu subjects to %s\n", data.subjects.size(),
                out_dir.c_str());
    return 0;
}

int run_fit(const RunConfig& cfg, const std::string& data_dir,
            const std::string& out_path) {
    const ModelSpec& spec = cfg.working_model();
    const ThetaMap map = build_theta_map(spec);
    const Dataset data = read_dataset(data_dir);
    FitOptions opts = cfg.estimator;
    opts.init = initial_theta(cfg, spec, map, data);
    const FitResult fit = fit_mle(spec, map, data, opts);
    write_fit_json(fit, map, out_path);
    std::printf("loglik %s converged %d iterations %d\n",
                format_double(fit.loglik).c_str(), fit.converged ? 1 : 0,
                fit.iterations);
    return fit.converged ? 0 : 2;
}

int run_effects(const RunConfig& cfg, const std::string& fit_path,
                const std::string& data_dir, const std::string& out_path) {
    const ModelSpec& spec = cfg.working_model();
    const ThetaMap map = build_theta_map(spec);
    const FitResult fit = read_fit_json(fit_path, map);
    const auto contrast = cfg.effective_contrast();
    std::optional<Dataset> data;
    if (!contrast.profile) {
        if (data_dir.empty())
            throw std::invalid_argument(
                "effects: marginal contrasts need --data");
        data = read_dataset(data_dir);
    }
    std::vector<ContrastSeries> series;
    const std::uint64_t seed = cfg.bootstrap.seed.value_or(cfg.seed);
    for (EffectKind kind : contrast.effects) {
        EffectRequest req;
        req.kind = kind;
        req.x = contrast.x;
        req.x_prime = contrast.x_prime;
        req.profile = contrast.profile;
        req.exposure_name = cfg.exposure_name;
        req.t0 = contrast.t0;
        series.push_back(bootstrap_contrasts(
            spec, map, fit, req, contrast.times, data ? &*data : nullptr,
            cfg.bootstrap.replicates, seed, cfg.bootstrap.level));
    }
    write_effects_csv(series, out_path);
    std::printf("wrote %zu contrast series to %s\n", series.size(),
                out_path.c_str());
    return 0;
}

int run_replicate(const RunConfig& cfg, const std::string& out_path,
                  std::uint64_t seed) {
    if (!cfg.scenario)
        throw std::invalid_argument("replicate: config requires a scenario");
    const auto contrast = cfg.effective_contrast();
    ReplicateOptions opts;
    opts.bootstrap_R = cfg.replicate.bootstrap_replicates;
    opts.level = cfg.bootstrap.level;
    opts.fit = cfg.estimator;
    if (cfg.replicate.init_at_truth) opts.fit.init = cfg.scenario->theta_true;
    opts.oracle_population = cfg.replicate.oracle_population;
    opts.x = contrast.x;
    opts.x_prime = contrast.x_prime;
    const ReplicationReport report = replicate_study(
        *cfg.scenario, cfg.replicate.replicates, contrast.times, opts, seed);
    write_report_csv(report, out_path);
    std::printf("replicates %d failures %d -> %s\n", report.replicates,
                report.failures, out_path.c_str());
    return 0;
}

double read_loglik(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open fit file " + path);
    json j;
    in >> j;
    return j.at("loglik").get<double>();
}

} // namespace

int cli_dispatch(int argc, const char* const* argv) {
    apply_threads_env();
    CLI::App app{"continuous-time mediation analysis for longitudinal data"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_dir, fit_path;
    std::string fit_null_path, fit_alt_path, mixture_text;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    double statistic = -1.0;
    int k = 0, k_prime = 1;
    bool uncorrelated = false;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
            "--seed",
            [&](const std::uint64_t& v) {
                seed_flag = v;
                seed_given = true;
            },
            "override the config seed");
    };

    auto* sim = app.add_subcommand("simulate", "generate a scenario dataset");
    sim->add_option("--config", config_path, "JSON config")->required();
    sim->add_option("--out", out_path, "output directory")->required();
    add_seed(sim);

    auto* fit = app.add_subcommand("fit", "maximum-likelihood fit");
    fit->add_option("--config", config_path, "JSON config")->required();
    fit->add_option("--data", data_dir, "dataset directory")->required();
    fit->add_option("--out", out_path, "output fit JSON")->required();

    auto* eff = app.add_subcommand("effects", "causal contrasts with bands");
    eff->add_option("--config", config_path, "JSON config")->required();
    eff->add_option("--fit", fit_path, "fit JSON")->required();
    eff->add_option("--data", data_dir, "dataset directory (for marginal)");
    eff->add_option("--out", out_path, "output CSV")->required();

    auto* rep = app.add_subcommand("replicate", "replication harness");
    rep->add_option("--config", config_path, "JSON config")->required();
    rep->add_option("--out", out_path, "output report CSV")->required();
    add_seed(rep);

    auto* bt = app.add_subcommand("boundary-test",
                                  "one-sided variance-component test");
    bt->add_option("--statistic", statistic, "observed statistic");
    bt->add_option("--mixture", mixture_text,
                   "chi-bar mixture as df:weight[,df:weight...]");
    bt->add_option("--fit-null", fit_null_path, "null fit JSON");
    bt->add_option("--fit-alt", fit_alt_path, "alternative fit JSON");
    bt->add_option("--k", k, "correlated random effects under the null");
    bt->add_option("--k-prime", k_prime, "random effects added");
    bt->add_flag("--uncorrelated", uncorrelated,
                 "added effects uncorrelated on a diagonal-D null");

    auto* ver = app.add_subcommand("version", "print version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (ver->parsed()) {
            std::printf("medpath 1.0.0\n");
            return 0;
        }
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
        const std::uint64_t seed = seed_given ? seed_flag : cfg.seed;
        if (sim->parsed()) return run_simulate(cfg, out_path, seed);
        if (fit->parsed()) return run_fit(cfg, data_dir, out_path);
        if (eff->parsed())
            return run_effects(cfg, fit_path, data_dir, out_path);
        if (rep->parsed()) return run_replicate(cfg, out_path, seed);
        if (bt->parsed()) {
            BoundaryTestResult res;
            if (!fit_null_path.empty() || !fit_alt_path.empty()) {
                if (fit_null_path.empty() || fit_alt_path.empty())
                    throw std::invalid_argument(
                        "boundary-test: both --fit-null and --fit-alt are "
                        "required");
                res = lrt_boundary(read_loglik(fit_null_path),
                                   read_loglik(fit_alt_path), k, k_prime,
                                   !uncorrelated);
            } else {
                if (statistic < 0.0 || mixture_text.empty())
                    throw std::invalid_argument(
                        "boundary-test: give --statistic and --mixture, or "
                        "two fit files");
                res.statistic = statistic;
                res.mixture = parse_mixture(mixture_text);
                res.p_value = chibar_pvalue(statistic, res.mixture);
            }
            std::printf("statistic %s\np_value %s\n",
                        format_double(res.statistic).c_str(),
                        format_double(res.p_value).c_str());
            return 0;
        }
        throw std::invalid_argument("no subcommand");
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    }
}

} // namespace medpath
