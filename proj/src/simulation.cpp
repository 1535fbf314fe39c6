#include "medpath/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "medpath/rng.hpp"

namespace medpath {

std::string dropout_name(DropoutKind k) {
    switch (k) {
    case DropoutKind::None: return "none";
    case DropoutKind::MCAR: return "mcar";
    case DropoutKind::MAR: return "mar";
    case DropoutKind::MNAR: return "mnar";
    }
    throw std::logic_error("invalid dropout kind");
}

DropoutKind dropout_from_name(const std::string& name) {
    for (DropoutKind k : {DropoutKind::None, DropoutKind::MCAR,
                          DropoutKind::MAR, DropoutKind::MNAR})
        if (dropout_name(k) == name) return k;
    throw std::invalid_argument("unknown dropout mechanism: " + name);
}

void DropoutSpec::validate() const {
    if (kind == DropoutKind::MCAR && !(rate >= 0.0 && rate <= 1.0))
        throw std::invalid_argument("dropout rate must be in [0,1]");
    if ((kind == DropoutKind::MAR || kind == DropoutKind::MNAR) &&
        !(quantile > 0.0 && quantile < 1.0))
        throw std::invalid_argument("dropout quantile must be in (0,1)");
}

void ScenarioConfig::validate() const {
    spec.validate();
    dropout.validate();
    if (n_subjects < 1)
        throw std::invalid_argument("n_subjects must be >= 1");
    if (delta_gen <= 0.0)
        throw std::invalid_argument("delta_gen must be > 0");
    if (visit_offsets.empty())
        throw std::invalid_argument("visit_offsets must be non-empty");
    if (!std::is_sorted(visit_offsets.begin(), visit_offsets.end()))
        throw std::invalid_argument("visit_offsets must be increasing");
    if (entry_max < entry_min)
        throw std::invalid_argument("entry_max must be >= entry_min");
    for (const auto& [name, p] : baseline_probs)
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("baseline probability for '" + name +
                                        "' must be in [0,1]");
}

namespace {

ProcessDesign xs_design(std::vector<std::string> names) {
    ProcessDesign d;
    for (auto& n : names) {
        d.init_covariates.push_back({n, false});
        d.slope_covariates.push_back({n, false});
    }
    d.random_slope = true;
    return d;
}

} // namespace

ModelSpec scenario1_spec(bool with_confounder) {
    ModelSpec spec;
    spec.has_confounder = with_confounder;
    spec.delta = 0.1;
    spec.timescale = Timescale::TimeInStudy;
    if (with_confounder) spec.design_L = xs_design({"intercept", "X"});
    spec.design_M = xs_design({"intercept", "X"});
    spec.design_Y = xs_design({"intercept", "X"});
    if (with_confounder) {
        spec.influences = {{Edge::LtoM, {}}, {Edge::LtoY, {}}, {Edge::MtoY, {}}};
    } else {
        spec.influences = {{Edge::MtoY, {}}};
    }
    spec.validate();
    return spec;
}

Eigen::VectorXd scenario1_truth(bool with_confounder) {
    const ThetaMap map = build_theta_map(scenario1_spec(with_confounder));
    if (with_confounder)
        return map.from_named({
            {"beta.L.intercept", 0.5}, {"beta.L.X", 1.8},
            {"beta.M.intercept", 0.2}, {"beta.M.X", 0.9},
            {"beta.Y.intercept", 0.6}, {"beta.Y.X", 1.5},
            {"gamma.L.intercept", 0.1}, {"gamma.L.X", 0.2},
            {"gamma.M.intercept", 0.2}, {"gamma.M.X", 0.8},
            {"gamma.Y.intercept", 0.8}, {"gamma.Y.X", 0.4},
            // slope SDs 1, 2, 3; level factor rows (1), (0.2, 2), (0.1, 0.1, 3)
            {"chol.1", 1.0}, {"chol.3", 2.0}, {"chol.5", 3.0},
            {"chol.7", 1.0}, {"chol.8", 0.2}, {"chol.9", 0.1},
            {"chol.10", 2.0}, {"chol.11", 0.1}, {"chol.12", 3.0},
            {"alpha.ML.0", 0.3}, {"alpha.YL.0", 0.4}, {"alpha.YM.0", 0.5},
            {"sigma.L", 0.3}, {"sigma.M", 0.6}, {"sigma.Y", 0.2},
        });
    return map.from_named({
        {"beta.M.intercept", 0.5}, {"beta.M.X", 1.8},
        {"beta.Y.intercept", 0.6}, {"beta.Y.X", 1.5},
        {"gamma.M.intercept", 0.1}, {"gamma.M.X", 0.2},
        {"gamma.Y.intercept", 0.8}, {"gamma.Y.X", 0.4},
        {"chol.1", 1.0}, {"chol.3", 2.0},
        {"chol.5", 1.0}, {"chol.6", 0.1}, {"chol.7", 3.0},
        {"alpha.YM.0", 0.4},
        {"sigma.M", 0.3}, {"sigma.Y", 0.2},
    });
}

ModelSpec scenario2_spec() {
    ModelSpec spec;
    spec.has_confounder = true;
    spec.delta = 1.0;
    spec.timescale = Timescale::Age;
    spec.design_L = xs_design({"intercept", "X", "C"});
    spec.design_M = xs_design({"intercept", "X", "C"});
    spec.design_Y = xs_design({"intercept", "X", "C"});
    spec.influences = {{Edge::LtoM, {}}, {Edge::LtoY, {}}, {Edge::MtoY, {}}};
    spec.validate();
    return spec;
}

Eigen::VectorXd scenario2_truth() {
    const ThetaMap map = build_theta_map(scenario2_spec());
    return map.from_named({
        {"beta.L.intercept", -0.20}, {"beta.L.X", 0.09}, {"beta.L.C", 0.01},
        {"beta.M.intercept", 6.12}, {"beta.M.X", -0.10}, {"beta.M.C", -0.07},
        {"beta.Y.intercept", 0.53}, {"beta.Y.X", -0.06}, {"beta.Y.C", -0.00},
        {"gamma.L.intercept", -0.16}, {"gamma.L.X", -0.01}, {"gamma.L.C", 0.00},
        {"gamma.M.intercept", -0.15}, {"gamma.M.X", 0.02}, {"gamma.M.C", 0.00},
        {"gamma.Y.intercept", 0.10}, {"gamma.Y.X", -0.01}, {"gamma.Y.C", -0.00},
        {"chol.1", 0.03}, {"chol.2", -0.00}, {"chol.3", -0.08},
        {"chol.4", 0.06}, {"chol.5", -0.04}, {"chol.6", -0.02},
        {"chol.7", 0.86}, {"chol.8", 0.04}, {"chol.9", 0.10},
        {"chol.10", 1.04}, {"chol.11", 0.00}, {"chol.12", 0.80},
        {"alpha.ML.0", -0.03}, {"alpha.YL.0", 0.01}, {"alpha.YM.0", -0.01},
        {"sigma.L", 0.22}, {"sigma.M", 0.48}, {"sigma.Y", -0.51},
    });
}

ScenarioConfig ScenarioConfig::scenario1(const std::string& id,
                                         bool with_confounder) {
    if (id != "1A" && id != "1B" && id != "1C" && id != "1D" && id != "1E")
        throw std::invalid_argument("scenario1: unknown id " + id);
    ScenarioConfig cfg;
    cfg.id = id;
    cfg.spec = scenario1_spec(with_confounder);
    cfg.theta_true = scenario1_truth(with_confounder);
    cfg.n_subjects = (id == "1C") ? 250 : 500;
    cfg.delta_gen = (id == "1B") ? 0.05 : 0.1;
    cfg.exposure_prob = 0.6;
    cfg.t0 = 0.0;
    cfg.visit_offsets = {0, 1, 2, 3, 4, 5};
    cfg.jitter_sd = 0.05;
    if (id == "1E") {
        cfg.dropout.kind = DropoutKind::None;
    } else {
        cfg.dropout.kind = DropoutKind::MCAR;
        cfg.dropout.rate = (id == "1D") ? 0.20 : 0.10;
    }
    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::scenario2(const std::string& id) {
    if (id != "2A" && id != "2B" && id != "2C" && id != "2D")
        throw std::invalid_argument("scenario2: unknown id " + id);
    ScenarioConfig cfg;
    cfg.id = id;
    cfg.spec = scenario2_spec();
    cfg.theta_true = scenario2_truth();
    cfg.n_subjects = 500;
    cfg.delta_gen = 1.0;
    cfg.exposure_prob = 0.6;
    cfg.t0 = 65.0;
    cfg.entry_min = 65.0;
    cfg.entry_max = 75.0;
    cfg.visit_offsets = {0, 2, 4, 7, 10, 13, 15, 17, 20};
    cfg.jitter_sd = 0.5;
    cfg.baseline_probs = {{"C", 0.4}};
    if (id == "2A") {
        cfg.dropout.kind = DropoutKind::MCAR;
        cfg.dropout.rate = 0.10;
    } else if (id == "2B") {
        cfg.lm_visit_offsets = {0, 4, 10};
        cfg.dropout.kind = DropoutKind::None;
    } else {
        cfg.dropout.kind = (id == "2C") ? DropoutKind::MAR : DropoutKind::MNAR;
        cfg.dropout.quantile = 0.75;
    }
    cfg.validate();
    return cfg;
}

namespace {

Dataset generate_core(const ScenarioConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.theta_true.size() == 0)
        throw std::invalid_argument("generate: theta_true not set");
    ModelSpec gen_spec = cfg.spec;
    gen_spec.delta = cfg.delta_gen;
    const ThetaMap map = build_theta_map(gen_spec);
    if (cfg.theta_true.size() != map.dim())
        throw std::invalid_argument("generate: theta_true has wrong dimension");
    const auto& re = map.effects();
    const Eigen::MatrixXd A = re.factor(map.chol(cfg.theta_true));
    const int q = re.dim();
    std::array<double, 3> sigma{0.0, 0.0, 0.0};
    for (Process p : gen_spec.processes())
        sigma[static_cast<size_t>(p)] =
            std::sqrt(map.sigma2(cfg.theta_true, p));

    const bool restrict_lm = !cfg.lm_visit_offsets.empty();
    auto lm_scheduled = [&](double offset) {
        if (!restrict_lm) return true;
        for (double o : cfg.lm_visit_offsets)
            if (std::abs(o - offset) < 1e-9) return true;
        return false;
    };

    Dataset data;
    data.subjects.reserve(static_cast<size_t>(cfg.n_subjects));
    for (int i = 0; i < cfg.n_subjects; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        SubjectRecord s;
        s.id = "s" + std::to_string(i + 1);
        s.t0 = cfg.t0;
        s.baseline[cfg.exposure_name] =
            unif(rng) < cfg.exposure_prob ? 1.0 : 0.0;
        for (const auto& [name, p] : cfg.baseline_probs)
            s.baseline[name] = unif(rng) < p ? 1.0 : 0.0;
        const double entry =
            cfg.entry_max > cfg.entry_min
                ? cfg.entry_min + (cfg.entry_max - cfg.entry_min) * unif(rng)
                : cfg.entry_min;

        // shared jittered visit times across markers at each planned visit
        std::vector<std::pair<double, double>> visits;  // (offset, time)
        for (double o : cfg.visit_offsets) {
            double t = cfg.t0 + (entry - cfg.entry_min) + o;
            if (cfg.jitter_sd > 0.0) t += cfg.jitter_sd * gauss(rng);
            visits.emplace_back(o, std::max(t, cfg.t0));
        }
        for (const auto& [offset, t] : visits) {
            for (Process p : gen_spec.processes()) {
                if (p != Process::Y && !lm_scheduled(offset)) continue;
                s.obs(p).push_back({t, 0.0});
            }
        }

        // latent paths under the subject's own random effects
        Eigen::VectorXd z(q);
        for (int k = 0; k < q; ++k) z(k) = gauss(rng);
        const Eigen::VectorXd b = A * z;
        const PreparedSubject ps = PreparedSubject::prepare(gen_spec, map, s);
        const LatentAffineBasis basis =
            propagate_basis(gen_spec, map, cfg.theta_true, ps);
        for (Process p : gen_spec.processes()) {
            auto& obs = s.obs(p);
            for (auto& o : obs) {
                const int node = ps.grid.snap(o.time);
                o.value = basis.value_at(p, node, b) +
                          sigma[static_cast<size_t>(p)] * gauss(rng);
            }
        }
        data.subjects.push_back(std::move(s));
    }
    return apply_dropout(data, cfg.dropout, derive_seed(seed, 0x64726f70ULL));
}

} // namespace

Dataset generate_scenario1(const ScenarioConfig& cfg, std::uint64_t seed) {
    return generate_core(cfg, seed);
}

Dataset generate_scenario2(const ScenarioConfig& cfg, std::uint64_t seed) {
    return generate_core(cfg, seed);
}

Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t seed) {
    return generate_core(cfg, seed);
}

namespace {

double empirical_quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i0 = static_cast<size_t>(std::floor(pos));
    const auto i1 = std::min(i0 + 1, v.size() - 1);
    const double w = pos - static_cast<double>(i0);
    return (1.0 - w) * v[i0] + w * v[i1];
}

void truncate_after(SubjectRecord& s, double cutoff, bool inclusive) {
    for (Process p : kAllProcesses) {
        auto& obs = s.obs(p);
        obs.erase(std::remove_if(obs.begin(), obs.end(),
                                 [&](const Observation& o) {
                                     return inclusive ? o.time >= cutoff
                                                      : o.time > cutoff;
                                 }),
                  obs.end());
    }
}

} // namespace

Dataset apply_dropout(const Dataset& data, const DropoutSpec& mechanism,
                      std::uint64_t seed) {
    mechanism.validate();
    if (mechanism.kind == DropoutKind::None) return data;
    Dataset out = data;

    if (mechanism.kind == DropoutKind::MCAR) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::uint64_t idx = 0;
        for (auto& s : out.subjects) {
            Rng rng(derive_seed(seed, idx++));
            if (unif(rng) >= mechanism.rate) continue;
            double lo = s.t0, hi = s.t0;
            for (Process p : kAllProcesses)
                for (const auto& o : s.obs(p)) hi = std::max(hi, o.time);
            const double cutoff = lo + (hi - lo) * unif(rng);
            truncate_after(s, cutoff, false);
        }
        return out;
    }

    // MAR / MNAR: replicate-level threshold on the observed outcome
    std::vector<double> yvals;
    for (const auto& s : out.subjects)
        for (const auto& o : s.obs(Process::Y)) yvals.push_back(o.value);
    if (yvals.empty()) return out;
    const double threshold = empirical_quantile(yvals, mechanism.quantile);

    for (auto& s : out.subjects) {
        auto yobs = s.obs(Process::Y);
        std::sort(yobs.begin(), yobs.end(),
                  [](const Observation& a, const Observation& b) {
                      return a.time < b.time;
                  });
        for (const auto& o : yobs) {
            if (o.value > threshold) {
                truncate_after(s, o.time,
                               mechanism.kind == DropoutKind::MNAR);
                break;
            }
        }
    }
    return out;
}

namespace {

std::vector<EffectKind> scenario_effects(const ModelSpec& spec) {
    if (spec.has_confounder)
        return {EffectKind::TE, EffectKind::PSE_XY, EffectKind::PSE_XMY,
                EffectKind::PSE_XLMY};
    return {EffectKind::TE, EffectKind::NDE, EffectKind::NIE};
}

} // namespace

TruthHandle true_effects_oracle(const ScenarioConfig& cfg,
                                const std::vector<double>& times, double x,
                                double x_prime, int population,
                                std::uint64_t seed) {
    cfg.validate();
    if (population < 1000)
        throw std::invalid_argument("true_effects_oracle: population >= 1000");
    if (times.empty())
        throw std::invalid_argument("true_effects_oracle: times non-empty");
    ModelSpec gen_spec = cfg.spec;
    gen_spec.delta = cfg.delta_gen;
    const ThetaMap map = build_theta_map(gen_spec);
    const auto& re = map.effects();
    const Eigen::MatrixXd A = re.factor(map.chol(cfg.theta_true));
    const int q = re.dim();
    const auto nt = static_cast<Eigen::Index>(times.size());

    // regimes needed for the decomposition, in a fixed order
    std::vector<ExposureRegime> regimes;
    const bool with_L = gen_spec.has_confounder;
    if (with_L) {
        auto r = [](double a, double b, double c) {
            ExposureRegime e;
            e.x_Y = a;
            e.x_L = b;
            e.x_M = c;
            return e;
        };
        regimes = {r(x, x, x), r(x, x_prime, x), r(x, x_prime, x_prime),
                   r(x_prime, x_prime, x_prime)};
    } else {
        auto r = [](double a, double b) {
            ExposureRegime e;
            e.x_Y = a;
            e.x_M = b;
            return e;
        };
        regimes = {r(x, x), r(x, x_prime), r(x_prime, x_prime)};
    }

    // (mean, Y-loading) per regime, cached per distinct baseline profile
    struct RegimeBasis {
        Eigen::VectorXd mean;
        Eigen::MatrixXd phi;
    };
    std::map<std::vector<double>, std::vector<RegimeBasis>> cache;
    const auto yi = static_cast<size_t>(Process::Y);
    double t_max = cfg.t0;
    for (double t : times) t_max = std::max(t_max, t);
    const TimeGrid grid = TimeGrid::spanning(cfg.t0, t_max, cfg.delta_gen);

    auto bases_for = [&](const std::map<std::string, double>& baseline)
        -> const std::vector<RegimeBasis>& {
        std::vector<double> key;
        for (const auto& [k, v] : baseline) key.push_back(v);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        CovariateProfile profile;
        profile.values = baseline;
        profile.exposure_name = cfg.exposure_name;
        profile.t0 = cfg.t0;
        std::vector<RegimeBasis> rbs;
        for (const auto& regime : regimes) {
            const LatentAffineBasis basis = counterfactual_basis(
                gen_spec, map, cfg.theta_true, regime, profile, grid);
            RegimeBasis rb;
            rb.mean.resize(nt);
            rb.phi.resize(nt, q);
            for (Eigen::Index k = 0; k < nt; ++k) {
                const int node = grid.snap(times[static_cast<size_t>(k)]);
                rb.mean(k) = basis.mean[yi](node);
                rb.phi.row(k) = basis.loading[yi].row(node);
            }
            rbs.push_back(std::move(rb));
        }
        return cache.emplace(std::move(key), std::move(rbs)).first->second;
    };

    TruthHandle out;
    out.effects = scenario_effects(gen_spec);
    out.times = times;
    out.population = population;

    const size_t ne = out.effects.size();
    std::vector<Eigen::VectorXd> sum(ne, Eigen::VectorXd::Zero(nt));
    std::vector<Eigen::VectorXd> sumsq(ne, Eigen::VectorXd::Zero(nt));

    Eigen::VectorXd z(q), b(q);
    std::vector<Eigen::VectorXd> y(regimes.size());
    for (int i = 0; i < population; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::map<std::string, double> baseline;
        for (const auto& [name, p] : cfg.baseline_probs)
            baseline[name] = unif(rng) < p ? 1.0 : 0.0;
        const auto& rbs = bases_for(baseline);
        for (int k = 0; k < q; ++k) z(k) = gauss(rng);
        b.noalias() = A * z;
        for (size_t r = 0; r < regimes.size(); ++r)
            y[r] = rbs[r].mean + rbs[r].phi * b;

        for (size_t e = 0; e < ne; ++e) {
            Eigen::VectorXd contrast;
            switch (out.effects[e]) {
            case EffectKind::TE:
                contrast = y.front() - y.back();
                break;
            case EffectKind::NDE:  // m(x,x') - m(x',x')
                contrast = y[1] - y[2];
                break;
            case EffectKind::NIE:  // m(x,x) - m(x,x')
                contrast = y[0] - y[1];
                break;
            case EffectKind::PSE_XY:  // m(x,x',x') - m(x',x',x')
                contrast = y[2] - y[3];
                break;
            case EffectKind::PSE_XMY:  // m(x,x',x) - m(x,x',x')
                contrast = y[1] - y[2];
                break;
            case EffectKind::PSE_XLMY:  // m(x,x,x) - m(x,x',x)
                contrast = y[0] - y[1];
                break;
            }
            sum[e] += contrast;
            sumsq[e] += contrast.cwiseProduct(contrast);
        }
    }

    for (size_t e = 0; e < ne; ++e) {
        const Eigen::VectorXd mean = sum[e] / population;
        out.truth[out.effects[e]] = mean;
        if (population > 1) {
            const Eigen::VectorXd var =
                (sumsq[e] - population * mean.cwiseProduct(mean)) /
                (population - 1);
            out.mc_se[out.effects[e]] =
                (var.cwiseMax(0.0) / population).cwiseSqrt();
        } else {
            out.mc_se[out.effects[e]] = Eigen::VectorXd::Zero(nt);
        }
    }
    return out;
}

ReplicationReport replicate_study(const ScenarioConfig& cfg, int K,
                                  const std::vector<double>& times,
                                  const ReplicateOptions& opts,
                                  std::uint64_t seed) {
    if (K < 1) throw std::invalid_argument("replicate_study: K >= 1");
    const TruthHandle truth =
        true_effects_oracle(cfg, times, opts.x, opts.x_prime,
                            opts.oracle_population,
                            derive_seed(seed, 0x6f7261636cULL));

    const ThetaMap map = build_theta_map(cfg.spec);
    const auto nt = static_cast<Eigen::Index>(times.size());
    const auto ne = static_cast<Eigen::Index>(truth.effects.size());

    ReplicationReport report;
    report.effects = truth.effects;
    report.times = times;
    for (EffectKind e : truth.effects) report.truth[e] = truth.truth.at(e);
    Eigen::MatrixXd rb_sum = Eigen::MatrixXd::Zero(ne, nt);
    Eigen::MatrixXd cover_sum = Eigen::MatrixXd::Zero(ne, nt);

    for (int k = 0; k < K; ++k) {
        const std::uint64_t rep_seed =
            derive_seed(seed, static_cast<std::uint64_t>(k));
        try {
            const Dataset data = generate_dataset(cfg, rep_seed);
            const FitResult fit = fit_mle(cfg.spec, map, data, opts.fit);
            if (!fit.converged)
                throw std::runtime_error("replicate fit: " + fit.message);
            Eigen::MatrixXd rb_rep = Eigen::MatrixXd::Zero(ne, nt);
            Eigen::MatrixXd cover_rep = Eigen::MatrixXd::Zero(ne, nt);
            for (Eigen::Index e = 0; e < ne; ++e) {
                EffectRequest req;
                req.kind = truth.effects[static_cast<size_t>(e)];
                req.x = opts.x;
                req.x_prime = opts.x_prime;
                req.exposure_name = cfg.exposure_name;
                req.t0 = cfg.t0;
                const ContrastSeries cs = bootstrap_contrasts(
                    cfg.spec, map, fit, req, times, &data, opts.bootstrap_R,
                    derive_seed(rep_seed, 0x626f6f74ULL), opts.level);
                const Eigen::VectorXd& tr = truth.truth.at(req.kind);
                for (Eigen::Index t = 0; t < nt; ++t) {
                    // relative bias in percent; at a structurally zero truth
                    // fall back to absolute bias x100 (documented convention)
                    const double denom =
                        std::abs(tr(t)) > 1e-12 ? tr(t) : 1.0;
                    rb_rep(e, t) = 100.0 * (cs.estimate(t) - tr(t)) / denom;
                    const bool covered = (*cs.ci_lower)(t) <= tr(t) &&
                                         tr(t) <= (*cs.ci_upper)(t);
                    cover_rep(e, t) = covered ? 100.0 : 0.0;
                }
            }
            rb_sum += rb_rep;
            cover_sum += cover_rep;
            ++report.replicates;
        } catch (const std::exception&) {
            ++report.failures;
        }
    }
    if (report.replicates == 0)
        throw std::runtime_error("replicate_study: all replicates failed");
    report.mean_rel_bias_pct = rb_sum / report.replicates;
    report.coverage_pct = cover_sum / report.replicates;
    return report;
}

} // namespace medpath
