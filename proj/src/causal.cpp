#include "medpath/causal.hpp"

#include <algorithm>
#include <cmath>

#include "medpath/rng.hpp"

namespace medpath {

std::string effect_name(EffectKind k) {
    switch (k) {
    case EffectKind::TE: return "TE";
    case EffectKind::NDE: return "NDE";
    case EffectKind::NIE: return "NIE";
    case EffectKind::PSE_XY: return "PSE_XY";
    case EffectKind::PSE_XMY: return "PSE_XMY";
    case EffectKind::PSE_XLMY: return "PSE_XLMY";
    }
    throw std::logic_error("invalid effect kind");
}

EffectKind effect_from_name(const std::string& name) {
    for (EffectKind k : {EffectKind::TE, EffectKind::NDE, EffectKind::NIE,
                         EffectKind::PSE_XY, EffectKind::PSE_XMY,
                         EffectKind::PSE_XLMY})
        if (effect_name(k) == name) return k;
    throw std::invalid_argument("unknown effect kind: " + name);
}

CovariateProfile CovariateProfile::from_subject(
    const SubjectRecord& s, const std::string& exposure_name) {
    CovariateProfile p;
    p.values = std::map<std::string, double>(s.baseline.begin(),
                                             s.baseline.end());
    p.exposure_name = exposure_name;
    p.t0 = s.t0;
    return p;
}

namespace {

// Covariate lookup with the per-equation exposure substituted in.
double profile_value(const CovariateProfile& profile, const std::string& name,
                     double exposure) {
    if (name == "intercept") return 1.0;
    if (name == profile.exposure_name) return exposure;
    auto it = profile.values.find(name);
    if (it == profile.values.end())
        throw std::invalid_argument("profile: missing covariate '" + name +
                                    "'");
    return it->second;
}

double regime_exposure(const ModelSpec& spec, const ExposureRegime& regime,
                       Process p) {
    switch (p) {
    case Process::L:
        if (!regime.x_L)
            throw std::invalid_argument(
                "regime: x_L required for a model with confounder");
        return *regime.x_L;
    case Process::M: return regime.x_M;
    case Process::Y: return regime.x_Y;
    }
    (void)spec;
    throw std::logic_error("invalid process");
}

// Exposure entering the modifiers of alpha^{aa'}: edges into Y use x_Y,
// the L->M edge uses x_M (matching the conditioning sets of the g-formula).
double modifier_exposure(const ExposureRegime& regime, Edge e) {
    return edge_target(e) == Process::Y ? regime.x_Y : regime.x_M;
}

void check_regime(const ModelSpec& spec, const ExposureRegime& regime) {
    if (spec.has_confounder && !regime.x_L)
        throw std::invalid_argument(
            "regime: x_L required for a model with confounder");
    if (!spec.has_confounder && regime.x_L)
        throw std::invalid_argument(
            "regime: x_L given but the model has no confounder");
}

} // namespace

LatentAffineBasis counterfactual_basis(const ModelSpec& spec,
                                       const ThetaMap& map,
                                       const Eigen::VectorXd& theta,
                                       const ExposureRegime& regime,
                                       const CovariateProfile& profile,
                                       const TimeGrid& grid) {
    check_regime(spec, regime);
    // Build a synthetic subject whose designs already carry the per-equation
    // exposures, then reuse the factual affine propagation.
    PreparedSubject ps;
    ps.id = "counterfactual";
    ps.grid = grid;
    for (Process p : spec.processes()) {
        const auto pi = static_cast<size_t>(p);
        const auto& d = spec.design(p);
        const double e = regime_exposure(spec, regime, p);
        ps.x_init[pi].resize(static_cast<Eigen::Index>(d.init_covariates.size()));
        for (size_t k = 0; k < d.init_covariates.size(); ++k) {
            const auto& term = d.init_covariates[k];
            double v = profile_value(profile, term.name, e);
            if (term.time_scaled) v *= grid.t0;
            ps.x_init[pi](static_cast<Eigen::Index>(k)) = v;
        }
        const auto ns = d.slope_covariates.size();
        ps.x_slope_static[pi] =
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
        ps.x_slope_tscaled[pi] =
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
        for (size_t k = 0; k < ns; ++k) {
            const auto& term = d.slope_covariates[k];
            const double v = profile_value(profile, term.name, e);
            if (term.time_scaled)
                ps.x_slope_tscaled[pi](static_cast<Eigen::Index>(k)) = v;
            else
                ps.x_slope_static[pi](static_cast<Eigen::Index>(k)) = v;
        }
    }
    for (const auto& inf : spec.influences) {
        const auto ei = static_cast<size_t>(inf.edge);
        const double e = modifier_exposure(regime, inf.edge);
        ps.x_alpha[ei].resize(1 + static_cast<Eigen::Index>(inf.modifiers.size()));
        ps.x_alpha[ei](0) = 1.0;
        for (size_t k = 0; k < inf.modifiers.size(); ++k)
            ps.x_alpha[ei](1 + static_cast<Eigen::Index>(k)) =
                profile_value(profile, inf.modifiers[k], e);
    }
    return propagate_basis(spec, map, theta, ps);
}

namespace {

TimeGrid grid_for_times(const ModelSpec& spec, const CovariateProfile& profile,
                        const std::vector<double>& times) {
    if (times.empty())
        throw std::invalid_argument("contrast times must be non-empty");
    double t_max = profile.t0;
    for (double t : times) t_max = std::max(t_max, t);
    return TimeGrid::spanning(profile.t0, t_max, spec.delta);
}

} // namespace

Eigen::VectorXd counterfactual_mean(const ModelSpec& spec, const ThetaMap& map,
                                    const Eigen::VectorXd& theta,
                                    const ExposureRegime& regime,
                                    const CovariateProfile& profile,
                                    const std::vector<double>& times) {
    const TimeGrid grid = grid_for_times(spec, profile, times);
    const LatentAffineBasis basis =
        counterfactual_basis(spec, map, theta, regime, profile, grid);
    const auto yi = static_cast<size_t>(Process::Y);
    Eigen::VectorXd out(static_cast<Eigen::Index>(times.size()));
    for (size_t k = 0; k < times.size(); ++k)
        out(static_cast<Eigen::Index>(k)) = basis.mean[yi](grid.snap(times[k]));
    return out;
}

McMean mc_counterfactual_mean(const ModelSpec& spec, const ThetaMap& map,
                              const Eigen::VectorXd& theta,
                              const ExposureRegime& regime,
                              const CovariateProfile& profile,
                              const std::vector<double>& times, int B,
                              std::uint64_t seed) {
    if (B < 1) throw std::invalid_argument("mc_counterfactual_mean: B >= 1");
    const TimeGrid grid = grid_for_times(spec, profile, times);
    const LatentAffineBasis basis =
        counterfactual_basis(spec, map, theta, regime, profile, grid);
    const auto& re = map.effects();
    const Eigen::MatrixXd A = re.factor(map.chol(theta));
    const int q = re.dim();

    // Outcome loading restricted to the L/M random effects: per draw the
    // outcome equation is evaluated at its conditional mean given the drawn
    // confounder/mediator paths (own effects at zero).
    const auto yi = static_cast<size_t>(Process::Y);
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(times.size()), q);
    Eigen::VectorXd mean(static_cast<Eigen::Index>(times.size()));
    for (size_t k = 0; k < times.size(); ++k) {
        const int node = grid.snap(times[k]);
        mean(static_cast<Eigen::Index>(k)) = basis.mean[yi](node);
        phi.row(static_cast<Eigen::Index>(k)) = basis.loading[yi].row(node);
    }
    for (int i = 0; i < q; ++i)
        if (re.order[static_cast<size_t>(i)].process == Process::Y)
            phi.col(i).setZero();
    const Eigen::MatrixXd phiA = phi * A;

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(mean.size());
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(mean.size());
    Eigen::VectorXd z(q);
    for (int b = 0; b < B; ++b) {
        for (int i = 0; i < q; ++i) z(i) = gauss(rng);
        const Eigen::VectorXd y = mean + phiA * z;
        sum += y;
        sumsq += y.cwiseProduct(y);
    }
    McMean out;
    out.mean = sum / B;
    if (B > 1) {
        const Eigen::VectorXd var =
            (sumsq - B * out.mean.cwiseProduct(out.mean)) / (B - 1);
        out.mc_se = (var.cwiseMax(0.0) / B).cwiseSqrt();
    } else {
        out.mc_se = Eigen::VectorXd::Zero(mean.size());
    }
    return out;
}

namespace {

ContrastSeries make_series(EffectKind kind, const std::vector<double>& times,
                           Eigen::VectorXd est, const std::string& label) {
    ContrastSeries s;
    s.kind = kind;
    s.times = times;
    s.estimate = std::move(est);
    s.profile_label = label;
    return s;
}

std::string profile_label(const CovariateProfile& profile) {
    if (profile.values.empty()) return "conditional";
    std::string s = "conditional:";
    for (const auto& [k, v] : profile.values)
        s += " " + k + "=" + std::to_string(v);
    return s;
}

} // namespace

NaturalEffects natural_effects(const ModelSpec& spec, const ThetaMap& map,
                               const Eigen::VectorXd& theta,
                               const CovariateProfile& profile,
                               const std::vector<double>& times, double x,
                               double x_prime) {
    if (spec.has_confounder)
        throw std::invalid_argument(
            "natural_effects: model has a time-varying confounder; use "
            "path_specific_effects");
    auto m = [&](double a, double b) {
        ExposureRegime r;
        r.x_Y = a;
        r.x_M = b;
        return counterfactual_mean(spec, map, theta, r, profile, times);
    };
    const Eigen::VectorXd mxx = m(x, x);
    const Eigen::VectorXd mxxp = m(x, x_prime);
    const Eigen::VectorXd mxpxp = m(x_prime, x_prime);
    const std::string label = profile_label(profile);
    NaturalEffects out;
    out.te = make_series(EffectKind::TE, times, mxx - mxpxp, label);
    out.nie = make_series(EffectKind::NIE, times, mxx - mxxp, label);
    out.nde = make_series(EffectKind::NDE, times, mxxp - mxpxp, label);
    return out;
}

PathSpecificEffects path_specific_effects(const ModelSpec& spec,
                                          const ThetaMap& map,
                                          const Eigen::VectorXd& theta,
                                          const CovariateProfile& profile,
                                          const std::vector<double>& times,
                                          double x, double x_prime) {
    if (!spec.has_confounder)
        throw std::invalid_argument(
            "path_specific_effects: model has no confounder; use "
            "natural_effects");
    auto m = [&](double a, double b, double c) {
        ExposureRegime r;
        r.x_Y = a;
        r.x_L = b;
        r.x_M = c;
        return counterfactual_mean(spec, map, theta, r, profile, times);
    };
    const Eigen::VectorXd m_x_xp_xp = m(x, x_prime, x_prime);
    const Eigen::VectorXd m_xp_xp_xp = m(x_prime, x_prime, x_prime);
    const Eigen::VectorXd m_x_xp_x = m(x, x_prime, x);
    const Eigen::VectorXd m_x_x_x = m(x, x, x);
    const std::string label = profile_label(profile);
    PathSpecificEffects out;
    out.te = make_series(EffectKind::TE, times, m_x_x_x - m_xp_xp_xp, label);
    out.pse_xy =
        make_series(EffectKind::PSE_XY, times, m_x_xp_xp - m_xp_xp_xp, label);
    out.pse_xmy =
        make_series(EffectKind::PSE_XMY, times, m_x_xp_x - m_x_xp_xp, label);
    out.pse_xlmy =
        make_series(EffectKind::PSE_XLMY, times, m_x_x_x - m_x_xp_x, label);
    return out;
}

namespace {

Eigen::VectorXd conditional_contrast(const ModelSpec& spec,
                                     const ThetaMap& map,
                                     const Eigen::VectorXd& theta,
                                     EffectKind kind,
                                     const CovariateProfile& profile,
                                     const std::vector<double>& times,
                                     double x, double x_prime) {
    switch (kind) {
    case EffectKind::TE:
        if (spec.has_confounder)
            return path_specific_effects(spec, map, theta, profile, times, x,
                                         x_prime)
                .te.estimate;
        return natural_effects(spec, map, theta, profile, times, x, x_prime)
            .te.estimate;
    case EffectKind::NDE:
        return natural_effects(spec, map, theta, profile, times, x, x_prime)
            .nde.estimate;
    case EffectKind::NIE:
        return natural_effects(spec, map, theta, profile, times, x, x_prime)
            .nie.estimate;
    case EffectKind::PSE_XY:
        return path_specific_effects(spec, map, theta, profile, times, x,
                                     x_prime)
            .pse_xy.estimate;
    case EffectKind::PSE_XMY:
        return path_specific_effects(spec, map, theta, profile, times, x,
                                     x_prime)
            .pse_xmy.estimate;
    case EffectKind::PSE_XLMY:
        return path_specific_effects(spec, map, theta, profile, times, x,
                                     x_prime)
            .pse_xlmy.estimate;
    }
    throw std::logic_error("invalid effect kind");
}

} // namespace

Eigen::VectorXd evaluate_contrast(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const EffectRequest& request,
                                  const std::vector<double>& times,
                                  const Dataset* data) {
    if (request.profile)
        return conditional_contrast(spec, map, theta, request.kind,
                                    *request.profile, times, request.x,
                                    request.x_prime);
    if (!data || data->subjects.empty())
        throw std::invalid_argument(
            "marginal contrast requires a non-empty dataset");
    // average the conditional contrasts over the distinct baseline profiles
    Eigen::VectorXd acc =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(times.size()));
    std::map<std::string, Eigen::VectorXd> cache;
    for (const auto& s : data->subjects) {
        CovariateProfile p =
            CovariateProfile::from_subject(s, request.exposure_name);
        std::string key = std::to_string(p.t0);
        for (const auto& [k, v] : p.values)
            key += "|" + k + "=" + std::to_string(v);
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache
                     .emplace(key, conditional_contrast(spec, map, theta,
                                                        request.kind, p, times,
                                                        request.x,
                                                        request.x_prime))
                     .first;
        acc += it->second;
    }
    return acc / static_cast<double>(data->subjects.size());
}

ContrastSeries marginal_contrasts(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const Dataset& data,
                                  const EffectRequest& request,
                                  const std::vector<double>& times) {
    EffectRequest r = request;
    r.profile.reset();
    return make_series(request.kind, times,
                       evaluate_contrast(spec, map, theta, r, times, &data),
                       "marginal");
}

ContrastSeries bootstrap_contrasts(const ModelSpec& spec, const ThetaMap& map,
                                   const FitResult& fit,
                                   const EffectRequest& request,
                                   const std::vector<double>& times,
                                   const Dataset* data, int R,
                                   std::uint64_t seed, double level) {
    if (!fit.converged)
        throw std::invalid_argument("bootstrap_contrasts: fit not converged");
    if (R < 2) throw std::invalid_argument("bootstrap_contrasts: R >= 2");
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("bootstrap_contrasts: level in (0,1)");

    ContrastSeries out =
        make_series(request.kind, times,
                    evaluate_contrast(spec, map, fit.theta_hat, request, times,
                                      data),
                    request.profile ? profile_label(*request.profile)
                                    : "marginal");

    const auto draws = draw_theta(fit, R, seed);
    std::vector<Eigen::VectorXd> kept;
    kept.reserve(draws.size());
    int dropped = 0;
    for (const auto& th : draws) {
        try {
            kept.push_back(
                evaluate_contrast(spec, map, th, request, times, data));
        } catch (const std::exception&) {
            ++dropped;
        }
    }
    if (dropped > 0.05 * R)
        throw std::runtime_error(
            "bootstrap_contrasts: " + std::to_string(dropped) + " of " +
            std::to_string(R) + " replicates failed (>5%)");

    const auto nt = static_cast<Eigen::Index>(times.size());
    Eigen::VectorXd lo(nt), hi(nt);
    const double a = (1.0 - level) / 2.0;
    std::vector<double> vals(kept.size());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(vals.size() - 1);
        const auto i0 = static_cast<size_t>(std::floor(pos));
        const auto i1 = std::min(i0 + 1, vals.size() - 1);
        const double w = pos - static_cast<double>(i0);
        return (1.0 - w) * vals[i0] + w * vals[i1];
    };
    for (Eigen::Index k = 0; k < nt; ++k) {
        for (size_t r = 0; r < kept.size(); ++r) vals[r] = kept[r](k);
        std::sort(vals.begin(), vals.end());
        lo(k) = quantile(a);
        hi(k) = quantile(1.0 - a);
    }
    out.ci_lower = lo;
    out.ci_upper = hi;
    return out;
}

} // namespace medpath
