#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medpath/fit.hpp"

namespace medpath {

// Exposure assignment per structural equation: x_Y drives the outcome
// equation (and the modifiers of edges into Y), x_M the mediator equation
// (and the L->M modifiers), x_L the confounder equation. x_L is absent for
// models without L.
struct ExposureRegime {
    double x_Y = 0.0;
    std::optional<double> x_L;
    double x_M = 0.0;
};

enum class EffectKind : int { TE = 0, NDE, NIE, PSE_XY, PSE_XMY, PSE_XLMY };

std::string effect_name(EffectKind k);
EffectKind effect_from_name(const std::string& name);

// Baseline covariate values for a conditional contrast. The exposure
// covariate is identified by name and substituted per structural equation
// from the regime; t0 anchors the latent grid (0 in study time, the origin
// age on the age timescale).
struct CovariateProfile {
    std::map<std::string, double> values;
    std::string exposure_name = "X";
    double t0 = 0.0;

    static CovariateProfile from_subject(const SubjectRecord& s,
                                         const std::string& exposure_name);
};

struct ContrastSeries {
    EffectKind kind = EffectKind::TE;
    std::vector<double> times;
    Eigen::VectorXd estimate;
    std::optional<Eigen::VectorXd> ci_lower;
    std::optional<Eigen::VectorXd> ci_upper;
    std::string profile_label;  // "marginal" or a conditional description
};

// Affine representation of the counterfactual system: each equation uses its
// regime exposure, so this generalizes the factual basis.
LatentAffineBasis counterfactual_basis(const ModelSpec& spec,
                                       const ThetaMap& map,
                                       const Eigen::VectorXd& theta,
                                       const ExposureRegime& regime,
                                       const CovariateProfile& profile,
                                       const TimeGrid& grid);

// E[Y(t)] under the regime, closed form: for the linear-Gaussian system the
// g-formula integral reduces to plugging in the counterfactual mean paths.
// Means are of the latent outcome; measurement error is mean zero.
Eigen::VectorXd counterfactual_mean(const ModelSpec& spec, const ThetaMap& map,
                                    const Eigen::VectorXd& theta,
                                    const ExposureRegime& regime,
                                    const CovariateProfile& profile,
                                    const std::vector<double>& times);

// Monte-Carlo g-formula: draws the confounder/mediator random effects
// jointly, propagates their counterfactual paths, and averages the outcome
// equation's conditional mean. Returns the average and its standard error.
struct McMean {
    Eigen::VectorXd mean;
    Eigen::VectorXd mc_se;
};
McMean mc_counterfactual_mean(const ModelSpec& spec, const ThetaMap& map,
                              const Eigen::VectorXd& theta,
                              const ExposureRegime& regime,
                              const CovariateProfile& profile,
                              const std::vector<double>& times, int B,
                              std::uint64_t seed);

// TE = m(x,x) - m(x',x'); NIE = m(x,x) - m(x,x'); NDE = m(x,x') - m(x',x')
// with m(a,b) the counterfactual mean at x_Y=a, x_M=b. Requires a model
// without confounder; with L present use path_specific_effects.
struct NaturalEffects {
    ContrastSeries te, nde, nie;
};
NaturalEffects natural_effects(const ModelSpec& spec, const ThetaMap& map,
                               const Eigen::VectorXd& theta,
                               const CovariateProfile& profile,
                               const std::vector<double>& times, double x,
                               double x_prime);

// With m(a,b,c) at x_Y=a, x_L=b, x_M=c:
//   PSE_XY   = m(x,x',x') - m(x',x',x')
//   PSE_XMY  = m(x,x',x)  - m(x,x',x')
//   PSE_XLMY = m(x,x,x)   - m(x,x',x)
struct PathSpecificEffects {
    ContrastSeries te, pse_xy, pse_xmy, pse_xlmy;
};
PathSpecificEffects path_specific_effects(const ModelSpec& spec,
                                          const ThetaMap& map,
                                          const Eigen::VectorXd& theta,
                                          const CovariateProfile& profile,
                                          const std::vector<double>& times,
                                          double x, double x_prime);

// A single requested contrast; profile absent means marginal over the
// empirical baseline distribution of a dataset.
struct EffectRequest {
    EffectKind kind = EffectKind::TE;
    double x = 1.0;
    double x_prime = 0.0;
    std::optional<CovariateProfile> profile;
    std::string exposure_name = "X";
    double t0 = 0.0;  // grid anchor used for marginal evaluation
};

// Conditional contrast at the request's profile, or the average of the
// conditional contrasts over the dataset's baseline covariates.
Eigen::VectorXd evaluate_contrast(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const EffectRequest& request,
                                  const std::vector<double>& times,
                                  const Dataset* data);

ContrastSeries marginal_contrasts(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const Dataset& data,
                                  const EffectRequest& request,
                                  const std::vector<double>& times);

// Parametric-bootstrap percentile bands around the plug-in estimate at
// theta_hat. Draws failing to propagate are dropped; more than 5% drops is
// an error.
ContrastSeries bootstrap_contrasts(const ModelSpec& spec, const ThetaMap& map,
                                   const FitResult& fit,
                                   const EffectRequest& request,
                                   const std::vector<double>& times,
                                   const Dataset* data, int R = 1000,
                                   std::uint64_t seed = 0, double level = 0.95);

} // namespace medpath
