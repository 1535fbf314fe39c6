#pragma once

#include <optional>

#include <Eigen/Dense>

#include "medpath/likelihood.hpp"
#include "medpath/optim.hpp"

namespace medpath {

struct FitOptions {
    int max_iterations = 500;
    double rel_loglik_tol = 1e-8;
    double grad_tol = 1e-4;
    std::optional<Eigen::VectorXd> init;  // overrides the data-driven default
};

struct FitResult {
    Eigen::VectorXd theta_hat;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    double final_grad_norm = 0.0;
    std::string message;
    Eigen::MatrixXd hessian;  // of the log-likelihood at theta_hat
    Eigen::MatrixXd vcov;     // inverse of the negative Hessian
};

// Data-driven starting values: per-marker baseline and slope regressions for
// beta/gamma, residual SDs on the chol diagonal, zero elsewhere.
Eigen::VectorXd default_init(const ModelSpec& spec, const ThetaMap& map,
                             const Dataset& data);

// Quasi-Newton maximum likelihood with finite-difference derivatives.
// Non-convergence and a non-PD Hessian are surfaced through converged=false
// with a diagnostic message, never repaired silently.
FitResult fit_mle(const ModelSpec& spec, const ThetaMap& map,
                  const Dataset& data, const FitOptions& opts = {});

// R independent draws from N(theta_hat, vcov). Deterministic given seed.
// Throws if the fit did not converge or vcov is not positive definite.
std::vector<Eigen::VectorXd> draw_theta(const FitResult& fit, int R,
                                        std::uint64_t seed);

} // namespace medpath
