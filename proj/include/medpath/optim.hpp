#pragma once

#include <functional>

#include <Eigen/Dense>

#include "medpath/types.hpp"

namespace medpath {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

// Central finite differences with per-coordinate steps h_k = scale*max(1,|x_k|).
Eigen::VectorXd numerical_gradient(const ScalarFn& f, const Eigen::VectorXd& x,
                                   double step_scale = 0.0);

// Symmetric central-difference Hessian, h_k = eps^{1/3} * max(1, |x_k|).
// Throws on a non-finite evaluation of f.
Eigen::MatrixXd numerical_hessian(const ScalarFn& f, const Eigen::VectorXd& x,
                                  double step_scale = 0.0);

struct MinimizeOptions {
    int max_iterations = 500;
    double rel_f_tol = 1e-8;       // relative objective change
    double grad_tol = 1e-4;        // max scaled gradient component
    double gradient_step = 0.0;    // 0 -> default FD step scale
};

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = 0.0;
    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
    double grad_norm = 0.0;        // max scaled gradient at the solution
};

// Dense BFGS with backtracking line search and finite-difference gradients.
// Converged means both the relative objective change and the scaled gradient
// criteria were met.
MinimizeResult minimize_bfgs(const ScalarFn& f, const Eigen::VectorXd& x0,
                             const MinimizeOptions& opts = {});

} // namespace medpath
