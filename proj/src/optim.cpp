#include "medpath/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace medpath {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();

double checked_eval(const ScalarFn& f, const Eigen::VectorXd& x) {
    const double v = f(x);
    if (!std::isfinite(v))
        throw std::runtime_error("numerical differentiation: non-finite "
                                 "function value");
    return v;
}
} // namespace

Eigen::VectorXd numerical_gradient(const ScalarFn& f, const Eigen::VectorXd& x,
                                   double step_scale) {
    const double scale = step_scale > 0 ? step_scale : std::cbrt(kEps);
    const auto n = x.size();
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = scale * std::max(1.0, std::abs(x(k)));
        xp(k) = x(k) + h;
        const double fp = checked_eval(f, xp);
        xp(k) = x(k) - h;
        const double fm = checked_eval(f, xp);
        xp(k) = x(k);
        g(k) = (fp - fm) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd numerical_hessian(const ScalarFn& f, const Eigen::VectorXd& x,
                                  double step_scale) {
    const double scale = step_scale > 0 ? step_scale : std::cbrt(kEps);
    const auto n = x.size();
    Eigen::VectorXd h(n);
    for (Eigen::Index k = 0; k < n; ++k)
        h(k) = scale * std::max(1.0, std::abs(x(k)));

    const double f0 = checked_eval(f, x);
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        xp(k) = x(k) + h(k);
        const double fp = checked_eval(f, xp);
        xp(k) = x(k) - h(k);
        const double fm = checked_eval(f, xp);
        xp(k) = x(k);
        H(k, k) = (fp - 2.0 * f0 + fm) / (h(k) * h(k));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = k + 1; l < n; ++l) {
            double quad[4];
            int idx = 0;
            for (double sk : {1.0, -1.0}) {
                for (double sl : {1.0, -1.0}) {
                    xp(k) = x(k) + sk * h(k);
                    xp(l) = x(l) + sl * h(l);
                    quad[idx++] = checked_eval(f, xp);
                    xp(k) = x(k);
                    xp(l) = x(l);
                }
            }
            const double v =
                (quad[0] - quad[1] - quad[2] + quad[3]) / (4.0 * h(k) * h(l));
            H(k, l) = v;
            H(l, k) = v;
        }
    }
    return 0.5 * (H + H.transpose());
}

MinimizeResult minimize_bfgs(const ScalarFn& f, const Eigen::VectorXd& x0,
                             const MinimizeOptions& opts) {
    const auto n = x0.size();
    MinimizeResult res;
    res.x = x0;

    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return f(x);
    };
    auto grad = [&](const Eigen::VectorXd& x) {
        evals += 2 * static_cast<int>(n);
        return numerical_gradient(f, x, opts.gradient_step);
    };
    auto scaled_grad_max = [&](const Eigen::VectorXd& g,
                               const Eigen::VectorXd& x, double fx) {
        double m = 0.0;
        for (Eigen::Index k = 0; k < n; ++k)
            m = std::max(m, std::abs(g(k)) * std::max(1.0, std::abs(x(k))) /
                                std::max(1.0, std::abs(fx)));
        return m;
    };

    double fx = eval(res.x);
    if (!std::isfinite(fx))
        throw std::runtime_error("minimize_bfgs: non-finite objective at start");
    Eigen::VectorXd g = grad(res.x);
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);

    bool f_converged = false;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.iterations = iter + 1;
        const double gmax = scaled_grad_max(g, res.x, fx);
        res.grad_norm = gmax;
        if (f_converged && gmax < opts.grad_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd dir = -(Hinv * g);
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {  // reset on a non-descent direction
            Hinv.setIdentity();
            dir = -g;
            slope = g.dot(dir);
            if (!(slope < 0.0)) break;  // zero gradient
        }

        // backtracking Armijo line search
        double step = 1.0;
        const double c1 = 1e-4;
        double f_new = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        bool ok = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + step * dir;
            f_new = eval(x_new);
            if (std::isfinite(f_new) && f_new <= fx + c1 * step * slope) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;  // no acceptable step

        Eigen::VectorXd g_new = grad(x_new);
        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            Hinv = (I - rho * s * y.transpose()) * Hinv *
                       (I - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }

        f_converged = std::abs(fx - f_new) <=
                      opts.rel_f_tol * std::max(1.0, std::abs(fx));
        res.x = x_new;
        fx = f_new;
        g = g_new;
        res.grad_norm = scaled_grad_max(g, res.x, fx);
        if (f_converged && res.grad_norm < opts.grad_tol) {
            res.converged = true;
            break;
        }
    }
    res.f = fx;
    res.evaluations = evals;
    return res;
}

} // namespace medpath
