#include "medpath/fit.hpp"

#include <cmath>
#include <limits>

#include "medpath/rng.hpp"

namespace medpath {

namespace {

// Least squares with a ridge fallback for rank-deficient designs.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() == 0) return Eigen::VectorXd::Zero(X.cols());
    Eigen::MatrixXd XtX = X.transpose() * X;
    XtX.diagonal().array() += 1e-8;
    return XtX.ldlt().solve(X.transpose() * y);
}

} // namespace

Eigen::VectorXd default_init(const ModelSpec& spec, const ThetaMap& map,
                             const Dataset& data) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(map.dim());
    const auto& re = map.effects();
    Eigen::VectorXd chol = Eigen::VectorXd::Zero(map.chol_dim());
    const auto free_pos = re.free_positions();

    for (Process p : spec.processes()) {
        const auto& d = spec.design(p);
        const int pb = static_cast<int>(d.init_covariates.size());
        const int pg = static_cast<int>(d.slope_covariates.size());

        // baseline regression on each subject's first observation
        std::vector<Eigen::VectorXd> rows;
        std::vector<double> vals;
        // per-subject OLS slopes regressed on the static slope design
        std::vector<Eigen::VectorXd> srows;
        std::vector<double> svals;
        for (const auto& s : data.subjects) {
            const auto& obs = s.obs(p);
            if (obs.empty()) continue;
            Eigen::VectorXd x(pb);
            for (int k = 0; k < pb; ++k) {
                double v = s.covariate(d.init_covariates[k].name);
                if (d.init_covariates[k].time_scaled) v *= s.t0;
                x(k) = v;
            }
            rows.push_back(x);
            vals.push_back(obs.front().value);

            if (obs.size() >= 2) {
                double st = 0, sv = 0, stt = 0, stv = 0;
                const auto m = static_cast<double>(obs.size());
                for (const auto& o : obs) {
                    st += o.time;
                    sv += o.value;
                    stt += o.time * o.time;
                    stv += o.time * o.value;
                }
                const double denom = m * stt - st * st;
                if (std::abs(denom) > 1e-12) {
                    const double slope = (m * stv - st * sv) / denom;
                    Eigen::VectorXd xs(pg);
                    for (int k = 0; k < pg; ++k)
                        xs(k) = s.covariate(d.slope_covariates[k].name);
                    srows.push_back(xs);
                    svals.push_back(slope);
                }
            }
        }

        double resid_sd = 1.0;
        if (!rows.empty()) {
            Eigen::MatrixXd X(rows.size(), pb);
            Eigen::VectorXd y(rows.size());
            for (size_t r = 0; r < rows.size(); ++r) {
                X.row(static_cast<Eigen::Index>(r)) = rows[r];
                y(static_cast<Eigen::Index>(r)) = vals[r];
            }
            const Eigen::VectorXd b = solve_ls(X, y);
            theta.segment(map.beta_offset(p), pb) = b;
            const Eigen::VectorXd r = y - X * b;
            if (r.size() > 1)
                resid_sd = std::max(
                    1e-2, std::sqrt(r.squaredNorm() /
                                    static_cast<double>(r.size())));
        }
        double slope_sd = 0.5;
        if (!srows.empty()) {
            Eigen::MatrixXd X(srows.size(), pg);
            Eigen::VectorXd y(srows.size());
            for (size_t r = 0; r < srows.size(); ++r) {
                X.row(static_cast<Eigen::Index>(r)) = srows[r];
                y(static_cast<Eigen::Index>(r)) = svals[r];
            }
            const Eigen::VectorXd g = solve_ls(X, y);
            theta.segment(map.gamma_offset(p), pg) = g;
            const Eigen::VectorXd r = y - X * g;
            if (r.size() > 1)
                slope_sd = std::max(
                    1e-2, std::sqrt(r.squaredNorm() /
                                    static_cast<double>(r.size())));
        }

        for (size_t k = 0; k < free_pos.size(); ++k) {
            const auto [fr, fc] = free_pos[k];
            if (fr != fc) continue;
            // diagonal entry: find which effect this is
            for (int i = 0; i < re.dim(); ++i) {
                if (re.factor_index[i] != fr) continue;
                if (re.order[i].process != p) break;
                chol(static_cast<Eigen::Index>(k)) =
                    re.order[i].is_slope ? slope_sd : resid_sd;
                break;
            }
        }
        theta(map.sigma_offset(p)) = 0.5 * resid_sd;
    }
    theta.segment(map.chol_offset(), map.chol_dim()) = chol;
    return theta;
}

FitResult fit_mle(const ModelSpec& spec, const ThetaMap& map,
                  const Dataset& data, const FitOptions& opts) {
    data.validate();
    const PreparedDataset prepared = PreparedDataset::prepare(spec, map, data);
    for (Process p : spec.processes()) {
        bool any = false;
        for (const auto& s : prepared.subjects)
            if (!s.obs[static_cast<size_t>(p)].empty()) {
                any = true;
                break;
            }
        if (!any)
            throw std::invalid_argument(
                "fit_mle: no observations for process " + process_name(p));
    }

    Eigen::VectorXd init =
        opts.init ? *opts.init : default_init(spec, map, data);
    if (init.size() != map.dim())
        throw std::invalid_argument("fit_mle: init has wrong dimension");
    if (!init.allFinite())
        throw std::invalid_argument("fit_mle: non-finite init");

    const double bad = 1e10;
    ScalarFn negll = [&](const Eigen::VectorXd& th) -> double {
        try {
            return -log_likelihood(spec, map, th, prepared);
        } catch (const std::exception&) {
            return bad;  // ridge for the line search; never accepted silently
        }
    };

    MinimizeOptions mopts;
    mopts.max_iterations = opts.max_iterations;
    mopts.rel_f_tol = opts.rel_loglik_tol;
    mopts.grad_tol = opts.grad_tol;
    const MinimizeResult mr = minimize_bfgs(negll, init, mopts);

    FitResult fit;
    fit.theta_hat = mr.x;
    fit.loglik = -mr.f;
    fit.iterations = mr.iterations;
    fit.final_grad_norm = mr.grad_norm;
    fit.converged = mr.converged;
    if (!mr.converged) fit.message = "iteration cap reached before convergence";

    fit.hessian = -numerical_hessian(negll, mr.x);
    Eigen::MatrixXd neg_hessian = -fit.hessian;
    Eigen::LLT<Eigen::MatrixXd> llt(neg_hessian);
    if (llt.info() != Eigen::Success) {
        fit.converged = false;
        fit.message = "negative Hessian not positive definite at the optimum";
        fit.vcov = Eigen::MatrixXd::Constant(
            map.dim(), map.dim(), std::numeric_limits<double>::quiet_NaN());
    } else {
        fit.vcov = llt.solve(Eigen::MatrixXd::Identity(map.dim(), map.dim()));
        fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose());
    }
    return fit;
}

std::vector<Eigen::VectorXd> draw_theta(const FitResult& fit, int R,
                                        std::uint64_t seed) {
    if (!fit.converged)
        throw std::invalid_argument("draw_theta: fit did not converge");
    if (R < 1) throw std::invalid_argument("draw_theta: R must be >= 1");
    Eigen::LLT<Eigen::MatrixXd> llt(fit.vcov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("draw_theta: vcov not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::VectorXd> draws;
    draws.reserve(static_cast<size_t>(R));
    const auto n = fit.theta_hat.size();
    for (int r = 0; r < R; ++r) {
        Eigen::VectorXd z(n);
        for (Eigen::Index k = 0; k < n; ++k) z(k) = gauss(rng);
        draws.push_back(fit.theta_hat + L * z);
    }
    return draws;
}

} // namespace medpath
