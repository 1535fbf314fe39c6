#include "medpath/boundary_tests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace medpath {

namespace {

// Regularized upper incomplete gamma Q(a, x): series for x < a+1,
// continued fraction otherwise.
double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0)
        throw std::invalid_argument("gamma_q: invalid arguments");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // P(a,x) by series, return 1 - P
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Q(a,x) by Lentz continued fraction
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

} // namespace

double chi2_sf(double x, int df) {
    if (df < 0) throw std::invalid_argument("chi2_sf: df must be >= 0");
    if (df == 0) return x < 0.0 ? 1.0 : 0.0;
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * df, 0.5 * x);
}

void ChiBarMixture::validate() const {
    if (components.empty())
        throw std::invalid_argument("ChiBarMixture: empty mixture");
    double wsum = 0.0;
    std::set<int> dfs;
    for (const auto& c : components) {
        if (c.df < 0)
            throw std::invalid_argument("ChiBarMixture: negative df");
        if (c.weight < 0.0)
            throw std::invalid_argument("ChiBarMixture: negative weight");
        if (!dfs.insert(c.df).second)
            throw std::invalid_argument("ChiBarMixture: duplicate df " +
                                        std::to_string(c.df));
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("ChiBarMixture: weights sum to " +
                                    std::to_string(wsum));
}

double ChiBarMixture::survival(double t) const {
    validate();
    double p = 0.0;
    for (const auto& c : components) p += c.weight * chi2_sf(t, c.df);
    return p;
}

ChiBarMixture half_half(int k) {
    if (k < 0) throw std::invalid_argument("half_half: k >= 0");
    return ChiBarMixture{{{k, 0.5}, {k + 1, 0.5}}};
}

ChiBarMixture binomial_mixture(int k_prime) {
    if (k_prime < 1) throw std::invalid_argument("binomial_mixture: k' >= 1");
    ChiBarMixture mix;
    double binom = 1.0;  // C(k', 0)
    const double scale = std::pow(2.0, -k_prime);
    for (int m = 0; m <= k_prime; ++m) {
        mix.components.push_back({m, scale * binom});
        binom *= static_cast<double>(k_prime - m) / (m + 1);
    }
    return mix;
}

double chibar_pvalue(double t, const ChiBarMixture& mixture) {
    if (t < 0.0) throw std::invalid_argument("chibar_pvalue: t >= 0");
    mixture.validate();
    if (t == 0.0) return 1.0;  // observed statistic on the boundary
    return mixture.survival(t);
}

BoundaryTestResult lrt_boundary(double loglik_null, double loglik_alt, int k,
                                int k_prime, bool correlated) {
    if (loglik_alt < loglik_null - 1e-6)
        throw std::invalid_argument(
            "lrt_boundary: alternative log-likelihood below the null "
            "(models not nested or fit failure)");
    if (k < 0 || k_prime < 0)
        throw std::invalid_argument("lrt_boundary: k, k' >= 0");
    BoundaryTestResult res;
    res.statistic = std::max(0.0, 2.0 * (loglik_alt - loglik_null));
    res.sided = Sidedness::One;
    if (k_prime == 0) {
        res.mixture = ChiBarMixture{{{0, 1.0}}};
    } else if (correlated) {
        if (k_prime > 1)
            throw std::invalid_argument(
                "lrt_boundary: mixture weights for adding several correlated "
                "random effects can only be calculated analytically in a "
                "number of special cases");
        res.mixture = half_half(k);
    } else {
        res.mixture = binomial_mixture(k_prime);
    }
    res.p_value = chibar_pvalue(res.statistic, res.mixture);
    return res;
}

BoundaryTestResult score_one_sided_scalar(double score_at_zero,
                                          double info_at_zero,
                                          bool tau_hat_nonneg) {
    if (!(info_at_zero > 0.0))
        throw std::invalid_argument(
            "score_one_sided_scalar: information must be positive");
    BoundaryTestResult res;
    res.statistic = tau_hat_nonneg
                        ? score_at_zero * score_at_zero / info_at_zero
                        : 0.0;
    res.mixture = half_half(0);
    res.p_value = chibar_pvalue(res.statistic, res.mixture);
    return res;
}

BoundaryTestResult score_one_sided_cone(const Eigen::VectorXd& Z,
                                        const Eigen::MatrixXd& H,
                                        const ConeProjector& projector,
                                        const ChiBarMixture& mixture) {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(
            "score_one_sided_cone: H not positive definite");
    const Eigen::MatrixXd Hinv =
        llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
    const double full = Z.dot(Hinv * Z);
    const double inf = projector(Z, Hinv);
    if (!std::isfinite(inf) || inf < -1e-10)
        throw std::runtime_error("score_one_sided_cone: projector failure");
    BoundaryTestResult res;
    res.statistic = std::max(0.0, full - std::max(0.0, inf));
    res.mixture = mixture;
    res.p_value = chibar_pvalue(res.statistic, res.mixture);
    return res;
}

ConeProjector nonnegative_orthant_projector() {
    return [](const Eigen::VectorXd& Z, const Eigen::MatrixXd& W) -> double {
        const int d = static_cast<int>(Z.size());
        if (d > 20)
            throw std::invalid_argument(
                "nonnegative orthant projector: dimension too large for "
                "face enumeration");
        double best = std::numeric_limits<double>::infinity();
        // the minimizer lies on some face {b_S = 0}; enumerate faces and
        // keep the feasible face minimizers
        for (unsigned mask = 0; mask < (1u << d); ++mask) {
            std::vector<int> free;
            for (int i = 0; i < d; ++i)
                if (mask & (1u << i)) free.push_back(i);
            Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
            if (!free.empty()) {
                const auto nf = static_cast<Eigen::Index>(free.size());
                Eigen::MatrixXd Wff(nf, nf);
                Eigen::VectorXd rhs(nf);
                for (Eigen::Index r = 0; r < nf; ++r) {
                    rhs(r) = W.row(free[static_cast<size_t>(r)]).dot(Z);
                    for (Eigen::Index c = 0; c < nf; ++c)
                        Wff(r, c) = W(free[static_cast<size_t>(r)],
                                      free[static_cast<size_t>(c)]);
                }
                const Eigen::VectorXd bf = Wff.ldlt().solve(rhs);
                bool ok = true;
                for (Eigen::Index r = 0; r < nf; ++r) {
                    if (bf(r) < 0.0) {
                        ok = false;
                        break;
                    }
                    b(free[static_cast<size_t>(r)]) = bf(r);
                }
                if (!ok) continue;
            }
            const Eigen::VectorXd r = Z - b;
            best = std::min(best, r.dot(W * r));
        }
        return best;
    };
}

ConeProjector psd_2x2_completion_projector(double d11) {
    if (!(d11 > 0.0))
        throw std::invalid_argument("psd_2x2_completion_projector: d11 > 0");
    return [d11](const Eigen::VectorXd& Z, const Eigen::MatrixXd& W) -> double {
        if (Z.size() != 2 || W.rows() != 2)
            throw std::invalid_argument(
                "psd_2x2_completion_projector: expects dimension 2");
        // feasible set: d22 >= d12^2 / d11 (convex); interior optimum is Z
        if (Z(1) >= Z(0) * Z(0) / d11) return 0.0;
        // otherwise the optimum lies on the parabola b = (s, s^2/d11)
        auto f = [&](double s) {
            Eigen::Vector2d b(s, s * s / d11);
            const Eigen::Vector2d r = Z.head<2>() - b;
            return r.dot(W * r);
        };
        // bracket by coarse scan, then golden-section refine
        const double span =
            10.0 * (1.0 + Z.cwiseAbs().maxCoeff()) * std::max(1.0, d11);
        const int n_scan = 4000;
        double s_best = 0.0, f_best = f(0.0);
        for (int i = 0; i <= n_scan; ++i) {
            const double s = -span + 2.0 * span * i / n_scan;
            const double v = f(s);
            if (v < f_best) {
                f_best = v;
                s_best = s;
            }
        }
        double lo = s_best - 2.0 * span / n_scan;
        double hi = s_best + 2.0 * span / n_scan;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = lo, b = hi;
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = f(x1), f2 = f(x2);
        for (int it = 0; it < 200 && (b - a) > 1e-12 * (1.0 + std::abs(a));
             ++it) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = f(x2);
            }
        }
        return std::min(f_best, std::min(f1, f2));
    };
}

double random_intercept_score_stat(const std::vector<std::vector<double>>& y,
                                   double sigma2_hat) {
    if (y.empty()) throw std::invalid_argument(
        "random_intercept_score_stat: no clusters");
    if (!(sigma2_hat > 0.0))
        throw std::invalid_argument(
            "random_intercept_score_stat: sigma2 must be positive");
    const size_t n = y.front().size();
    if (n == 0)
        throw std::invalid_argument(
            "random_intercept_score_stat: empty cluster");
    double sum_sq = 0.0;
    for (const auto& cluster : y) {
        if (cluster.size() != n)
            throw std::invalid_argument(
                "random_intercept_score_stat: clusters must be balanced");
        double s = 0.0;
        for (double v : cluster) s += v;
        sum_sq += s * s;
    }
    const double N = static_cast<double>(y.size());
    const double nn = static_cast<double>(n);
    const double C = sum_sq / (sigma2_hat * N * nn);
    const double denom = 2.0 * nn * C - 1.0;
    if (!(denom > 0.0))
        throw std::invalid_argument(
            "random_intercept_score_stat: nonpositive denominator 2nC-1");
    return 0.5 * N * nn * (C - 1.0) * (C - 1.0) / denom;
}

namespace {

// Number of structurally free Cholesky entries of a spec.
int chol_count(const ModelSpec& spec) {
    return RandomEffectsStructure::from_spec(spec).n_free();
}

void check_nested(const ModelSpec& null_spec, const ModelSpec& alt_spec) {
    if (null_spec.has_confounder != alt_spec.has_confounder ||
        null_spec.delta != alt_spec.delta)
        throw std::invalid_argument(
            "variance_component_test: specs differ beyond random slopes");
    for (Process p : alt_spec.processes()) {
        const auto& dn = null_spec.design(p);
        const auto& da = alt_spec.design(p);
        if (dn.init_covariates != da.init_covariates ||
            dn.slope_covariates != da.slope_covariates)
            throw std::invalid_argument(
                "variance_component_test: designs differ beyond random "
                "slopes");
        if (dn.random_slope && !da.random_slope)
            throw std::invalid_argument(
                "variance_component_test: null not nested in alternative");
    }
}

} // namespace

BoundaryTestResult variance_component_test(const ModelSpec& spec_null,
                                           const ModelSpec& spec_alt,
                                           const Dataset& data,
                                           const FitOptions& opts) {
    spec_null.validate();
    spec_alt.validate();
    check_nested(spec_null, spec_alt);
    int added_slopes = 0;
    for (Process p : spec_alt.processes())
        if (spec_alt.design(p).random_slope &&
            !spec_null.design(p).random_slope)
            ++added_slopes;

    const ThetaMap map_null = build_theta_map(spec_null);
    const ThetaMap map_alt = build_theta_map(spec_alt);
    const FitResult fit_null = fit_mle(spec_null, map_null, data, opts);
    const FitResult fit_alt = fit_mle(spec_alt, map_alt, data, opts);
    if (!fit_null.converged)
        throw std::runtime_error("variance_component_test: null fit: " +
                                 fit_null.message);
    if (!fit_alt.converged)
        throw std::runtime_error("variance_component_test: alternative fit: " +
                                 fit_alt.message);

    if (added_slopes == 0)
        return lrt_boundary(fit_null.loglik, fit_alt.loglik, 0, 0, true);
    if (added_slopes > 1)
        throw std::invalid_argument(
            "variance_component_test: add one random slope at a time");
    // the added slope brings its variance plus its correlations with the
    // null effects; k is that correlation count
    const int k = chol_count(spec_alt) - chol_count(spec_null) - 1;
    return lrt_boundary(fit_null.loglik, fit_alt.loglik, k, 1, true);
}

} // namespace medpath
