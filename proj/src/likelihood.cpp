#include "medpath/likelihood.hpp"

#include <map>
#include <numbers>
#include <vector>

namespace medpath {

namespace {

// Basis propagation depends on the subject only through its design rows and
// grid; subjects sharing them (common in simulated cohorts with discrete
// covariates) can share one propagation over the longest grid, of which
// shorter grids are prefixes.
std::vector<double> signature(const PreparedSubject& s) {
    std::vector<double> key;
    key.push_back(s.grid.t0);
    key.push_back(s.grid.delta);
    auto push = [&key](const Eigen::VectorXd& v) {
        key.push_back(static_cast<double>(v.size()));
        for (Eigen::Index i = 0; i < v.size(); ++i) key.push_back(v(i));
    };
    for (const auto& v : s.x_init) push(v);
    for (const auto& v : s.x_slope_static) push(v);
    for (const auto& v : s.x_slope_tscaled) push(v);
    for (const auto& v : s.x_alpha) push(v);
    return key;
}

double subject_loglik(const PreparedSubject& s, const LatentAffineBasis& basis,
                      const Eigen::MatrixXd& D,
                      const std::array<double, 3>& sigma2, double log2pi) {
    const int n = s.n_obs;
    Eigen::VectorXd mean(n), observed(n), err_var(n);
    Eigen::MatrixXd phi(n, D.rows());
    int row = 0;
    for (Process p : kAllProcesses) {
        const auto pi = static_cast<size_t>(p);
        for (const auto& [node, value] : s.obs[pi]) {
            mean(row) = basis.mean[pi](node);
            observed(row) = value;
            phi.row(row) = basis.loading[pi].row(node);
            err_var(row) = sigma2[pi];
            ++row;
        }
    }
    Eigen::MatrixXd cov = phi * D * phi.transpose();
    cov.diagonal() += err_var;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "log_likelihood: covariance not positive definite for subject " +
            s.id);
    const Eigen::VectorXd w = llt.matrixL().solve(observed - mean);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
    return -0.5 * (n * log2pi + w.squaredNorm()) - logdet;
}

} // namespace

double log_likelihood(const ModelSpec& spec, const ThetaMap& map,
                      const Eigen::VectorXd& theta,
                      const PreparedDataset& data) {
    const auto& re = map.effects();
    const Eigen::MatrixXd D = re.covariance(map.chol(theta));
    std::array<double, 3> sigma2{0.0, 0.0, 0.0};
    for (Process p : spec.processes())
        sigma2[static_cast<size_t>(p)] = map.sigma2(theta, p);
    const double log2pi = std::log(2.0 * std::numbers::pi);

    // group subjects by design signature; propagate once per group
    std::map<std::vector<double>, std::vector<const PreparedSubject*>> groups;
    for (const auto& s : data.subjects) {
        if (s.n_obs == 0) continue;
        groups[signature(s)].push_back(&s);
    }

    double ll = 0.0;
    for (const auto& [key, members] : groups) {
        const PreparedSubject* longest = members.front();
        for (const auto* s : members)
            if (s->grid.n_nodes > longest->grid.n_nodes) longest = s;
        const LatentAffineBasis basis =
            propagate_basis(spec, map, theta, *longest);
        for (const auto* s : members)
            ll += subject_loglik(*s, basis, D, sigma2, log2pi);
    }
    return ll;
}

double log_likelihood(const ModelSpec& spec, const ThetaMap& map,
                      const Eigen::VectorXd& theta, const Dataset& data) {
    return log_likelihood(spec, map, theta,
                          PreparedDataset::prepare(spec, map, data));
}

} // namespace medpath
