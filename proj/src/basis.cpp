#include "medpath/basis.hpp"

namespace medpath {

void SubjectRecord::validate() const {
    for (Process p : kAllProcesses) {
        for (const auto& o : obs(p)) {
            if (!std::isfinite(o.time) || !std::isfinite(o.value))
                throw std::invalid_argument("subject " + id +
                                            ": non-finite observation for marker " +
                                            process_name(p));
            if (o.time < t0)
                throw std::invalid_argument("subject " + id +
                                            ": observation time before t0");
        }
    }
    for (const auto& [name, v] : baseline)
        if (!std::isfinite(v))
            throw std::invalid_argument("subject " + id +
                                        ": non-finite baseline covariate '" +
                                        name + "'");
}

PreparedSubject PreparedSubject::prepare(const ModelSpec& spec,
                                         const ThetaMap& map,
                                         const SubjectRecord& subject) {
    PreparedSubject ps;
    ps.id = subject.id;

    double t_max = subject.t0;
    for (Process p : kAllProcesses)
        for (const auto& o : subject.obs(p)) t_max = std::max(t_max, o.time);
    ps.grid = TimeGrid::spanning(subject.t0, t_max, spec.delta);

    for (Process p : spec.processes()) {
        const auto& d = spec.design(p);
        const auto pi = static_cast<size_t>(p);
        ps.x_init[pi].resize(static_cast<Eigen::Index>(d.init_covariates.size()));
        for (size_t k = 0; k < d.init_covariates.size(); ++k) {
            const auto& term = d.init_covariates[k];
            double v = subject.covariate(term.name);
            if (term.time_scaled) v *= subject.t0;
            ps.x_init[pi](static_cast<Eigen::Index>(k)) = v;
        }
        const auto ns = d.slope_covariates.size();
        ps.x_slope_static[pi] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
        ps.x_slope_tscaled[pi] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
        for (size_t k = 0; k < ns; ++k) {
            const auto& term = d.slope_covariates[k];
            const double v = subject.covariate(term.name);
            if (term.time_scaled)
                ps.x_slope_tscaled[pi](static_cast<Eigen::Index>(k)) = v;
            else
                ps.x_slope_static[pi](static_cast<Eigen::Index>(k)) = v;
        }
    }

    for (const auto& inf : spec.influences) {
        const auto ei = static_cast<size_t>(inf.edge);
        ps.x_alpha[ei].resize(1 + static_cast<Eigen::Index>(inf.modifiers.size()));
        ps.x_alpha[ei](0) = 1.0;
        for (size_t k = 0; k < inf.modifiers.size(); ++k)
            ps.x_alpha[ei](1 + static_cast<Eigen::Index>(k)) =
                subject.covariate(inf.modifiers[k]);
    }

    for (Process p : kAllProcesses) {
        if (!spec.has_process(p) && !subject.obs(p).empty())
            throw std::invalid_argument("subject " + subject.id +
                                        ": observations for absent process " +
                                        process_name(p));
        for (const auto& o : subject.obs(p))
            ps.obs[static_cast<size_t>(p)].emplace_back(ps.grid.snap(o.time),
                                                        o.value);
        ps.n_obs += static_cast<int>(subject.obs(p).size());
    }
    (void)map;
    return ps;
}

PreparedDataset PreparedDataset::prepare(const ModelSpec& spec,
                                         const ThetaMap& map,
                                         const Dataset& data) {
    PreparedDataset pd;
    pd.subjects.reserve(data.subjects.size());
    for (const auto& s : data.subjects)
        pd.subjects.push_back(PreparedSubject::prepare(spec, map, s));
    return pd;
}

LatentAffineBasis propagate_basis(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const PreparedSubject& subject) {
    const auto& re = map.effects();
    const int q = re.dim();
    const int n = subject.grid.n_nodes;

    LatentAffineBasis basis;
    basis.grid = subject.grid;
    basis.q = q;

    const auto procs = spec.processes();
    for (Process p : procs) {
        const auto pi = static_cast<size_t>(p);
        basis.mean[pi].resize(n);
        basis.loading[pi].setZero(n, q);
    }

    // per-process pieces of the drift
    std::array<double, 3> gamma_static{}, gamma_tscaled{};
    std::array<int, 3> v_index{-1, -1, -1};
    for (Process p : procs) {
        const auto pi = static_cast<size_t>(p);
        const Eigen::VectorXd g = map.gamma(theta, p);
        gamma_static[pi] = subject.x_slope_static[pi].dot(g);
        gamma_tscaled[pi] = subject.x_slope_tscaled[pi].dot(g);
        v_index[pi] = re.index_of(p, true);
    }
    std::array<double, 3> alpha{};
    for (const auto& inf : spec.influences) {
        const auto ei = static_cast<size_t>(inf.edge);
        alpha[ei] = subject.x_alpha[ei].dot(map.alpha(theta, inf.edge));
    }

    // initial conditions: mean = x0' beta, loading selects u^a
    for (Process p : procs) {
        const auto pi = static_cast<size_t>(p);
        basis.mean[pi](0) = subject.x_init[pi].dot(map.beta(theta, p));
        basis.loading[pi](0, re.index_of(p, false)) = 1.0;
    }

    const double delta = subject.grid.delta;
    Eigen::VectorXd drift_load(q);
    for (int i = 0; i + 1 < n; ++i) {
        const double t = subject.grid.time(i);
        for (Process p : procs) {
            const auto pi = static_cast<size_t>(p);
            double drift_mean = gamma_static[pi] + t * gamma_tscaled[pi];
            drift_load.setZero();
            if (v_index[pi] >= 0) drift_load(v_index[pi]) = 1.0;
            for (const auto& inf : spec.influences) {
                if (edge_target(inf.edge) != p) continue;
                const auto si = static_cast<size_t>(edge_source(inf.edge));
                const double a = alpha[static_cast<size_t>(inf.edge)];
                drift_mean += a * basis.mean[si](i);
                drift_load.noalias() += a * basis.loading[si].row(i).transpose();
            }
            const double next = basis.mean[pi](i) + delta * drift_mean;
            if (!std::isfinite(next))
                throw std::runtime_error(
                    "propagate_basis: non-finite value for process " +
                    process_name(p) + " at grid node " + std::to_string(i + 1) +
                    " (t=" + std::to_string(subject.grid.time(i + 1)) + ")");
            basis.mean[pi](i + 1) = next;
            basis.loading[pi].row(i + 1) =
                basis.loading[pi].row(i) + delta * drift_load.transpose();
        }
    }
    return basis;
}

LatentAffineBasis propagate_basis(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const SubjectRecord& subject,
                                  const TimeGrid& grid) {
    PreparedSubject ps = PreparedSubject::prepare(spec, map, subject);
    if (grid.n_nodes > ps.grid.n_nodes) ps.grid = grid;
    return propagate_basis(spec, map, theta, ps);
}

MarginalMoments marginal_moments(const ModelSpec& spec, const ThetaMap& map,
                                 const Eigen::VectorXd& theta,
                                 const PreparedSubject& subject) {
    MarginalMoments mm;
    const int n = subject.n_obs;
    mm.mean.resize(n);
    mm.observed.resize(n);
    mm.cov.resize(n, n);
    if (n == 0) return mm;

    const LatentAffineBasis basis = propagate_basis(spec, map, theta, subject);
    const auto& re = map.effects();
    const Eigen::MatrixXd D = re.covariance(map.chol(theta));

    Eigen::MatrixXd phi(n, re.dim());
    Eigen::VectorXd err_var(n);
    int row = 0;
    for (Process p : kAllProcesses) {
        const auto pi = static_cast<size_t>(p);
        if (subject.obs[pi].empty()) continue;
        const double s2 = map.sigma2(theta, p);
        for (const auto& [node, value] : subject.obs[pi]) {
            mm.mean(row) = basis.mean[pi](node);
            mm.observed(row) = value;
            phi.row(row) = basis.loading[pi].row(node);
            err_var(row) = s2;
            ++row;
        }
    }
    mm.cov.noalias() = phi * D * phi.transpose();
    mm.cov.diagonal() += err_var;
    return mm;
}

MarginalMoments marginal_moments(const ModelSpec& spec, const ThetaMap& map,
                                 const Eigen::VectorXd& theta,
                                 const SubjectRecord& subject) {
    return marginal_moments(spec, map, theta,
                            PreparedSubject::prepare(spec, map, subject));
}

} // namespace medpath
