#include "medpath/theta.hpp"

namespace medpath {

ThetaMap ThetaMap::build(const ModelSpec& spec) {
    spec.validate();
    ThetaMap m;
    auto add = [&m](const std::string& name) {
        if (!m.by_name_.emplace(name, m.dim_).second)
            throw std::invalid_argument("ThetaMap: duplicate parameter name " +
                                        name);
        m.names_.push_back(name);
        return m.dim_++;
    };
    auto term_name = [](const CovariateTerm& t) {
        return t.time_scaled ? t.name + "_x_time" : t.name;
    };

    for (Process p : spec.processes()) {
        m.beta_off_[idx(p)] = m.dim_;
        for (const auto& t : spec.design(p).init_covariates)
            add("beta." + process_name(p) + "." + term_name(t));
        m.beta_dim_[idx(p)] = m.dim_ - m.beta_off_[idx(p)];
    }
    for (Process p : spec.processes()) {
        m.gamma_off_[idx(p)] = m.dim_;
        for (const auto& t : spec.design(p).slope_covariates)
            add("gamma." + process_name(p) + "." + term_name(t));
        m.gamma_dim_[idx(p)] = m.dim_ - m.gamma_off_[idx(p)];
    }

    m.effects_ = RandomEffectsStructure::from_spec(spec);
    m.chol_off_ = m.dim_;
    m.chol_dim_ = m.effects_.n_free();
    for (int k = 1; k <= m.chol_dim_; ++k) add("chol." + std::to_string(k));

    for (Edge e : kAllEdges) {
        const InfluenceSpec* inf = spec.find_influence(e);
        if (!inf) continue;
        m.alpha_off_[eidx(e)] = m.dim_;
        add("alpha." + edge_tag(e) + ".0");
        for (const auto& mod : inf->modifiers)
            add("alpha." + edge_tag(e) + "." + mod);
        m.alpha_dim_[eidx(e)] = m.dim_ - m.alpha_off_[eidx(e)];
    }

    for (Process p : spec.processes())
        m.sigma_off_[idx(p)] = add("sigma." + process_name(p));

    return m;
}

int ThetaMap::index(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
        throw std::invalid_argument("ThetaMap: unknown parameter name " + name);
    return it->second;
}

Eigen::VectorXd ThetaMap::from_named(
    const std::unordered_map<std::string, double>& values) const {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim_);
    for (const auto& [name, v] : values) theta(index(name)) = v;
    return theta;
}

ThetaMap build_theta_map(const ModelSpec& spec) { return ThetaMap::build(spec); }

} // namespace medpath
