#include "medpath/model_spec.hpp"

#include <set>

namespace medpath {

void ModelSpec::validate() const {
    if (delta <= 0.0)
        throw std::invalid_argument("ModelSpec: delta must be > 0");
    if (!has_confounder) {
        if (!design_L.init_covariates.empty() ||
            !design_L.slope_covariates.empty() || design_L.random_slope)
            throw std::invalid_argument(
                "ModelSpec: L design must be empty when has_confounder is false");
        for (const auto& inf : influences)
            if (edge_source(inf.edge) == Process::L)
                throw std::invalid_argument(
                    "ModelSpec: influence edge touches L but has_confounder is false");
    }
    std::set<int> seen_edges;
    for (const auto& inf : influences) {
        if (!seen_edges.insert(static_cast<int>(inf.edge)).second)
            throw std::invalid_argument("ModelSpec: duplicate influence edge " +
                                        edge_tag(inf.edge));
        std::set<std::string> mods;
        for (const auto& m : inf.modifiers)
            if (!mods.insert(m).second)
                throw std::invalid_argument(
                    "ModelSpec: duplicate modifier '" + m + "' on edge " +
                    edge_tag(inf.edge));
    }
    for (Process p : processes()) {
        const auto& d = design(p);
        auto check_block = [&](const std::vector<CovariateTerm>& block,
                               const char* what) {
            std::set<std::string> names;
            for (const auto& term : block)
                if (!names.insert(term.name).second)
                    throw std::invalid_argument(
                        std::string("ModelSpec: duplicate covariate name '") +
                        term.name + "' in " + what + " block of process " +
                        process_name(p));
        };
        check_block(d.init_covariates, "init");
        check_block(d.slope_covariates, "slope");
        if (d.init_covariates.empty())
            throw std::invalid_argument(
                "ModelSpec: empty init design for process " + process_name(p));
        if (d.slope_covariates.empty())
            throw std::invalid_argument(
                "ModelSpec: empty slope design for process " + process_name(p));
    }
}

RandomEffectsStructure RandomEffectsStructure::from_spec(const ModelSpec& spec) {
    RandomEffectsStructure s;
    for (Process p : spec.processes())
        s.order.push_back({p, false});
    for (Process p : spec.processes())
        if (spec.design(p).random_slope) s.order.push_back({p, true});

    const int q = s.dim();

    // Factor enumeration: slopes first, then levels, both in process order.
    s.factor_index.assign(q, -1);
    int next = 0;
    for (int i = 0; i < q; ++i)
        if (s.order[i].is_slope) s.factor_index[i] = next++;
    for (int i = 0; i < q; ++i)
        if (!s.order[i].is_slope) s.factor_index[i] = next++;

    s.allowed_mask.setConstant(q, q, false);
    for (int i = 0; i < q; ++i) {
        const auto& ei = s.order[i];
        const int fi = s.factor_index[i];
        if (ei.is_slope) {
            s.allowed_mask(fi, fi) = true;
            continue;
        }
        // level row: own slope column (if present) plus level columns up to i
        int vi = s.index_of(ei.process, true);
        if (vi >= 0) s.allowed_mask(fi, s.factor_index[vi]) = true;
        for (int j = 0; j < q; ++j) {
            if (s.order[j].is_slope) continue;
            const int fj = s.factor_index[j];
            if (fj <= fi) s.allowed_mask(fi, fj) = true;
        }
    }
    return s;
}

int RandomEffectsStructure::n_free() const {
    int n = 0;
    for (int c = 0; c < dim(); ++c)
        for (int r = c; r < dim(); ++r)
            if (allowed_mask(r, c)) ++n;
    return n;
}

int RandomEffectsStructure::index_of(Process p, bool is_slope) const {
    for (int i = 0; i < dim(); ++i)
        if (order[i].process == p && order[i].is_slope == is_slope) return i;
    return -1;
}

bool RandomEffectsStructure::d_allowed(int r, int c) const {
    const auto& er = order[static_cast<size_t>(r)];
    const auto& ec = order[static_cast<size_t>(c)];
    if (!er.is_slope && !ec.is_slope) return true;
    if (r == c) return true;
    return er.process == ec.process;
}

std::vector<std::pair<int, int>> RandomEffectsStructure::free_positions() const {
    std::vector<std::pair<int, int>> pos;
    for (int c = 0; c < dim(); ++c)
        for (int r = c; r < dim(); ++r)
            if (allowed_mask(r, c)) pos.emplace_back(r, c);
    return pos;
}

Eigen::MatrixXd RandomEffectsStructure::factor(
    const Eigen::VectorXd& chol_entries) const {
    const auto pos = free_positions();
    if (chol_entries.size() != static_cast<Eigen::Index>(pos.size()))
        throw std::invalid_argument("RandomEffectsStructure::factor: expected " +
                                    std::to_string(pos.size()) + " entries, got " +
                                    std::to_string(chol_entries.size()));
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(dim(), dim());
    for (size_t k = 0; k < pos.size(); ++k)
        F(pos[k].first, pos[k].second) = chol_entries(static_cast<Eigen::Index>(k));
    // reorder rows back to the public ordering
    Eigen::MatrixXd A(dim(), dim());
    for (int i = 0; i < dim(); ++i) A.row(i) = F.row(factor_index[i]);
    return A;
}

Eigen::MatrixXd RandomEffectsStructure::covariance(
    const Eigen::VectorXd& chol_entries) const {
    Eigen::MatrixXd A = factor(chol_entries);
    return A * A.transpose();
}

} // namespace medpath
