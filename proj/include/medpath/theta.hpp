#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "medpath/model_spec.hpp"

namespace medpath {

// Bijective map between parameter names and positions in the flat theta
// vector. Layout: beta blocks (L, M, Y as present), gamma blocks, chol
// entries, alpha blocks (edge order ML, YL, YM as present), sigma scalars.
//
// Names: "beta.M.intercept", "gamma.L.age_x_time", "chol.3", "alpha.YM.0"
// (intercept), "alpha.YM.EL" (modifier), "sigma.Y".
class ThetaMap {
  public:
    static ThetaMap build(const ModelSpec& spec);

    int dim() const { return dim_; }
    const std::vector<std::string>& names() const { return names_; }
    int index(const std::string& name) const;
    bool contains(const std::string& name) const {
        return by_name_.count(name) > 0;
    }

    int beta_offset(Process p) const { return beta_off_[idx(p)]; }
    int beta_dim(Process p) const { return beta_dim_[idx(p)]; }
    int gamma_offset(Process p) const { return gamma_off_[idx(p)]; }
    int gamma_dim(Process p) const { return gamma_dim_[idx(p)]; }
    int chol_offset() const { return chol_off_; }
    int chol_dim() const { return chol_dim_; }
    int alpha_offset(Edge e) const { return alpha_off_[eidx(e)]; }
    int alpha_dim(Edge e) const { return alpha_dim_[eidx(e)]; }
    int sigma_offset(Process p) const { return sigma_off_[idx(p)]; }

    Eigen::VectorXd beta(const Eigen::VectorXd& theta, Process p) const {
        return theta.segment(beta_offset(p), beta_dim(p));
    }
    Eigen::VectorXd gamma(const Eigen::VectorXd& theta, Process p) const {
        return theta.segment(gamma_offset(p), gamma_dim(p));
    }
    Eigen::VectorXd chol(const Eigen::VectorXd& theta) const {
        return theta.segment(chol_off_, chol_dim_);
    }
    Eigen::VectorXd alpha(const Eigen::VectorXd& theta, Edge e) const {
        return theta.segment(alpha_offset(e), alpha_dim(e));
    }
    double sigma_raw(const Eigen::VectorXd& theta, Process p) const {
        return theta(sigma_offset(p));
    }
    double sigma2(const Eigen::VectorXd& theta, Process p) const {
        const double s = sigma_raw(theta, p);
        return s * s;
    }

    const RandomEffectsStructure& effects() const { return effects_; }

    // Builds a theta vector from a name -> value table; missing names are 0,
    // unknown names throw.
    Eigen::VectorXd from_named(
        const std::unordered_map<std::string, double>& values) const;

  private:
    static int idx(Process p) { return static_cast<int>(p); }
    static int eidx(Edge e) { return static_cast<int>(e); }

    int dim_ = 0;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> by_name_;
    std::array<int, 3> beta_off_{-1, -1, -1}, beta_dim_{0, 0, 0};
    std::array<int, 3> gamma_off_{-1, -1, -1}, gamma_dim_{0, 0, 0};
    int chol_off_ = -1, chol_dim_ = 0;
    std::array<int, 3> alpha_off_{-1, -1, -1}, alpha_dim_{0, 0, 0};
    std::array<int, 3> sigma_off_{-1, -1, -1};
    RandomEffectsStructure effects_;
};

// Spec-level entry point; equivalent to ThetaMap::build.
ThetaMap build_theta_map(const ModelSpec& spec);

} // namespace medpath
