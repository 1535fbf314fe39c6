#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "medpath/dataset.hpp"
#include "medpath/model_spec.hpp"
#include "medpath/theta.hpp"

namespace medpath {

// Uniform per-subject grid anchored at t0 with step delta.
struct TimeGrid {
    double t0 = 0.0;
    double delta = 0.1;
    int n_nodes = 1;

    double time(int i) const { return t0 + delta * i; }

    // Nearest node; snapping error is at most delta/2.
    int snap(double t) const {
        const int i = static_cast<int>(std::lround((t - t0) / delta));
        if (i < 0 || i >= n_nodes)
            throw std::invalid_argument("time " + std::to_string(t) +
                                        " outside grid span");
        return i;
    }

    static TimeGrid spanning(double t0, double t_max, double delta) {
        TimeGrid g;
        g.t0 = t0;
        g.delta = delta;
        g.n_nodes = std::max(0, static_cast<int>(
                                    std::lround((t_max - t0) / delta))) +
                    1;
        return g;
    }
};

// Exact affine representation of the discretized latent system: for each
// process a and node i, latent value = mean(i) + loading.row(i) * b with b
// the random-effects vector in the public ordering.
struct LatentAffineBasis {
    TimeGrid grid;
    std::array<Eigen::VectorXd, 3> mean;      // per process, n_nodes
    std::array<Eigen::MatrixXd, 3> loading;   // per process, n_nodes x q
    int q = 0;

    double value_at(Process p, int node, const Eigen::VectorXd& b) const {
        const auto pi = static_cast<size_t>(p);
        return mean[pi](node) + loading[pi].row(node).dot(b);
    }
};

// Subject data resolved against a spec: numeric design rows and snapped
// observation nodes, so likelihood evaluations avoid name lookups.
struct PreparedSubject {
    std::string id;
    TimeGrid grid;
    // init design row per process, aligned with the beta block
    std::array<Eigen::VectorXd, 3> x_init;
    // slope design split into static and time-scaled parts (gamma block)
    std::array<Eigen::VectorXd, 3> x_slope_static;
    std::array<Eigen::VectorXd, 3> x_slope_tscaled;
    // modifier design row per edge, aligned with the alpha block; empty when
    // the edge is absent
    std::array<Eigen::VectorXd, 3> x_alpha;
    // (node, value) per marker
    std::array<std::vector<std::pair<int, double>>, 3> obs;
    int n_obs = 0;

    static PreparedSubject prepare(const ModelSpec& spec, const ThetaMap& map,
                                   const SubjectRecord& subject);
};

struct PreparedDataset {
    std::vector<PreparedSubject> subjects;

    static PreparedDataset prepare(const ModelSpec& spec, const ThetaMap& map,
                                   const Dataset& data);
};

// Forward-Euler propagation of the affine system. Throws on a non-finite
// intermediate value, naming the grid node.
LatentAffineBasis propagate_basis(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const PreparedSubject& subject);

LatentAffineBasis propagate_basis(const ModelSpec& spec, const ThetaMap& map,
                                  const Eigen::VectorXd& theta,
                                  const SubjectRecord& subject,
                                  const TimeGrid& grid);

// Marginal moments of the stacked observed markers (L, M, Y order, each in
// observation order): mean and covariance Phi D Phi^T + diag(sigma^2).
struct MarginalMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::VectorXd observed;  // stacked observed values in the same order
};

MarginalMoments marginal_moments(const ModelSpec& spec, const ThetaMap& map,
                                 const Eigen::VectorXd& theta,
                                 const PreparedSubject& subject);

MarginalMoments marginal_moments(const ModelSpec& spec, const ThetaMap& map,
                                 const Eigen::VectorXd& theta,
                                 const SubjectRecord& subject);

} // namespace medpath
