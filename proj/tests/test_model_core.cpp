#include <doctest.h>

#include "medpath/basis.hpp"
#include "medpath/simulation.hpp"

using namespace medpath;

namespace {

SubjectRecord basic_subject(double x, double t0 = 0.0) {
    SubjectRecord s;
    s.id = "s";
    s.t0 = t0;
    s.baseline["X"] = x;
    return s;
}

} // namespace

TEST_CASE("theta map layout for the with-confounder generating model") {
    const ModelSpec spec = scenario1_spec(true);
    const ThetaMap map = build_theta_map(spec);
    CHECK(map.contains("beta.L.intercept"));
    CHECK(map.contains("beta.Y.X"));
    CHECK(map.contains("gamma.M.X"));
    CHECK(map.contains("alpha.ML.0"));
    CHECK(map.contains("alpha.YL.0"));
    CHECK(map.contains("alpha.YM.0"));
    CHECK(map.contains("sigma.Y"));
    CHECK(map.chol_dim() == 12);
    CHECK(map.dim() == static_cast<int>(map.names().size()));
    // name -> index round trip
    for (int i = 0; i < map.dim(); ++i)
        CHECK(map.index(map.names()[static_cast<size_t>(i)]) == i);
}

TEST_CASE("theta map layout without the confounder") {
    const ModelSpec spec = scenario1_spec(false);
    const ThetaMap map = build_theta_map(spec);
    CHECK(!map.contains("beta.L.intercept"));
    CHECK(!map.contains("alpha.ML.0"));
    CHECK(map.contains("alpha.YM.0"));
    CHECK(map.chol_dim() == 7);
}

TEST_CASE("random-effects covariance has exact structural zeros") {
    const ModelSpec spec = scenario1_spec(true);
    const auto eff = RandomEffectsStructure::from_spec(spec);
    REQUIRE(eff.dim() == 6);
    Eigen::VectorXd chol(eff.n_free());
    for (int i = 0; i < chol.size(); ++i)
        chol(i) = 0.3 + 0.17 * i * (i % 2 == 0 ? 1 : -1);
    const Eigen::MatrixXd D = eff.covariance(chol);
    CHECK((D - D.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (int r = 0; r < eff.dim(); ++r)
        for (int c = 0; c < eff.dim(); ++c) {
            const bool u_r = !eff.order[static_cast<size_t>(r)].is_slope;
            const bool u_c = !eff.order[static_cast<size_t>(c)].is_slope;
            const Process pr = eff.order[static_cast<size_t>(r)].process;
            const Process pc = eff.order[static_cast<size_t>(c)].process;
            const bool allowed =
                r == c || (u_r && u_c) || (pr == pc && (u_r != u_c));
            if (!allowed) CHECK(D(r, c) == 0.0);
            // levels are freely correlated; check a representative is nonzero
        }
    // u-u and own u-v blocks actually move with the parameters
    const int uL = eff.index_of(Process::L, false);
    const int uM = eff.index_of(Process::M, false);
    const int vL = eff.index_of(Process::L, true);
    CHECK(std::abs(D(uL, uM)) > 0.0);
    CHECK(std::abs(D(uL, vL)) > 0.0);
}

TEST_CASE("factor reproduces covariance and drives b = A z") {
    const ModelSpec spec = scenario1_spec(true);
    const auto eff = RandomEffectsStructure::from_spec(spec);
    Eigen::VectorXd chol = Eigen::VectorXd::LinSpaced(eff.n_free(), 0.2, 1.4);
    const Eigen::MatrixXd A = eff.factor(chol);
    const Eigen::MatrixXd D = eff.covariance(chol);
    CHECK((A * A.transpose() - D).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant-drift system is exact under Euler") {
    // No influences, no time scaling: value(t) = beta + gamma (t - t0), and
    // the forward scheme is exact at every node regardless of delta.
    ModelSpec spec;
    spec.has_confounder = false;
    for (Process p : {Process::M, Process::Y}) {
        spec.design(p).init_covariates = {{"intercept", false}, {"X", false}};
        spec.design(p).slope_covariates = {{"intercept", false}};
        spec.design(p).random_slope = true;
    }
    spec.delta = 0.25;
    spec.validate();
    const ThetaMap map = build_theta_map(spec);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(map.dim());
    theta(map.index("beta.M.intercept")) = 1.4;
    theta(map.index("beta.M.X")) = 0.5;
    theta(map.index("beta.Y.intercept")) = 1.65;
    theta(map.index("gamma.M.intercept")) = -0.3;
    theta(map.index("gamma.Y.intercept")) = 0.7;

    const SubjectRecord s = basic_subject(1.0);
    const TimeGrid grid = TimeGrid::spanning(0.0, 5.0, spec.delta);
    const LatentAffineBasis basis = propagate_basis(spec, map, theta, s, grid);
    for (int i = 0; i < grid.n_nodes; ++i) {
        const double t = grid.time(i);
        CHECK(basis.mean[1](i) == doctest::Approx(1.9 - 0.3 * t).epsilon(1e-12));
        CHECK(basis.mean[2](i) == doctest::Approx(1.65 + 0.7 * t).epsilon(1e-12));
    }
    // loading columns: 1 for the own level, t for the own slope, 0 elsewhere
    const auto& eff = map.effects();
    const int uM = eff.index_of(Process::M, false);
    const int vM = eff.index_of(Process::M, true);
    const int uY = eff.index_of(Process::Y, false);
    const int node = grid.snap(3.0);
    CHECK(basis.loading[1](node, uM) == doctest::Approx(1.0));
    CHECK(basis.loading[1](node, vM) == doctest::Approx(3.0));
    CHECK(basis.loading[1](node, uY) == doctest::Approx(0.0));
}

TEST_CASE("propagation is affine in the random effects") {
    const ModelSpec spec = scenario1_spec(true);
    const ThetaMap map = build_theta_map(spec);
    const Eigen::VectorXd theta = scenario1_truth(true);
    const SubjectRecord s = basic_subject(1.0);
    const TimeGrid grid = TimeGrid::spanning(0.0, 5.0, spec.delta);
    const LatentAffineBasis basis = propagate_basis(spec, map, theta, s, grid);
    const int q = basis.q;
    Eigen::VectorXd b1 = Eigen::VectorXd::LinSpaced(q, -1.0, 1.0);
    Eigen::VectorXd b2 = Eigen::VectorXd::Constant(q, 0.4);
    const int node = grid.snap(4.0);
    for (size_t p = 0; p < 3; ++p) {
        const auto pp = static_cast<Process>(p);
        const double lhs = basis.value_at(pp, node, 0.3 * b1 + 0.7 * b2);
        const double rhs = 0.3 * basis.value_at(pp, node, b1) +
                           0.7 * basis.value_at(pp, node, b2);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("grid refinement converges at first order") {
    const ThetaMap map0 = build_theta_map(scenario1_spec(true));
    const Eigen::VectorXd theta = scenario1_truth(true);
    const SubjectRecord s = basic_subject(1.0);
    auto value = [&](double delta) {
        ModelSpec spec = scenario1_spec(true);
        spec.delta = delta;
        const TimeGrid grid = TimeGrid::spanning(0.0, 5.0, delta);
        const LatentAffineBasis basis =
            propagate_basis(spec, map0, theta, s, grid);
        return basis.mean[2](grid.snap(5.0));
    };
    const double d1 = value(0.2) - value(0.1);
    const double d2 = value(0.1) - value(0.05);
    CHECK(std::abs(d1 / d2) > 1.6);
    CHECK(std::abs(d1 / d2) < 2.4);
}

TEST_CASE("prepared subjects snap observations to the nearest node") {
    const ModelSpec spec = scenario1_spec(false);
    const ThetaMap map = build_theta_map(spec);
    SubjectRecord s = basic_subject(0.0);
    s.obs(Process::Y) = {{0.0, 1.0}, {1.02, 2.0}, {4.98, 3.0}};
    s.obs(Process::M) = {{2.51, 0.5}};
    const PreparedSubject ps = PreparedSubject::prepare(spec, map, s);
    REQUIRE(ps.obs[2].size() == 3);
    CHECK(ps.obs[2][1].first == 10);  // 1.02 at step 0.1
    CHECK(ps.obs[2][2].first == 50);
    CHECK(ps.obs[1][0].first == 25);
    CHECK(ps.n_obs == 4);
}

TEST_CASE("spec validation rejects confounder edges without the confounder") {
    ModelSpec spec = scenario1_spec(false);
    spec.influences.push_back({Edge::LtoY, {}});
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}
