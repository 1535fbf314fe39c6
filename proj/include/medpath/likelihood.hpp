#pragma once

#include <Eigen/Dense>

#include "medpath/basis.hpp"

namespace medpath {

// Sum over subjects of the multivariate-normal log density of the stacked
// observed values at the subject's marginal moments. Subjects without
// observations contribute 0; missing markers at a visit are simply absent
// rows (MAR). Throws when a subject covariance is not positive definite,
// naming the subject.
double log_likelihood(const ModelSpec& spec, const ThetaMap& map,
                      const Eigen::VectorXd& theta,
                      const PreparedDataset& data);

double log_likelihood(const ModelSpec& spec, const ThetaMap& map,
                      const Eigen::VectorXd& theta, const Dataset& data);

} // namespace medpath
