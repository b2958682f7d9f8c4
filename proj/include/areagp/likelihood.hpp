#pragma once

#include <Eigen/Dense>

#include "areagp/types.hpp"

namespace areagp {

// Gaussian noise log-likelihood for one region: residual r = y - X*beta - z
// with independent variance tau2 = nu2 * sigma2 per observed entry. Entries
// with mask false are excluded.
double loglik_region(const RegionParams& params, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& y,
                     const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                     const Eigen::MatrixXd& design);

// Noise log-likelihood from a precomputed residual sum of squares.
double loglik_noise(double ssr, int n_obs, double tau2);

}  // namespace areagp
