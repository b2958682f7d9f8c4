#pragma once

#include <Eigen/Dense>
#include <vector>

#include "areagp/matern.hpp"
#include "areagp/types.hpp"

namespace areagp {

// Cholesky factorization of a symmetric positive-definite matrix with the
// escalating jitter policy: on failure add 1e-10 * scale to the diagonal,
// escalate x10 up to 1e-6 * scale, then throw NumericalError.
struct CholFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;     // log determinant of the factored matrix
  double jitter_used = 0.0; // absolute diagonal shift that was applied

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt.solve(b); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt.solve(b); }
};

CholFactor chol_spd(const Eigen::MatrixXd& m, double scale, const std::string& context);

// Matern correlation matrix R with R(t,t') = rho(|t - t'|).
Eigen::MatrixXd build_correlation(const MaternKernel& kernel, const std::vector<int>& times);

// Entrywise derivative of R with respect to log(phi).
Eigen::MatrixXd build_correlation_dlogphi(const MaternKernel& kernel,
                                          const std::vector<int>& times);

// Covariance sigma2 * R over the given time grid.
Eigen::MatrixXd build_covariance(const MaternKernel& kernel, double sigma2,
                                 const std::vector<int>& times);

// Zero-mean Gaussian log-density of z under build_covariance(kernel, sigma2, times),
// computed through the factorization.
double logdens_gp(const Eigen::VectorXd& z, double sigma2, const MaternKernel& kernel,
                  const std::vector<int>& times);

// Same density evaluated from a cached factorization of the correlation matrix.
double logdens_gp_cached(const Eigen::VectorXd& z, double sigma2, const CholFactor& corr_chol);

}  // namespace areagp
