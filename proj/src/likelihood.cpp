#include "areagp/likelihood.hpp"

#include <cmath>

namespace areagp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double loglik_noise(double ssr, int n_obs, double tau2) {
  if (n_obs == 0) return 0.0;
  return -0.5 * n_obs * std::log(kTwoPi * tau2) - 0.5 * ssr / tau2;
}

double loglik_region(const RegionParams& params, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& y,
                     const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                     const Eigen::MatrixXd& design) {
  params.validate();
  const Eigen::Index T = y.size();
  if (z.size() != T || mask.size() != T || design.rows() != T)
    throw ValidationError("loglik_region: dimension mismatch");
  if (design.cols() != params.beta.size())
    throw ValidationError("loglik_region: beta length does not match design columns");
  const Eigen::VectorXd mean = design * params.beta;
  double ssr = 0.0;
  int n_obs = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!mask(t)) continue;
    const double r = y(t) - mean(t) - z(t);
    ssr += r * r;
    ++n_obs;
  }
  return loglik_noise(ssr, n_obs, params.tau2());
}

}  // namespace areagp
