#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "areagp/types.hpp"

namespace areagp {

// Per-region maximum-likelihood fit of the independent GP time-series model
// y ~ N(X*beta, sigma2 * (R(phi) + nu2 * I)).
struct MLFit {
  std::string region_id;
  Eigen::VectorXd beta_hat;
  double sigma2_hat = 1.0;
  double phi_hat = 1.0;
  double nu2_hat = 1.0;
  double max_loglik = 0.0;
  bool converged = false;
  bool degenerate = false;  // sigma2 pinned at the lower optimization bound
};

// The full prior hierarchy consumed by the sampler.
struct PriorSpec {
  double beta_prior_variance = 1e5;
  struct {
    double a = 0.0;     // intercept of log(phi) | log(sigma2)
    double b = 0.0;     // slope
    double chi2 = 1.0;  // conditional variance
  } phi_cond;
  struct {
    double mu_nu = 0.0;
    double sigma2_nu = 1.0;
  } nu_prior;
  struct {
    double m_mean = 0.0;
    double m_var = 10.0;
    double omega2_shape = 1.0;  // inverse-gamma shape
    double omega2_rate = 0.01;  // inverse-gamma rate
    bool rho_sampled = false;
    double rho_value = 0.9;
  } car;

  void validate() const;
};

struct FitOptions {
  double sigma2_floor = 1e-12;
  double simplex_tol = 1e-7;
  int max_iter = 400;
  // Starting grids for the derivative-free search, in natural units. phi
  // entries are fractions of T; empty means the default 3x3 grid.
  std::vector<double> phi_start_fractions = {0.05, 0.2, 0.5};
  std::vector<double> nu2_starts = {0.1, 1.0, 10.0};
};

// Profile log-likelihood at fixed (phi, nu2): beta and sigma2 maximized in
// closed form. Returns the profiled values through the out-parameters.
double profile_loglik(const Eigen::VectorXd& y,
                      const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                      const std::vector<int>& times, const Eigen::MatrixXd& design,
                      double kappa, double phi, double nu2, Eigen::VectorXd* beta_out,
                      double* sigma2_out, double sigma2_floor = 1e-12);

MLFit fit_independent_gp(const Eigen::VectorXd& y,
                         const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                         const std::vector<int>& times, const Eigen::MatrixXd& design,
                         double kappa, const FitOptions& options = {});

// All regions of a panel; fits are returned in region order.
std::vector<MLFit> fit_all_regions(const PanelDataset& panel, const DesignSpec& design_spec,
                                   double kappa, const FitOptions& options = {});

// Derives (a, b, chi2) from OLS of log(phi_hat) on log(sigma2_hat), the
// nu-prior moments, and default CAR hyperprior constants. Requires at least
// three converged, non-degenerate fits.
PriorSpec calibrate_priors(const std::vector<MLFit>& fits);

// AIC-based Fourier degree selection over ordinary least-squares fits.
// Ties break toward the smaller degree.
int select_fourier_degree(const Eigen::VectorXd& y,
                          const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                          const std::vector<int>& times, int period,
                          const std::vector<int>& candidate_degrees);

// Pooled selection: smallest AIC summed across all regions of the panel.
int select_fourier_degree_panel(const PanelDataset& panel,
                                const std::vector<int>& candidate_degrees);

}  // namespace areagp
