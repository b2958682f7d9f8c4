#include "areagp/calibrate.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "areagp/covariance.hpp"
#include "areagp/design.hpp"

namespace areagp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void PriorSpec::validate() const {
  if (!(beta_prior_variance > 0.0))
    throw ValidationError("PriorSpec: beta_prior_variance must be > 0");
  if (!(phi_cond.chi2 > 0.0)) throw ValidationError("PriorSpec: chi2 must be > 0");
  if (!(nu_prior.sigma2_nu > 0.0)) throw ValidationError("PriorSpec: sigma2_nu must be > 0");
  if (!(car.m_var > 0.0)) throw ValidationError("PriorSpec: car m_var must be > 0");
  if (!(car.omega2_shape > 0.0) || !(car.omega2_rate > 0.0))
    throw ValidationError("PriorSpec: inverse-gamma shape/rate must be > 0");
  if (car.rho_value < 0.0 || car.rho_value >= 1.0)
    throw ValidationError("PriorSpec: rho_value must be in [0,1)");
}

double profile_loglik(const Eigen::VectorXd& y,
                      const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                      const std::vector<int>& times, const Eigen::MatrixXd& design,
                      double kappa, double phi, double nu2, Eigen::VectorXd* beta_out,
                      double* sigma2_out, double sigma2_floor) {
  // Restrict everything to observed entries.
  std::vector<int> obs_times;
  std::vector<Eigen::Index> obs_rows;
  for (Eigen::Index t = 0; t < y.size(); ++t)
    if (mask(t)) {
      obs_times.push_back(times[static_cast<size_t>(t)]);
      obs_rows.push_back(t);
    }
  const int n = static_cast<int>(obs_rows.size());
  const int p1 = static_cast<int>(design.cols());
  Eigen::VectorXd yo(n);
  Eigen::MatrixXd xo(n, p1);
  for (int k = 0; k < n; ++k) {
    yo(k) = y(obs_rows[k]);
    xo.row(k) = design.row(obs_rows[k]);
  }

  MaternKernel kernel{kappa, phi};
  Eigen::MatrixXd v = build_correlation(kernel, obs_times);
  v.diagonal().array() += nu2;
  const CholFactor chol = chol_spd(v, 1.0 + nu2, "profile_loglik");

  const Eigen::MatrixXd vinv_x = chol.solve(xo);
  const Eigen::VectorXd vinv_y = chol.solve(yo);
  const Eigen::MatrixXd xtvx = xo.transpose() * vinv_x;
  const Eigen::VectorXd beta = xtvx.ldlt().solve(xo.transpose() * vinv_y);
  const Eigen::VectorXd r = yo - xo * beta;
  const double quad = r.dot(chol.solve(r));
  const double sigma2 = std::max(quad / n, sigma2_floor);

  if (beta_out) *beta_out = beta;
  if (sigma2_out) *sigma2_out = sigma2;
  return -0.5 * n * std::log(kTwoPi * sigma2) - 0.5 * chol.log_det - 0.5 * quad / sigma2;
}

namespace {

struct ProfileTarget {
  const Eigen::VectorXd* y;
  const Eigen::Matrix<bool, Eigen::Dynamic, 1>* mask;
  const std::vector<int>* times;
  const Eigen::MatrixXd* design;
  double kappa;
  double sigma2_floor;
  double log_phi_lo, log_phi_hi, log_nu2_lo, log_nu2_hi;
};

double negative_profile(const gsl_vector* x, void* params) {
  const auto* t = static_cast<const ProfileTarget*>(params);
  double lp = gsl_vector_get(x, 0);
  double ln = gsl_vector_get(x, 1);
  // Quadratic penalty outside the search box keeps the simplex from wandering
  // into numerically hopeless territory.
  double penalty = 0.0;
  auto clamp = [&penalty](double v, double lo, double hi) {
    if (v < lo) {
      penalty += (lo - v) * (lo - v);
      return lo;
    }
    if (v > hi) {
      penalty += (v - hi) * (v - hi);
      return hi;
    }
    return v;
  };
  lp = clamp(lp, t->log_phi_lo, t->log_phi_hi);
  ln = clamp(ln, t->log_nu2_lo, t->log_nu2_hi);
  try {
    const double ll = profile_loglik(*t->y, *t->mask, *t->times, *t->design, t->kappa,
                                     std::exp(lp), std::exp(ln), nullptr, nullptr,
                                     t->sigma2_floor);
    return -ll + 1e3 * penalty;
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::max() / 4.0;
  }
}

}  // namespace

MLFit fit_independent_gp(const Eigen::VectorXd& y,
                         const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                         const std::vector<int>& times, const Eigen::MatrixXd& design,
                         double kappa, const FitOptions& options) {
  const int T_obs = static_cast<int>(mask.cast<int>().sum());
  const int p1 = static_cast<int>(design.cols());
  if (T_obs <= p1)
    throw ValidationError("fit_independent_gp: need more observations than coefficients");
  double mean = 0.0, ss = 0.0;
  for (Eigen::Index t = 0; t < y.size(); ++t)
    if (mask(t)) mean += y(t);
  mean /= T_obs;
  for (Eigen::Index t = 0; t < y.size(); ++t)
    if (mask(t)) ss += (y(t) - mean) * (y(t) - mean);
  if (!(ss > 0.0)) throw ValidationError("fit_independent_gp: y is constant");

  const double T_span = static_cast<double>(times.back() - times.front() + 1);
  ProfileTarget target{&y, &mask, &times, &design, kappa, options.sigma2_floor,
                       std::log(1e-2), std::log(100.0 * T_span),
                       std::log(1e-8), std::log(1e8)};

  gsl_multimin_function f;
  f.n = 2;
  f.f = &negative_profile;
  f.params = &target;

  MLFit best;
  best.max_loglik = -std::numeric_limits<double>::infinity();
  best.converged = false;

  gsl_vector* x0 = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_multimin_fminimizer* minimizer =
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);

  for (double pf : options.phi_start_fractions) {
    for (double nu2_start : options.nu2_starts) {
      gsl_vector_set(x0, 0, std::log(std::max(pf * T_span, 1e-2)));
      gsl_vector_set(x0, 1, std::log(nu2_start));
      gsl_vector_set(step, 0, 0.5);
      gsl_vector_set(step, 1, 0.5);
      gsl_multimin_fminimizer_set(minimizer, &f, x0, step);

      bool this_converged = false;
      for (int it = 0; it < options.max_iter; ++it) {
        if (gsl_multimin_fminimizer_iterate(minimizer) != 0) break;
        const double size = gsl_multimin_fminimizer_size(minimizer);
        if (gsl_multimin_test_size(size, options.simplex_tol) == GSL_SUCCESS) {
          this_converged = true;
          break;
        }
      }
      const double lp = gsl_vector_get(minimizer->x, 0);
      const double ln = gsl_vector_get(minimizer->x, 1);
      const double ll = -minimizer->fval;
      if (ll > best.max_loglik) {
        best.max_loglik = ll;
        best.phi_hat = std::exp(std::clamp(lp, target.log_phi_lo, target.log_phi_hi));
        best.nu2_hat = std::exp(std::clamp(ln, target.log_nu2_lo, target.log_nu2_hi));
        best.converged = this_converged;
      }
    }
  }
  gsl_multimin_fminimizer_free(minimizer);
  gsl_vector_free(x0);
  gsl_vector_free(step);

  best.max_loglik = profile_loglik(y, mask, times, design, kappa, best.phi_hat, best.nu2_hat,
                                   &best.beta_hat, &best.sigma2_hat, options.sigma2_floor);
  best.degenerate = (best.sigma2_hat <= options.sigma2_floor);
  return best;
}

std::vector<MLFit> fit_all_regions(const PanelDataset& panel, const DesignSpec& design_spec,
                                   double kappa, const FitOptions& options) {
  panel.validate();
  const Eigen::MatrixXd design = build_design(design_spec, panel.times);
  std::vector<MLFit> fits;
  fits.reserve(panel.n_regions());
  for (int i = 0; i < panel.n_regions(); ++i) {
    MLFit fit = fit_independent_gp(panel.values.row(i).transpose(),
                                   panel.observed.row(i).transpose(), panel.times, design,
                                   kappa, options);
    fit.region_id = panel.region_ids[i];
    fits.push_back(std::move(fit));
  }
  return fits;
}

PriorSpec calibrate_priors(const std::vector<MLFit>& fits) {
  std::vector<const MLFit*> usable;
  for (const auto& f : fits)
    if (f.converged && !f.degenerate) usable.push_back(&f);
  // Order-normalize so parallel fitting never changes the result.
  std::sort(usable.begin(), usable.end(),
            [](const MLFit* a, const MLFit* b) { return a->region_id < b->region_id; });
  const int n = static_cast<int>(usable.size());
  if (n < 3)
    throw ValidationError(
        "calibrate_priors: fewer than 3 converged fits; supply a PriorSpec manually");

  Eigen::VectorXd ls(n), lp(n), ln(n);
  for (int i = 0; i < n; ++i) {
    ls(i) = std::log(usable[i]->sigma2_hat);
    lp(i) = std::log(usable[i]->phi_hat);
    ln(i) = std::log(usable[i]->nu2_hat);
  }

  PriorSpec spec;
  // OLS of log(phi) on log(sigma2).
  const double sx = ls.mean(), sy = lp.mean();
  const double sxx = (ls.array() - sx).square().sum();
  double b = 0.0;
  if (sxx > 0.0) b = ((ls.array() - sx) * (lp.array() - sy)).sum() / sxx;
  const double a = sy - b * sx;
  const double rss = (lp.array() - a - b * ls.array()).square().sum();
  constexpr double variance_floor = 1e-4;
  spec.phi_cond.a = a;
  spec.phi_cond.b = b;
  spec.phi_cond.chi2 = std::max(rss / (n - 2), variance_floor);

  spec.nu_prior.mu_nu = ln.mean();
  spec.nu_prior.sigma2_nu =
      std::max((ln.array() - ln.mean()).square().sum() / (n - 1), variance_floor);

  spec.car.m_mean = sx;
  spec.car.m_var = 10.0;
  spec.car.omega2_shape = 1.0;
  spec.car.omega2_rate = 0.01;
  spec.car.rho_sampled = false;
  spec.car.rho_value = 0.9;
  spec.validate();
  return spec;
}

namespace {

double ols_aic(const Eigen::VectorXd& y, const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
               const std::vector<int>& times, int period, int degree) {
  const int n = static_cast<int>(mask.cast<int>().sum());
  if (2 * degree + 1 >= n)
    throw ValidationError("select_fourier_degree: candidate J=" + std::to_string(degree) +
                          " needs 2J+1 < observed count");
  DesignSpec spec;
  spec.fourier_degree = degree;
  spec.period = period;
  const Eigen::MatrixXd x_full = build_design(spec, times);
  Eigen::MatrixXd x(n, x_full.cols());
  Eigen::VectorXd yo(n);
  int k = 0;
  for (Eigen::Index t = 0; t < y.size(); ++t)
    if (mask(t)) {
      x.row(k) = x_full.row(t);
      yo(k) = y(t);
      ++k;
    }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(yo);
  const double rss = (yo - x * beta).squaredNorm();
  const double sigma2 = std::max(rss / n, 1e-300);
  const double loglik = -0.5 * n * (std::log(kTwoPi * sigma2) + 1.0);
  return 2.0 * (2 * degree + 2) - 2.0 * loglik;  // k = coefficients + error variance
}

}  // namespace

int select_fourier_degree(const Eigen::VectorXd& y,
                          const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                          const std::vector<int>& times, int period,
                          const std::vector<int>& candidate_degrees) {
  if (candidate_degrees.empty())
    throw ValidationError("select_fourier_degree: empty candidate set");
  std::vector<int> sorted = candidate_degrees;
  std::sort(sorted.begin(), sorted.end());
  int best_j = sorted.front();
  double best_aic = std::numeric_limits<double>::infinity();
  for (int j : sorted) {
    const double aic = ols_aic(y, mask, times, period, j);
    if (aic < best_aic) {  // strict: ties keep the smaller J
      best_aic = aic;
      best_j = j;
    }
  }
  return best_j;
}

int select_fourier_degree_panel(const PanelDataset& panel,
                                const std::vector<int>& candidate_degrees) {
  if (candidate_degrees.empty())
    throw ValidationError("select_fourier_degree: empty candidate set");
  std::vector<int> sorted = candidate_degrees;
  std::sort(sorted.begin(), sorted.end());
  int best_j = sorted.front();
  double best_total = std::numeric_limits<double>::infinity();
  for (int j : sorted) {
    double total = 0.0;
    for (int i = 0; i < panel.n_regions(); ++i)
      total += ols_aic(panel.values.row(i).transpose(), panel.observed.row(i).transpose(),
                       panel.times, panel.period, j);
    if (total < best_total) {
      best_total = total;
      best_j = j;
    }
  }
  return best_j;
}

}  // namespace areagp
