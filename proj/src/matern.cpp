#include "areagp/matern.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>
#include <gsl/gsl_sf_gamma.h>

#include <cmath>

namespace areagp {

bool matern_has_closed_form(double kappa) {
  return kappa == 0.5 || kappa == 1.5 || kappa == 2.5;
}

namespace {

// GSL must not abort the process; errors are surfaced as status codes.
[[maybe_unused]] const bool gsl_quiet = [] {
  gsl_set_error_handler_off();
  return true;
}();

double bessel_matern(double u, double kappa) {
  // 2^{1-kappa}/Gamma(kappa) u^kappa K_kappa(u)
  gsl_sf_result bessel;
  const int status = gsl_sf_bessel_Knu_e(kappa, u, &bessel);
  if (status == GSL_EUNDRFLW) return 0.0;  // correlation has decayed to zero
  if (status != 0)
    throw NumericalError("Bessel K evaluation failed for kappa=" + std::to_string(kappa) +
                         ", u=" + std::to_string(u));
  const double norm = std::pow(2.0, 1.0 - kappa) / gsl_sf_gamma(kappa);
  return norm * std::pow(u, kappa) * bessel.val;
}

}  // namespace

double matern_correlation(double h, const MaternKernel& kernel) {
  kernel.validate();
  if (h < 0.0) throw ValidationError("matern_correlation: h must be >= 0");
  if (h == 0.0) return 1.0;
  const double u = h / kernel.phi;
  if (kernel.kappa == 0.5) return std::exp(-u);
  if (kernel.kappa == 1.5) return (1.0 + u) * std::exp(-u);
  if (kernel.kappa == 2.5) return (1.0 + u + u * u / 3.0) * std::exp(-u);
  return bessel_matern(u, kernel.kappa);
}

double matern_dcorr_dlogphi(double h, const MaternKernel& kernel) {
  kernel.validate();
  if (h < 0.0) throw ValidationError("matern_dcorr_dlogphi: h must be >= 0");
  if (h == 0.0) return 0.0;
  const double u = h / kernel.phi;
  // d rho/d log(phi) = -u * d rho/d u
  if (kernel.kappa == 0.5) return u * std::exp(-u);
  if (kernel.kappa == 1.5) return u * u * std::exp(-u);
  if (kernel.kappa == 2.5) return u * u * (1.0 + u) / 3.0 * std::exp(-u);
  const double step = 1e-5;
  MaternKernel up = kernel, down = kernel;
  up.phi = kernel.phi * std::exp(step);
  down.phi = kernel.phi * std::exp(-step);
  return (matern_correlation(h, up) - matern_correlation(h, down)) / (2.0 * step);
}

}  // namespace areagp
