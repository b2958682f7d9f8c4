#pragma once

#include "areagp/types.hpp"

namespace areagp {

// Matern correlation rho(h) = 2^{1-kappa}/Gamma(kappa) (h/phi)^kappa K_kappa(h/phi),
// normalized so rho(h) -> 1 as h -> 0+, with rho(0) = 1. Closed forms for
// kappa in {0.5, 1.5, 2.5}; Bessel-K evaluation otherwise.
double matern_correlation(double h, const MaternKernel& kernel);

// d rho(h) / d log(phi). Closed forms for half-integer kappa in {0.5,1.5,2.5},
// central differences with step 1e-5 on the log scale otherwise.
double matern_dcorr_dlogphi(double h, const MaternKernel& kernel);

// True when kappa has a closed-form correlation (and analytic derivative).
bool matern_has_closed_form(double kappa);

}  // namespace areagp
