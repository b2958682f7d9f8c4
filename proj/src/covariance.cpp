#include "areagp/covariance.hpp"

#include <cmath>

namespace areagp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

CholFactor chol_spd(const Eigen::MatrixXd& m, double scale, const std::string& context) {
  CholFactor out;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd work = m;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    out.llt.compute(work);
    if (out.llt.info() == Eigen::Success) {
      out.jitter_used = jitter;
      out.log_det = 2.0 * out.llt.matrixLLT().diagonal().array().log().sum();
      if (std::isfinite(out.log_det)) return out;
    }
    jitter = (jitter == 0.0) ? 1e-10 * scale : jitter * 10.0;
    if (jitter > 1e-6 * scale || !(jitter > 0.0))
      throw NumericalError("Cholesky factorization failed after max jitter (" + context + ")");
  }
}

namespace {

// Integer time grids repeat the same lags, so evaluate the kernel once per
// distinct lag when the span is small enough to table.
template <typename F>
Eigen::MatrixXd fill_by_lag(const std::vector<int>& times, double diag, F eval) {
  const int T = static_cast<int>(times.size());
  Eigen::MatrixXd m(T, T);
  const long span = (T > 0) ? static_cast<long>(times.back()) - times.front() : 0;
  if (span >= 0 && span < 1000000) {
    std::vector<double> table(static_cast<size_t>(span) + 1, 0.0);
    std::vector<bool> have(static_cast<size_t>(span) + 1, false);
    for (int a = 0; a < T; ++a) {
      m(a, a) = diag;
      for (int b = a + 1; b < T; ++b) {
        const size_t h = static_cast<size_t>(std::abs(times[a] - times[b]));
        if (!have[h]) {
          table[h] = eval(static_cast<double>(h));
          have[h] = true;
        }
        m(a, b) = table[h];
        m(b, a) = table[h];
      }
    }
    return m;
  }
  for (int a = 0; a < T; ++a) {
    m(a, a) = diag;
    for (int b = a + 1; b < T; ++b) {
      const double v = eval(std::abs(static_cast<double>(times[a]) - times[b]));
      m(a, b) = v;
      m(b, a) = v;
    }
  }
  return m;
}

}  // namespace

Eigen::MatrixXd build_correlation(const MaternKernel& kernel, const std::vector<int>& times) {
  return fill_by_lag(times, 1.0,
                     [&](double h) { return matern_correlation(h, kernel); });
}

Eigen::MatrixXd build_correlation_dlogphi(const MaternKernel& kernel,
                                          const std::vector<int>& times) {
  return fill_by_lag(times, 0.0,
                     [&](double h) { return matern_dcorr_dlogphi(h, kernel); });
}

Eigen::MatrixXd build_covariance(const MaternKernel& kernel, double sigma2,
                                 const std::vector<int>& times) {
  if (!(sigma2 > 0.0)) throw ValidationError("build_covariance: sigma2 must be > 0");
  Eigen::MatrixXd cov = sigma2 * build_correlation(kernel, times);
  // Factorization must succeed under the jitter policy; the matrix itself is
  // returned un-jittered.
  try {
    chol_spd(cov, sigma2, "build_covariance");
  } catch (const NumericalError&) {
    throw NumericalError("build_covariance: factorization failed for sigma2=" +
                         std::to_string(sigma2) + ", phi=" + std::to_string(kernel.phi));
  }
  return cov;
}

double logdens_gp_cached(const Eigen::VectorXd& z, double sigma2, const CholFactor& corr_chol) {
  const int T = static_cast<int>(z.size());
  const double quad = z.dot(corr_chol.solve(z));
  return -0.5 * T * std::log(kTwoPi * sigma2) - 0.5 * corr_chol.log_det -
         0.5 * quad / sigma2;
}

double logdens_gp(const Eigen::VectorXd& z, double sigma2, const MaternKernel& kernel,
                  const std::vector<int>& times) {
  if (!(sigma2 > 0.0)) throw ValidationError("logdens_gp: sigma2 must be > 0");
  if (z.size() != static_cast<Eigen::Index>(times.size()))
    throw ValidationError("logdens_gp: z length does not match times");
  const CholFactor chol = chol_spd(build_correlation(kernel, times), 1.0, "logdens_gp");
  return logdens_gp_cached(z, sigma2, chol);
}

}  // namespace areagp
