#include "areagp/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "areagp/covariance.hpp"
#include "areagp/design.hpp"
#include "areagp/rng.hpp"

namespace areagp {

ForecastSet predictive_draws(const ChainStore& chain, int horizon) {
  if (horizon < 1) throw ValidationError("predictive_draws: horizon must be >= 1");
  if (chain.n_draws() == 0) throw ValidationError("predictive_draws: empty chain");

  const int I = chain.n_regions();
  const int T = static_cast<int>(chain.times.size());
  const long n_draws = chain.n_draws();
  const int step = chain.times.size() > 1 ? chain.times[1] - chain.times[0] : 1;

  ForecastSet out;
  out.region_ids = chain.region_ids;
  for (int h = 1; h <= horizon; ++h) out.horizon_times.push_back(chain.times.back() + h * step);

  std::vector<int> all_times = chain.times;
  all_times.insert(all_times.end(), out.horizon_times.begin(), out.horizon_times.end());

  DesignSpec spec;
  spec.fourier_degree = chain.fourier_degree;
  spec.period = chain.period;
  const Eigen::MatrixXd x_new = build_design(spec, out.horizon_times);

  out.linear.assign(I, Eigen::MatrixXd::Zero(n_draws, horizon));
  out.observation.assign(I, Eigen::MatrixXd::Zero(n_draws, horizon));

  for (int i = 0; i < I; ++i) {
    for (long d = 0; d < n_draws; ++d) {
      const double sigma2 = chain.sigma2(d, i);
      const double phi = chain.phi(d, i);
      const double tau2 = chain.nu2(d, i) * sigma2;
      const Eigen::VectorXd beta = chain.beta[d].row(i).transpose();
      const Eigen::VectorXd z_obs = chain.z[d].row(i).transpose();

      MaternKernel kernel{chain.kappa, phi};
      CounterRng rng(chain.config.seed, static_cast<std::uint64_t>(d),
                     static_cast<std::uint64_t>(i), rng_block::forecast);
      try {
        const Eigen::MatrixXd corr_full = build_correlation(kernel, all_times);
        const Eigen::MatrixXd c11 = sigma2 * corr_full.topLeftCorner(T, T);
        const Eigen::MatrixXd c21 = sigma2 * corr_full.bottomLeftCorner(horizon, T);
        const Eigen::MatrixXd c22 = sigma2 * corr_full.bottomRightCorner(horizon, horizon);
        const CholFactor chol11 = chol_spd(c11, sigma2, "forecast conditioning");
        const Eigen::VectorXd cond_mean = c21 * chol11.solve(z_obs);
        Eigen::MatrixXd cond_cov = c22 - c21 * chol11.solve(c21.transpose());
        cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
        const CholFactor cholc = chol_spd(cond_cov, sigma2, "forecast conditional covariance");
        Eigen::VectorXd xi(horizon);
        for (int h = 0; h < horizon; ++h) xi(h) = rng.normal();
        const Eigen::VectorXd z_new =
            cond_mean + cholc.llt.matrixL() * xi;
        for (int h = 0; h < horizon; ++h) {
          const double eta = x_new.row(h).dot(beta) + z_new(h);
          out.linear[i](d, h) = eta;
          out.observation[i](d, h) = eta + std::sqrt(tau2) * rng.normal();
        }
      } catch (const NumericalError&) {
        // Skipped draws are stored as NaN and excluded downstream.
        ++out.skipped_draws;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (int h = 0; h < horizon; ++h) {
          out.linear[i](d, h) = nan;
          out.observation[i](d, h) = nan;
        }
      }
    }
  }
  const long total = static_cast<long>(I) * n_draws;
  if (out.skipped_draws * 100 > total)
    throw NumericalError("predictive_draws: more than 1% of draws skipped (" +
                         std::to_string(out.skipped_draws) + "/" + std::to_string(total) + ")");
  return out;
}

InsampleSet insample_draws(const ChainStore& chain) {
  if (chain.n_draws() == 0) throw ValidationError("insample_draws: empty chain");
  const int I = chain.n_regions();
  const int T = static_cast<int>(chain.times.size());
  const long n_draws = chain.n_draws();

  DesignSpec spec;
  spec.fourier_degree = chain.fourier_degree;
  spec.period = chain.period;
  const Eigen::MatrixXd x = build_design(spec, chain.times);

  InsampleSet out;
  out.region_ids = chain.region_ids;
  out.times = chain.times;
  out.linear.assign(I, Eigen::MatrixXd::Zero(n_draws, T));
  out.observation.assign(I, Eigen::MatrixXd::Zero(n_draws, T));
  for (int i = 0; i < I; ++i) {
    for (long d = 0; d < n_draws; ++d) {
      CounterRng rng(chain.config.seed, static_cast<std::uint64_t>(d),
                     static_cast<std::uint64_t>(i), rng_block::insample);
      const double tau = std::sqrt(chain.nu2(d, i) * chain.sigma2(d, i));
      const Eigen::VectorXd eta =
          x * chain.beta[d].row(i).transpose() + chain.z[d].row(i).transpose();
      for (int t = 0; t < T; ++t) {
        out.linear[i](d, t) = eta(t);
        out.observation[i](d, t) = eta(t) + tau * rng.normal();
      }
    }
  }
  return out;
}

double quantile_type7(std::vector<double> x, double p) {
  if (x.empty()) throw ValidationError("quantile: empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - std::floor(h)) * (x[hi] - x[lo]);
}

SummaryRow summarize(const Eigen::VectorXd& samples) {
  if (samples.size() == 0) throw ValidationError("summarize: empty sample");
  std::vector<double> v(samples.data(), samples.data() + samples.size());
  SummaryRow row;
  row.mean = samples.mean();
  row.q025 = quantile_type7(v, 0.025);
  row.q50 = quantile_type7(v, 0.5);
  row.q975 = quantile_type7(v, 0.975);
  return row;
}

}  // namespace areagp
