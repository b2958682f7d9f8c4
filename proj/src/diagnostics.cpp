#include "areagp/diagnostics.hpp"

#include <cmath>
#include <limits>

namespace areagp {

namespace {

// Bartlett-windowed spectral variance of a segment, bandwidth floor(sqrt(n)).
double spectral_variance(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const double mean = x.mean();
  const Eigen::VectorXd c = x.array() - mean;
  const int bw = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  double s = c.squaredNorm() / n;  // gamma_0
  for (int k = 1; k <= bw && k < n; ++k) {
    double g = 0.0;
    for (Eigen::Index t = 0; t + k < n; ++t) g += c(t) * c(t + k);
    g /= n;
    s += 2.0 * (1.0 - static_cast<double>(k) / (bw + 1.0)) * g;
  }
  return s;
}

}  // namespace

std::optional<double> geweke_z(const Eigen::VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 100) throw ValidationError("geweke_z: chain length must be >= 100");
  const Eigen::Index na = n / 10;
  const Eigen::Index nb = n / 2;
  const Eigen::VectorXd a = chain.head(na);
  const Eigen::VectorXd b = chain.tail(nb);
  const double sa = spectral_variance(a);
  const double sb = spectral_variance(b);
  const double denom = sa / na + sb / nb;
  if (!(denom > 0.0) || !std::isfinite(denom)) return std::nullopt;
  return (a.mean() - b.mean()) / std::sqrt(denom);
}

Eigen::VectorXd autocorrelations(const Eigen::VectorXd& chain, int max_lag) {
  const Eigen::Index n = chain.size();
  if (n < 2) throw ValidationError("autocorrelations: chain too short");
  max_lag = std::min<Eigen::Index>(max_lag, n - 1);
  const double mean = chain.mean();
  const Eigen::VectorXd c = chain.array() - mean;
  const double g0 = c.squaredNorm() / n;
  Eigen::VectorXd rho(max_lag + 1);
  rho(0) = 1.0;
  if (!(g0 > 0.0)) {
    rho.tail(max_lag).setZero();
    return rho;
  }
  for (int k = 1; k <= max_lag; ++k) {
    double g = 0.0;
    for (Eigen::Index t = 0; t + k < n; ++t) g += c(t) * c(t + k);
    rho(k) = (g / n) / g0;
  }
  return rho;
}

EssResult ess(const Eigen::VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 10) throw ValidationError("ess: chain length must be >= 10");
  EssResult out;
  const double mean = chain.mean();
  const double var = (chain.array() - mean).square().sum() / n;
  if (!(var > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const int max_lag = static_cast<int>(std::min<Eigen::Index>(n - 2, 1000));
  const Eigen::VectorXd rho = autocorrelations(chain, max_lag);
  // Initial positive sequence over pair sums rho_{2t} + rho_{2t+1}.
  double factor = -1.0;
  for (int t = 0; 2 * t + 1 <= max_lag; ++t) {
    const double pair = rho(2 * t) + rho(2 * t + 1);
    if (pair <= 0.0) break;
    factor += 2.0 * pair;
  }
  out.raw = static_cast<double>(n) / std::max(factor, 1e-12);
  out.capped = out.raw > static_cast<double>(n);
  out.ess = std::min(out.raw, static_cast<double>(n));
  return out;
}

std::vector<AcceptanceRow> acceptance_report(const ChainStore& chain) {
  std::vector<AcceptanceRow> rows;
  auto push = [&rows](const std::string& name, const BlockCounter& counter, double lo,
                      double hi) {
    AcceptanceRow row;
    row.block = name;
    row.band_lo = lo;
    row.band_hi = hi;
    if (counter.proposals > 0) {
      row.has_rate = true;
      row.rate = counter.rate();
      if (row.rate < lo) row.flag = "low";
      if (row.rate > hi) row.flag = "high";
    }
    rows.push_back(row);
  };
  push("mala_sigma", chain.sigma_kept, 0.45, 0.70);
  for (int i = 0; i < chain.n_regions(); ++i)
    push("mala_phi/" + chain.region_ids[i], chain.phi_kept[i], 0.45, 0.70);
  for (int i = 0; i < chain.n_regions(); ++i)
    push("mh_nu/" + chain.region_ids[i], chain.nu_kept[i], 0.10, 0.40);
  push("rw_rho_car", chain.rho_kept, 0.10, 0.60);
  return rows;
}

namespace {

void add_parameter(DiagnosticsReport* report, const std::string& name,
                   const Eigen::VectorXd& draws, int max_lag, int running_points) {
  ParameterDiagnostic d;
  d.name = name;
  const Eigen::Index n = draws.size();
  if (n >= 100) {
    d.geweke = geweke_z(draws);
  }
  if (n >= 10) {
    const EssResult e = ess(draws);
    d.ess = e.degenerate ? 0.0 : e.ess;
    d.ess_capped = e.capped;
    if (e.degenerate) d.flagged = true;
  }
  d.acf = autocorrelations(draws, max_lag);
  if (!d.geweke.has_value() && n >= 100) d.flagged = true;  // degenerate variance
  if (d.geweke.has_value() && std::abs(*d.geweke) > 1.96) d.flagged = true;

  std::vector<double> running;
  for (int k = 0; k < running_points; ++k) {
    const Eigen::Index start = (n / 2) * k / running_points;
    const Eigen::Index len = n - start;
    if (len >= 100) {
      const auto z = geweke_z(draws.segment(start, len));
      running.push_back(z.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
  }
  report->geweke_running.push_back(std::move(running));
  report->parameters.push_back(std::move(d));
}

}  // namespace

DiagnosticsReport diagnose_chain(const ChainStore& chain, int max_lag, int running_points) {
  if (chain.n_draws() < 2) throw ValidationError("diagnose_chain: too few draws");
  DiagnosticsReport report;
  const int I = chain.n_regions();
  for (int i = 0; i < I; ++i) {
    const std::string id = chain.region_ids[i];
    add_parameter(&report, "log_sigma2[" + id + "]", chain.sigma2.col(i).array().log(),
                  max_lag, running_points);
    add_parameter(&report, "log_phi[" + id + "]", chain.phi.col(i).array().log(), max_lag,
                  running_points);
    add_parameter(&report, "log_nu2[" + id + "]", chain.nu2.col(i).array().log(), max_lag,
                  running_points);
    for (int c = 0; c < chain.n_coef(); ++c) {
      Eigen::VectorXd draws(chain.n_draws());
      for (long d = 0; d < chain.n_draws(); ++d) draws(d) = chain.beta[d](i, c);
      add_parameter(&report, "beta" + std::to_string(c) + "[" + id + "]", draws, max_lag,
                    running_points);
    }
  }
  add_parameter(&report, "car_m", chain.car_m, max_lag, running_points);
  add_parameter(&report, "log_car_omega2", chain.car_omega2.array().log(), max_lag,
                running_points);
  if (chain.config.rho_car_sampled)
    add_parameter(&report, "car_rho", chain.car_rho, max_lag, running_points);
  report.acceptance = acceptance_report(chain);
  return report;
}

}  // namespace areagp
