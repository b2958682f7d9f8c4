#include "areagp/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "areagp/car.hpp"
#include "areagp/design.hpp"
#include "areagp/likelihood.hpp"
#include "areagp/rng.hpp"

namespace areagp {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double normal_logdens(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(kTwoPi * var) - 0.5 * d * d / var;
}
}  // namespace

void MCMCConfig::validate() const {
  if (n_iter <= 0) throw ValidationError("MCMCConfig: n_iter must be positive");
  if (burn_in < 0 || burn_in >= n_iter)
    throw ValidationError("MCMCConfig: burn_in must satisfy 0 <= burn_in < n_iter");
  if (thin < 1) throw ValidationError("MCMCConfig: thin must be >= 1");
  if ((n_iter - burn_in) % thin != 0)
    throw ValidationError("MCMCConfig: (n_iter - burn_in) must be divisible by thin");
  if (!(mala_sigma_eps > 0.0) || !(mala_phi_eps > 0.0))
    throw ValidationError("MCMCConfig: step sizes must be positive");
  if (!(adapt_target > 0.0 && adapt_target < 1.0))
    throw ValidationError("MCMCConfig: adapt_target must be in (0,1)");
  if (workers < 0) throw ValidationError("MCMCConfig: workers must be >= 0");
}

struct Sampler::Impl {
  // Immutable problem data.
  std::vector<std::string> region_ids;
  std::vector<int> times;
  std::vector<Eigen::VectorXd> y;                          // per region
  std::vector<Eigen::Matrix<bool, Eigen::Dynamic, 1>> mask;
  std::vector<int> n_obs;
  Eigen::MatrixXd design;  // shared T x (p+1)
  AdjacencyGraph graph;
  PriorSpec priors;
  DesignSpec design_spec;
  double kappa = 1.5;
  MCMCConfig config;
  int I = 0;
  int T = 0;

  ModelState state;

  // Per-region correlation caches, refreshed on phi or Z changes.
  struct RegionCache {
    CholFactor corr_chol;
    Eigen::MatrixXd corr_inv;
    Eigen::VectorXd rinv_z;
    double quad = 0.0;
  };
  std::vector<RegionCache> cache;
  Eigen::MatrixXd car_q;
  double car_q_logdet = 0.0;

  double eps_sigma = 0.1;
  std::vector<double> eps_phi;

  BlockCounter sigma_burnin, sigma_kept;
  std::vector<BlockCounter> phi_burnin, phi_kept;
  std::vector<BlockCounter> nu_burnin, nu_kept;
  BlockCounter rho_burnin, rho_kept;

  // ---- cache maintenance -------------------------------------------------

  void refresh_region_phi(int i) {
    MaternKernel kernel{kappa, state.regions[i].phi};
    const Eigen::MatrixXd corr = build_correlation(kernel, times);
    cache[i].corr_chol = chol_spd(corr, 1.0, "region " + region_ids[i] + " correlation");
    cache[i].corr_inv =
        cache[i].corr_chol.solve(Eigen::MatrixXd::Identity(T, T));
    refresh_region_z(i);
  }

  void refresh_region_z(int i) {
    const Eigen::VectorXd zi = state.z.row(i).transpose();
    cache[i].rinv_z = cache[i].corr_inv * zi;
    cache[i].quad = zi.dot(cache[i].rinv_z);
  }

  void refresh_car() {
    car_q = car_precision(graph, state.car_rho);
    car_q_logdet = chol_spd(car_q, 1.0, "car precision").log_det;
  }

  void refresh_all() {
    for (int i = 0; i < I; ++i) refresh_region_phi(i);
    refresh_car();
  }

  // ---- residuals ---------------------------------------------------------

  void residual_stats(int i, double* ssr, int* n) const {
    const Eigen::VectorXd mean = design * state.regions[i].beta;
    double acc = 0.0;
    int count = 0;
    for (int t = 0; t < T; ++t) {
      if (!mask[i](t)) continue;
      const double r = y[i](t) - mean(t) - state.z(i, t);
      acc += r * r;
      ++count;
    }
    *ssr = acc;
    *n = count;
  }

  // ---- sigma block -------------------------------------------------------

  // Target and gradient share the per-region (quad, logdet, ssr) inputs; the
  // correlation caches do not depend on sigma2.
  double sigma_target(const Eigen::VectorXd& s, const std::vector<double>& ssr,
                      const std::vector<int>& nobs) const {
    double total = 0.0;
    for (int i = 0; i < I; ++i) {
      const double sigma2 = std::exp(s(i));
      if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return -std::numeric_limits<double>::infinity();
      total += -0.5 * T * std::log(kTwoPi * sigma2) - 0.5 * cache[i].corr_chol.log_det -
               0.5 * cache[i].quad / sigma2;
      total += loglik_noise(ssr[i], nobs[i], state.regions[i].nu2 * sigma2);
      total += normal_logdens(std::log(state.regions[i].phi),
                              priors.phi_cond.a + priors.phi_cond.b * s(i),
                              priors.phi_cond.chi2);
    }
    const Eigen::VectorXd centered = s.array() - state.car_m;
    total += -0.5 * I * std::log(kTwoPi * state.car_omega2) + 0.5 * car_q_logdet -
             0.5 * centered.dot(car_q * centered) / state.car_omega2;
    return total;
  }

  Eigen::VectorXd sigma_grad(const Eigen::VectorXd& s, const std::vector<double>& ssr,
                             const std::vector<int>& nobs) const {
    Eigen::VectorXd g(I);
    for (int i = 0; i < I; ++i) {
      const double sigma2 = std::exp(s(i));
      const double tau2 = state.regions[i].nu2 * sigma2;
      g(i) = -0.5 * T + 0.5 * cache[i].quad / sigma2;
      g(i) += -0.5 * nobs[i] + 0.5 * ssr[i] / tau2;
      g(i) += priors.phi_cond.b *
              (std::log(state.regions[i].phi) - priors.phi_cond.a - priors.phi_cond.b * s(i)) /
              priors.phi_cond.chi2;
    }
    const Eigen::VectorXd centered = s.array() - state.car_m;
    g -= (car_q * centered) / state.car_omega2;
    return g;
  }

  // ---- phi block ---------------------------------------------------------

  struct PhiEval {
    double value = 0.0;
    double grad = 0.0;
    CholFactor corr_chol;
    Eigen::MatrixXd corr_inv;
    Eigen::VectorXd rinv_z;
    double quad = 0.0;
  };

  // Evaluates the phi target at an arbitrary log-range, returning the pieces
  // needed to promote the point into the cache on acceptance.
  PhiEval phi_eval(int i, double log_phi) const {
    PhiEval out;
    MaternKernel kernel{kappa, std::exp(log_phi)};
    const Eigen::VectorXd zi = state.z.row(i).transpose();
    const Eigen::MatrixXd corr = build_correlation(kernel, times);
    out.corr_chol = chol_spd(corr, 1.0, "phi proposal region " + region_ids[i]);
    out.corr_inv = out.corr_chol.solve(Eigen::MatrixXd::Identity(T, T));
    out.rinv_z = out.corr_inv * zi;
    out.quad = zi.dot(out.rinv_z);

    const double sigma2 = state.regions[i].sigma2;
    out.value = -0.5 * T * std::log(kTwoPi * sigma2) - 0.5 * out.corr_chol.log_det -
                0.5 * out.quad / sigma2 +
                normal_logdens(log_phi, phi_prior_mean(i), priors.phi_cond.chi2);

    const Eigen::MatrixXd dcorr = build_correlation_dlogphi(kernel, times);
    const double trace = (out.corr_inv.array() * dcorr.array()).sum();
    out.grad = -0.5 * trace + 0.5 * out.rinv_z.dot(dcorr * out.rinv_z) / sigma2 -
               (log_phi - phi_prior_mean(i)) / priors.phi_cond.chi2;
    return out;
  }

  double phi_prior_mean(int i) const {
    return priors.phi_cond.a + priors.phi_cond.b * std::log(state.regions[i].sigma2);
  }

  // ---- conditionals ------------------------------------------------------

  void beta_moments(int i, Eigen::VectorXd* mean, Eigen::MatrixXd* precision) const {
    const double tau2 = state.regions[i].tau2();
    const int p1 = static_cast<int>(design.cols());
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p1, p1);
    Eigen::VectorXd xtr = Eigen::VectorXd::Zero(p1);
    for (int t = 0; t < T; ++t) {
      if (!mask[i](t)) continue;
      const Eigen::VectorXd row = design.row(t).transpose();
      xtx.noalias() += row * row.transpose();
      xtr.noalias() += row * (y[i](t) - state.z(i, t));
    }
    Eigen::MatrixXd prec = xtx / tau2;
    prec.diagonal().array() += 1.0 / priors.beta_prior_variance;
    *precision = prec;
    *mean = prec.llt().solve(xtr / tau2);
  }

  void z_moments(int i, Eigen::VectorXd* mean, Eigen::MatrixXd* precision) const {
    const double tau2 = state.regions[i].tau2();
    const double sigma2 = state.regions[i].sigma2;
    Eigen::MatrixXd prec = cache[i].corr_inv / sigma2;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(T);
    const Eigen::VectorXd fitted = design * state.regions[i].beta;
    for (int t = 0; t < T; ++t) {
      if (!mask[i](t)) continue;
      prec(t, t) += 1.0 / tau2;
      b(t) = (y[i](t) - fitted(t)) / tau2;
    }
    *precision = prec;
    const CholFactor chol =
        chol_spd(prec, 1.0 / sigma2 + 1.0 / tau2, "z conditional region " + region_ids[i]);
    *mean = chol.solve(b);
  }
};

// --------------------------------------------------------------------------

Sampler::Sampler(const PanelDataset& panel, const AdjacencyGraph& graph,
                 const PriorSpec& priors, const DesignSpec& design_spec, double kappa,
                 const MCMCConfig& config)
    : impl_(std::make_unique<Impl>()) {
  panel.validate();
  graph.validate();
  priors.validate();
  design_spec.validate(panel.n_times());
  config.validate();
  if (graph.n_nodes != panel.n_regions())
    throw ValidationError("Sampler: adjacency size does not match panel regions");
  if (!(kappa > 0.0)) throw ValidationError("Sampler: kappa must be > 0");

  auto& im = *impl_;
  im.region_ids = panel.region_ids;
  im.times = panel.times;
  im.graph = graph;
  im.priors = priors;
  im.design_spec = design_spec;
  im.kappa = kappa;
  im.config = config;
  im.I = panel.n_regions();
  im.T = panel.n_times();
  im.design = build_design(design_spec, panel.times);

  for (int i = 0; i < im.I; ++i) {
    im.y.push_back(panel.values.row(i).transpose());
    im.mask.push_back(panel.observed.row(i).transpose());
    im.n_obs.push_back(static_cast<int>(im.mask.back().cast<int>().sum()));
    // Full column rank on observed rows is required for the beta Gibbs draw.
    Eigen::MatrixXd xo(im.n_obs.back(), im.design.cols());
    int k = 0;
    for (int t = 0; t < im.T; ++t)
      if (im.mask.back()(t)) xo.row(k++) = im.design.row(t);
    if (k > 0 && Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(xo).rank() < im.design.cols())
      throw NumericalError("design matrix rank-deficient on observed rows for region " +
                           panel.region_ids[i]);
  }

  // Neutral default state; callers normally overwrite via init_from_fits.
  im.state.regions.resize(im.I);
  im.state.z = Eigen::MatrixXd::Zero(im.I, im.T);
  for (int i = 0; i < im.I; ++i) {
    auto& r = im.state.regions[i];
    r.beta = Eigen::VectorXd::Zero(im.design.cols());
    double mean = 0.0;
    int n = std::max(im.n_obs[i], 1);
    for (int t = 0; t < im.T; ++t)
      if (im.mask[i](t)) mean += im.y[i](t);
    mean /= n;
    r.beta(0) = mean;
    double var = 0.0;
    for (int t = 0; t < im.T; ++t)
      if (im.mask[i](t)) var += (im.y[i](t) - mean) * (im.y[i](t) - mean);
    var = (im.n_obs[i] > 1) ? var / (im.n_obs[i] - 1) : 1.0;
    r.sigma2 = std::max(0.5 * var, 1e-4);
    r.phi = std::max(im.T / 5.0, 1.0);
    r.nu2 = 1.0;
  }
  im.state.car_m = 0.0;
  im.state.car_omega2 = 1.0;
  im.state.car_rho = priors.car.rho_value;

  im.cache.resize(im.I);
  im.eps_sigma = config.mala_sigma_eps;
  im.eps_phi.assign(im.I, config.mala_phi_eps);
  im.phi_burnin.resize(im.I);
  im.phi_kept.resize(im.I);
  im.nu_burnin.resize(im.I);
  im.nu_kept.resize(im.I);
  im.refresh_all();
}

Sampler::~Sampler() = default;

void Sampler::init_from_fits(const std::vector<MLFit>& fits) {
  auto& im = *impl_;
  if (static_cast<int>(fits.size()) != im.I)
    throw ValidationError("init_from_fits: fit count does not match regions");
  auto clamp_pos = [](double v) { return std::clamp(v, 1e-6, 1e6); };
  Eigen::VectorXd log_sigma(im.I);
  for (int i = 0; i < im.I; ++i) {
    auto& r = im.state.regions[i];
    r.beta = fits[i].beta_hat;
    r.sigma2 = clamp_pos(fits[i].sigma2_hat);
    r.phi = clamp_pos(fits[i].phi_hat);
    r.nu2 = clamp_pos(fits[i].nu2_hat);
    log_sigma(i) = std::log(r.sigma2);
  }
  im.state.car_m = log_sigma.mean();
  im.state.car_omega2 =
      std::max((log_sigma.array() - log_sigma.mean()).square().sum() /
                   std::max(im.I - 1, 1),
               1e-4);
  im.state.car_rho = im.priors.car.rho_value;

  // Z starts at the smoothed GP mean given the ML parameters.
  for (int i = 0; i < im.I; ++i) {
    const auto& r = im.state.regions[i];
    MaternKernel kernel{im.kappa, r.phi};
    const Eigen::MatrixXd corr = build_correlation(kernel, im.times);
    std::vector<int> obs;
    for (int t = 0; t < im.T; ++t)
      if (im.mask[i](t)) obs.push_back(t);
    const int n = static_cast<int>(obs.size());
    if (n == 0) {
      im.state.z.row(i).setZero();
      continue;
    }
    Eigen::MatrixXd coo(n, n);
    Eigen::MatrixXd cao(im.T, n);
    Eigen::VectorXd resid(n);
    const Eigen::VectorXd fitted = im.design * r.beta;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) coo(a, b) = r.sigma2 * corr(obs[a], obs[b]);
      coo(a, a) += r.tau2();
      for (int t = 0; t < im.T; ++t) cao(t, a) = r.sigma2 * corr(t, obs[a]);
      resid(a) = im.y[i](obs[a]) - fitted(obs[a]);
    }
    const CholFactor chol = chol_spd(coo, r.sigma2 + r.tau2(), "init smoothing");
    im.state.z.row(i) = (cao * chol.solve(resid)).transpose();
  }
  im.refresh_all();
}

void Sampler::set_state(const ModelState& state) {
  auto& im = *impl_;
  if (state.n_regions() != im.I || state.z.cols() != im.T)
    throw ValidationError("set_state: state shape mismatch");
  state.validate();
  im.state = state;
  im.refresh_all();
}

const ModelState& Sampler::state() const { return impl_->state; }

double Sampler::sigma_log_target(const Eigen::VectorXd& s) const {
  auto& im = *impl_;
  std::vector<double> ssr(im.I);
  std::vector<int> nobs(im.I);
  for (int i = 0; i < im.I; ++i) im.residual_stats(i, &ssr[i], &nobs[i]);
  return im.sigma_target(s, ssr, nobs);
}

Eigen::VectorXd Sampler::sigma_log_target_grad(const Eigen::VectorXd& s) const {
  auto& im = *impl_;
  std::vector<double> ssr(im.I);
  std::vector<int> nobs(im.I);
  for (int i = 0; i < im.I; ++i) im.residual_stats(i, &ssr[i], &nobs[i]);
  return im.sigma_grad(s, ssr, nobs);
}

double Sampler::phi_log_target(int region, double log_phi) const {
  return impl_->phi_eval(region, log_phi).value;
}

double Sampler::phi_log_target_grad(int region, double log_phi) const {
  return impl_->phi_eval(region, log_phi).grad;
}

void Sampler::beta_conditional_moments(int region, Eigen::VectorXd* mean,
                                       Eigen::MatrixXd* covariance) const {
  Eigen::MatrixXd prec;
  impl_->beta_moments(region, mean, &prec);
  if (covariance) *covariance = prec.llt().solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
}

void Sampler::z_conditional_moments(int region, Eigen::VectorXd* mean,
                                    Eigen::MatrixXd* covariance) const {
  Eigen::MatrixXd prec;
  impl_->z_moments(region, mean, &prec);
  if (covariance)
    *covariance = chol_spd(prec, 1.0, "z covariance")
                      .solve(Eigen::MatrixXd::Identity(prec.rows(), prec.cols()));
}

void Sampler::car_m_moments(double* mean, double* variance) const {
  auto& im = *impl_;
  Eigen::VectorXd s(im.I);
  for (int i = 0; i < im.I; ++i) s(i) = std::log(im.state.regions[i].sigma2);
  const Eigen::VectorXd q1 = im.car_q * Eigen::VectorXd::Ones(im.I);
  const double prec = q1.sum() / im.state.car_omega2 + 1.0 / im.priors.car.m_var;
  const double lin = s.dot(q1) / im.state.car_omega2 + im.priors.car.m_mean / im.priors.car.m_var;
  *mean = lin / prec;
  *variance = 1.0 / prec;
}

void Sampler::car_omega2_conditional(double* shape, double* rate) const {
  auto& im = *impl_;
  Eigen::VectorXd s(im.I);
  for (int i = 0; i < im.I; ++i) s(i) = std::log(im.state.regions[i].sigma2);
  const Eigen::VectorXd centered = s.array() - im.state.car_m;
  *shape = im.priors.car.omega2_shape + 0.5 * im.I;
  *rate = im.priors.car.omega2_rate + 0.5 * centered.dot(im.car_q * centered);
}

StepResult Sampler::step_sigma(long iteration) {
  auto& im = *impl_;
  CounterRng rng(im.config.seed, static_cast<std::uint64_t>(iteration), 0, rng_block::sigma);
  StepResult result;

  std::vector<double> ssr(im.I);
  std::vector<int> nobs(im.I);
  for (int i = 0; i < im.I; ++i) im.residual_stats(i, &ssr[i], &nobs[i]);

  Eigen::VectorXd s(im.I);
  for (int i = 0; i < im.I; ++i) s(i) = std::log(im.state.regions[i].sigma2);
  const double eps = im.eps_sigma;
  const double u0 = im.sigma_target(s, ssr, nobs);
  const Eigen::VectorXd g0 = im.sigma_grad(s, ssr, nobs);

  Eigen::VectorXd noise(im.I);
  for (int i = 0; i < im.I; ++i) noise(i) = rng.normal();
  const double accept_u = rng.uniform();

  const Eigen::VectorXd fwd_mean = s + 0.5 * eps * eps * g0;
  const Eigen::VectorXd prop = fwd_mean + eps * noise;

  const double u1 = im.sigma_target(prop, ssr, nobs);
  if (std::isnan(u1)) {
    result.auto_rejected = true;
    return result;
  }
  double log_ratio = -std::numeric_limits<double>::infinity();
  if (std::isfinite(u1)) {
    const Eigen::VectorXd g1 = im.sigma_grad(prop, ssr, nobs);
    const Eigen::VectorXd back_mean = prop + 0.5 * eps * eps * g1;
    const double lq_fwd = -(prop - fwd_mean).squaredNorm() / (2.0 * eps * eps);
    const double lq_back = -(s - back_mean).squaredNorm() / (2.0 * eps * eps);
    log_ratio = u1 - u0 + lq_back - lq_fwd;
  }
  result.alpha = std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
  if (std::log(accept_u) < log_ratio) {
    result.accepted = true;
    for (int i = 0; i < im.I; ++i) im.state.regions[i].sigma2 = std::exp(prop(i));
  }
  return result;
}

StepResult Sampler::step_phi(long iteration, int region) {
  auto& im = *impl_;
  CounterRng rng(im.config.seed, static_cast<std::uint64_t>(iteration),
                 static_cast<std::uint64_t>(region), rng_block::phi);
  StepResult result;
  const double eps = im.eps_phi[region];
  const auto& rc = im.cache[region];
  const auto& rp = im.state.regions[region];

  // Current point from the cache (identical to phi_eval at the same point).
  const double u0 = std::log(rp.phi);
  const double sigma2 = rp.sigma2;
  const double v0 = -0.5 * im.T * std::log(kTwoPi * sigma2) - 0.5 * rc.corr_chol.log_det -
                    0.5 * rc.quad / sigma2 +
                    normal_logdens(u0, im.phi_prior_mean(region), im.priors.phi_cond.chi2);
  MaternKernel kernel{im.kappa, rp.phi};
  const Eigen::MatrixXd dcorr = build_correlation_dlogphi(kernel, im.times);
  const double trace = (rc.corr_inv.array() * dcorr.array()).sum();
  const double g0 = -0.5 * trace + 0.5 * rc.rinv_z.dot(dcorr * rc.rinv_z) / sigma2 -
                    (u0 - im.phi_prior_mean(region)) / im.priors.phi_cond.chi2;

  const double noise = rng.normal();
  const double accept_u = rng.uniform();
  const double fwd_mean = u0 + 0.5 * eps * eps * g0;
  const double prop = fwd_mean + eps * noise;

  Impl::PhiEval eval;
  try {
    eval = im.phi_eval(region, prop);
  } catch (const NumericalError&) {
    result.auto_rejected = true;
    return result;
  }
  if (std::isnan(eval.value)) {
    result.auto_rejected = true;
    return result;
  }
  const double back_mean = prop + 0.5 * eps * eps * eval.grad;
  const double lq_fwd = -(prop - fwd_mean) * (prop - fwd_mean) / (2.0 * eps * eps);
  const double lq_back = -(u0 - back_mean) * (u0 - back_mean) / (2.0 * eps * eps);
  const double log_ratio = eval.value - v0 + lq_back - lq_fwd;

  result.alpha = std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
  if (std::log(accept_u) < log_ratio) {
    result.accepted = true;
    im.state.regions[region].phi = std::exp(prop);
    im.cache[region].corr_chol = std::move(eval.corr_chol);
    im.cache[region].corr_inv = std::move(eval.corr_inv);
    im.cache[region].rinv_z = std::move(eval.rinv_z);
    im.cache[region].quad = eval.quad;
  }
  return result;
}

StepResult Sampler::step_nu(long iteration, int region) {
  auto& im = *impl_;
  CounterRng rng(im.config.seed, static_cast<std::uint64_t>(iteration),
                 static_cast<std::uint64_t>(region), rng_block::nu);
  StepResult result;
  auto& rp = im.state.regions[region];

  const double prop_log = im.priors.nu_prior.mu_nu +
                          std::sqrt(im.priors.nu_prior.sigma2_nu) * rng.normal();
  const double accept_u = rng.uniform();
  double ssr;
  int n;
  im.residual_stats(region, &ssr, &n);
  // Prior proposal: the Hastings ratio reduces to the noise likelihood ratio.
  const double log_ratio = loglik_noise(ssr, n, std::exp(prop_log) * rp.sigma2) -
                           loglik_noise(ssr, n, rp.nu2 * rp.sigma2);
  result.alpha = std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
  if (std::log(accept_u) < log_ratio) {
    result.accepted = true;
    rp.nu2 = std::exp(prop_log);
  }
  return result;
}

void Sampler::step_beta(long iteration, int region) {
  auto& im = *impl_;
  CounterRng rng(im.config.seed, static_cast<std::uint64_t>(iteration),
                 static_cast<std::uint64_t>(region), rng_block::beta);
  Eigen::VectorXd mean;
  Eigen::MatrixXd prec;
  im.beta_moments(region, &mean, &prec);
  const Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw NumericalError("step_beta: precision factorization failed for region " +
                         im.region_ids[region]);
  Eigen::VectorXd xi(mean.size());
  for (Eigen::Index k = 0; k < xi.size(); ++k) xi(k) = rng.normal();
  im.state.regions[region].beta = mean + llt.matrixU().solve(xi);
}

void Sampler::step_z(long iteration, int region) {
  auto& im = *impl_;
  CounterRng rng(im.config.seed, static_cast<std::uint64_t>(iteration),
                 static_cast<std::uint64_t>(region), rng_block::z);
  const auto& rp = im.state.regions[region];
  Eigen::MatrixXd prec = im.cache[region].corr_inv / rp.sigma2;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(im.T);
  const double tau2 = rp.tau2();
  const Eigen::VectorXd fitted = im.design * rp.beta;
  for (int t = 0; t < im.T; ++t) {
    if (!im.mask[region](t)) continue;
    prec(t, t) += 1.0 / tau2;
    b(t) = (im.y[region](t) - fitted(t)) / tau2;
  }
  const CholFactor chol =
      chol_spd(prec, 1.0 / rp.sigma2 + 1.0 / tau2, "step_z region " + im.region_ids[region]);
  Eigen::VectorXd xi(im.T);
  for (int t = 0; t < im.T; ++t) xi(t) = rng.normal();
  const Eigen::VectorXd mean = chol.solve(b);
  im.state.z.row(region) = (mean + chol.llt.matrixU().solve(xi)).transpose();
  im.refresh_region_z(region);
}

StepResult Sampler::step_car_hyper(long iteration) {
  auto& im = *impl_;
  CounterRng rng(im.config.seed, static_cast<std::uint64_t>(iteration), 0, rng_block::car);
  StepResult result;

  Eigen::VectorXd s(im.I);
  for (int i = 0; i < im.I; ++i) s(i) = std::log(im.state.regions[i].sigma2);

  // m | s, omega2: conjugate Gaussian.
  const Eigen::VectorXd q1 = im.car_q * Eigen::VectorXd::Ones(im.I);
  const double prec = q1.sum() / im.state.car_omega2 + 1.0 / im.priors.car.m_var;
  const double lin = s.dot(q1) / im.state.car_omega2 + im.priors.car.m_mean / im.priors.car.m_var;
  im.state.car_m = lin / prec + rng.normal() / std::sqrt(prec);

  // omega2 | s, m: conjugate inverse-gamma.
  const Eigen::VectorXd centered = s.array() - im.state.car_m;
  const double shape = im.priors.car.omega2_shape + 0.5 * im.I;
  const double rate = im.priors.car.omega2_rate + 0.5 * centered.dot(im.car_q * centered);
  im.state.car_omega2 = rate / rng.gamma(shape);

  // rho | s, m, omega2: logit random walk under a flat prior on [0,1).
  if (im.config.rho_car_sampled) {
    const double rho0 = im.state.car_rho;
    const double logit0 = std::log(rho0 / (1.0 - rho0));
    const double logit1 = logit0 + im.config.rho_rw_step * rng.normal();
    const double accept_u = rng.uniform();
    const double rho1 = 1.0 / (1.0 + std::exp(-logit1));
    const Eigen::MatrixXd q1m = car_precision(im.graph, rho1);
    const double logdet1 = chol_spd(q1m, 1.0, "rho proposal").log_det;
    auto log_target = [&](double rho, const Eigen::MatrixXd& q, double logdet) {
      return 0.5 * logdet - 0.5 * centered.dot(q * centered) / im.state.car_omega2 +
             std::log(rho) + std::log1p(-rho);  // logit-scale Jacobian
    };
    const double log_ratio = log_target(rho1, q1m, logdet1) -
                             log_target(rho0, im.car_q, im.car_q_logdet);
    result.alpha = std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
    if (std::log(accept_u) < log_ratio) {
      result.accepted = true;
      im.state.car_rho = rho1;
      im.car_q = q1m;
      im.car_q_logdet = logdet1;
    }
  }
  return result;
}

double Sampler::sigma_eps() const { return impl_->eps_sigma; }
double Sampler::phi_eps(int region) const { return impl_->eps_phi[region]; }
void Sampler::set_sigma_eps(double eps) { impl_->eps_sigma = eps; }
void Sampler::set_phi_eps(int region, double eps) { impl_->eps_phi[region] = eps; }

namespace {

void robbins_monro(double* log_eps, long iteration, double alpha, double target) {
  const double gain = std::pow(static_cast<double>(iteration), -0.6);
  *log_eps += gain * (alpha - target);
  *log_eps = std::clamp(*log_eps, std::log(1e-8), std::log(10.0));
}

void check_block(const BlockCounter& burnin, const BlockCounter& kept, const std::string& name) {
  const long proposals = burnin.proposals + kept.proposals;
  const long rejects = burnin.auto_rejects + kept.auto_rejects;
  if (proposals >= 1000 && rejects > proposals / 100)
    throw NumericalError("sampler block '" + name + "' exceeded 1% auto-rejections (" +
                         std::to_string(rejects) + "/" + std::to_string(proposals) + ")");
}

}  // namespace

ChainStore Sampler::run() {
  auto& im = *impl_;
  const auto t_start = std::chrono::steady_clock::now();
  const long n_keep = im.config.kept_draws();

  ChainStore out;
  out.region_ids = im.region_ids;
  out.times = im.times;
  out.fourier_degree = im.design_spec.fourier_degree;
  out.period = im.design_spec.period;
  out.kappa = im.kappa;
  out.config = im.config;
  out.sigma2.resize(n_keep, im.I);
  out.phi.resize(n_keep, im.I);
  out.nu2.resize(n_keep, im.I);
  out.beta.reserve(n_keep);
  out.z.reserve(n_keep);
  out.car_m.resize(n_keep);
  out.car_omega2.resize(n_keep);
  out.car_rho.resize(n_keep);
  out.phi_burnin.assign(im.I, {});
  out.phi_kept.assign(im.I, {});
  out.nu_burnin.assign(im.I, {});
  out.nu_kept.assign(im.I, {});

  im.sigma_burnin = im.sigma_kept = BlockCounter{};
  im.rho_burnin = im.rho_kept = BlockCounter{};
  std::fill(im.phi_burnin.begin(), im.phi_burnin.end(), BlockCounter{});
  std::fill(im.phi_kept.begin(), im.phi_kept.end(), BlockCounter{});
  std::fill(im.nu_burnin.begin(), im.nu_burnin.end(), BlockCounter{});
  std::fill(im.nu_kept.begin(), im.nu_kept.end(), BlockCounter{});

  double log_eps_sigma = std::log(im.eps_sigma);
  std::vector<double> log_eps_phi(im.I);
  for (int i = 0; i < im.I; ++i) log_eps_phi[i] = std::log(im.eps_phi[i]);

  int n_workers = 1;
  if (im.config.parallel_regions) {
    n_workers = im.config.workers > 0
                    ? im.config.workers
                    : static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::clamp(n_workers, 1, im.I);
  }

  auto region_sweep = [&](long iter, int i) {
    const bool adapting = iter <= im.config.burn_in;
    const StepResult rp = step_phi(iter, i);
    auto& pc = adapting ? im.phi_burnin[i] : im.phi_kept[i];
    pc.proposals++;
    if (rp.accepted) pc.accepts++;
    if (rp.auto_rejected) pc.auto_rejects++;
    if (adapting) {
      robbins_monro(&log_eps_phi[i], iter, rp.alpha, im.config.adapt_target);
      im.eps_phi[i] = std::exp(log_eps_phi[i]);
    }
    const StepResult rn = step_nu(iter, i);
    auto& nc = adapting ? im.nu_burnin[i] : im.nu_kept[i];
    nc.proposals++;
    if (rn.accepted) nc.accepts++;
    step_beta(iter, i);
    step_z(iter, i);
  };

  for (long iter = 1; iter <= im.config.n_iter; ++iter) {
    const bool adapting = iter <= im.config.burn_in;

    const StepResult rs = step_sigma(iter);
    auto& sc = adapting ? im.sigma_burnin : im.sigma_kept;
    sc.proposals++;
    if (rs.accepted) sc.accepts++;
    if (rs.auto_rejected) sc.auto_rejects++;
    if (adapting) {
      robbins_monro(&log_eps_sigma, iter, rs.alpha, im.config.adapt_target);
      im.eps_sigma = std::exp(log_eps_sigma);
    }

    if (n_workers <= 1) {
      for (int i = 0; i < im.I; ++i) region_sweep(iter, i);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(n_workers);
      pool.reserve(n_workers);
      for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (int i = w; i < im.I; i += n_workers) region_sweep(iter, i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    const StepResult rr = step_car_hyper(iter);
    if (im.config.rho_car_sampled) {
      auto& rc = adapting ? im.rho_burnin : im.rho_kept;
      rc.proposals++;
      if (rr.accepted) rc.accepts++;
    }

    if ((iter & 2047) == 0) {
      check_block(im.sigma_burnin, im.sigma_kept, "sigma");
      for (int i = 0; i < im.I; ++i)
        check_block(im.phi_burnin[i], im.phi_kept[i], "phi/" + im.region_ids[i]);
    }

    if (iter > im.config.burn_in && (iter - im.config.burn_in) % im.config.thin == 0) {
      const long d = (iter - im.config.burn_in) / im.config.thin - 1;
      Eigen::MatrixXd beta_draw(im.I, im.design.cols());
      for (int i = 0; i < im.I; ++i) {
        out.sigma2(d, i) = im.state.regions[i].sigma2;
        out.phi(d, i) = im.state.regions[i].phi;
        out.nu2(d, i) = im.state.regions[i].nu2;
        beta_draw.row(i) = im.state.regions[i].beta.transpose();
      }
      out.beta.push_back(std::move(beta_draw));
      out.z.push_back(im.state.z);
      out.car_m(d) = im.state.car_m;
      out.car_omega2(d) = im.state.car_omega2;
      out.car_rho(d) = im.state.car_rho;
    }
  }

  check_block(im.sigma_burnin, im.sigma_kept, "sigma");
  for (int i = 0; i < im.I; ++i)
    check_block(im.phi_burnin[i], im.phi_kept[i], "phi/" + im.region_ids[i]);

  out.sigma_burnin = im.sigma_burnin;
  out.sigma_kept = im.sigma_kept;
  out.phi_burnin = im.phi_burnin;
  out.phi_kept = im.phi_kept;
  out.nu_burnin = im.nu_burnin;
  out.nu_kept = im.nu_kept;
  out.rho_burnin = im.rho_burnin;
  out.rho_kept = im.rho_kept;
  out.final_sigma_eps = im.eps_sigma;
  out.final_phi_eps = Eigen::Map<Eigen::VectorXd>(im.eps_phi.data(), im.I);
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

ChainStore run_chain(const PanelDataset& panel, const AdjacencyGraph& graph,
                     const PriorSpec& priors, const DesignSpec& design_spec, double kappa,
                     const MCMCConfig& config, const std::vector<MLFit>* init_fits) {
  Sampler sampler(panel, graph, priors, design_spec, kappa, config);
  std::vector<MLFit> fits;
  if (init_fits) {
    fits = *init_fits;
  } else {
    fits = fit_all_regions(panel, design_spec, kappa);
  }
  sampler.init_from_fits(fits);
  return sampler.run();
}

}  // namespace areagp
