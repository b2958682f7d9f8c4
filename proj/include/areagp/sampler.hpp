#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "areagp/calibrate.hpp"
#include "areagp/covariance.hpp"
#include "areagp/types.hpp"

namespace areagp {

struct MCMCConfig {
  long n_iter = 50000;
  long burn_in = 10000;
  int thin = 10;
  std::uint64_t seed = 1;
  double mala_sigma_eps = 0.1;   // initial step size, adapted during burn-in
  double mala_phi_eps = 0.3;     // initial per-region step size
  double adapt_target = 0.574;   // MALA optimal acceptance
  double rho_rw_step = 0.5;      // logit-scale random walk when rho is sampled
  bool rho_car_sampled = false;
  bool parallel_regions = false;
  int workers = 0;               // 0 = hardware concurrency

  long kept_draws() const { return (n_iter - burn_in) / thin; }
  void validate() const;
};

struct BlockCounter {
  long proposals = 0;
  long accepts = 0;
  long auto_rejects = 0;  // proposal-side numerical failures

  double rate() const { return proposals > 0 ? double(accepts) / proposals : 0.0; }
};

// Thinned posterior draws plus sampler telemetry.
struct ChainStore {
  std::vector<std::string> region_ids;
  std::vector<int> times;
  int fourier_degree = 0;
  int period = 12;
  double kappa = 1.5;
  MCMCConfig config;

  Eigen::MatrixXd sigma2;  // n_draws x I
  Eigen::MatrixXd phi;     // n_draws x I
  Eigen::MatrixXd nu2;     // n_draws x I
  std::vector<Eigen::MatrixXd> beta;  // n_draws entries of I x (p+1)
  std::vector<Eigen::MatrixXd> z;     // n_draws entries of I x T
  Eigen::VectorXd car_m;
  Eigen::VectorXd car_omega2;
  Eigen::VectorXd car_rho;

  // Post-adaptation acceptance telemetry (kept phase), plus burn-in counts.
  BlockCounter sigma_kept, sigma_burnin;
  std::vector<BlockCounter> phi_kept, phi_burnin;
  std::vector<BlockCounter> nu_kept, nu_burnin;
  BlockCounter rho_kept, rho_burnin;
  double final_sigma_eps = 0.0;
  Eigen::VectorXd final_phi_eps;
  double runtime_seconds = 0.0;

  long n_draws() const { return static_cast<long>(z.size()); }
  int n_regions() const { return static_cast<int>(region_ids.size()); }
  int n_coef() const { return beta.empty() ? 0 : static_cast<int>(beta.front().cols()); }
};

struct StepResult {
  bool accepted = false;
  bool auto_rejected = false;
  double alpha = 0.0;  // realized acceptance probability
};

// One-site-at-a-time MCMC engine. Step 1 updates the log-variance field
// jointly by MALA; Step 2 sweeps regions in id order (phi by MALA, nu2 by
// independence MH, beta and Z by exact Gibbs); CAR hyperparameters close the
// iteration. Region updates within Step 2 are independent given the variance
// field and may run on several threads; every block draws from a counter
// stream keyed by (seed, iteration, region, block), so chains are identical
// for any worker count.
class Sampler {
 public:
  Sampler(const PanelDataset& panel, const AdjacencyGraph& graph, const PriorSpec& priors,
          const DesignSpec& design_spec, double kappa, const MCMCConfig& config);
  ~Sampler();
  Sampler(const Sampler&) = delete;
  Sampler& operator=(const Sampler&) = delete;

  // Start near the posterior bulk using the per-region ML fits.
  void init_from_fits(const std::vector<MLFit>& fits);
  void set_state(const ModelState& state);
  const ModelState& state() const;

  // Log target and analytic gradient for the sigma block, as functions of
  // s = (log sigma2_1, ..., log sigma2_I) with everything else frozen.
  double sigma_log_target(const Eigen::VectorXd& s) const;
  Eigen::VectorXd sigma_log_target_grad(const Eigen::VectorXd& s) const;

  // Log target and gradient for one region's log(phi).
  double phi_log_target(int region, double log_phi) const;
  double phi_log_target_grad(int region, double log_phi) const;

  // Full-conditional moments, exposed for conjugacy checks.
  void beta_conditional_moments(int region, Eigen::VectorXd* mean,
                                Eigen::MatrixXd* covariance) const;
  void z_conditional_moments(int region, Eigen::VectorXd* mean,
                             Eigen::MatrixXd* covariance) const;
  void car_m_moments(double* mean, double* variance) const;
  void car_omega2_conditional(double* shape, double* rate) const;

  StepResult step_sigma(long iteration);
  StepResult step_phi(long iteration, int region);
  StepResult step_nu(long iteration, int region);
  void step_beta(long iteration, int region);
  void step_z(long iteration, int region);
  StepResult step_car_hyper(long iteration);

  double sigma_eps() const;
  double phi_eps(int region) const;
  void set_sigma_eps(double eps);
  void set_phi_eps(int region, double eps);

  ChainStore run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Convenience wrapper: construct, initialize from ML fits (computing them
// when not supplied), and run the full protocol.
ChainStore run_chain(const PanelDataset& panel, const AdjacencyGraph& graph,
                     const PriorSpec& priors, const DesignSpec& design_spec, double kappa,
                     const MCMCConfig& config,
                     const std::vector<MLFit>* init_fits = nullptr);

}  // namespace areagp
