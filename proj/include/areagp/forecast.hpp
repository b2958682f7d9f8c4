#pragma once

#include <Eigen/Dense>
#include <vector>

#include "areagp/sampler.hpp"
#include "areagp/types.hpp"

namespace areagp {

// Posterior-predictive samples over a forecast horizon. For each kept draw
// and region, Z at the horizon times is drawn from the Gaussian conditional
// on that draw's latent path, and the observation adds tau2 noise.
struct ForecastSet {
  std::vector<std::string> region_ids;
  std::vector<int> horizon_times;              // T+1 .. T+H in index units
  std::vector<Eigen::MatrixXd> linear;         // per region: n_draws x H
  std::vector<Eigen::MatrixXd> observation;    // per region: n_draws x H
  long skipped_draws = 0;

  int n_regions() const { return static_cast<int>(region_ids.size()); }
  int horizon() const { return static_cast<int>(horizon_times.size()); }
};

ForecastSet predictive_draws(const ChainStore& chain, int horizon);

// In-sample posterior-predictive replicates on the training grid: the linear
// predictor X*beta + Z per draw, plus noisy observation replicates.
struct InsampleSet {
  std::vector<std::string> region_ids;
  std::vector<int> times;
  std::vector<Eigen::MatrixXd> linear;       // per region: n_draws x T
  std::vector<Eigen::MatrixXd> observation;  // per region: n_draws x T
};

InsampleSet insample_draws(const ChainStore& chain);

// Empirical mean and type-7 quantiles (0.025, 0.5, 0.975) of a sample.
struct SummaryRow {
  double mean = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

SummaryRow summarize(const Eigen::VectorXd& samples);
double quantile_type7(std::vector<double> sorted_or_not, double p);

}  // namespace areagp
