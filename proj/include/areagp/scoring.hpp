#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "areagp/types.hpp"

namespace areagp {

// Sample CRPS: (1/m) sum |x_j - y| - 1/(2 m^2) sum_jk |x_j - x_k|, computed
// in O(m log m) via sorting; exactly equivalent to the double sum.
double crps_sample(const Eigen::VectorXd& samples, double y);

// The O(m^2) definition, kept as an independent check.
double crps_sample_bruteforce(const Eigen::VectorXd& samples, double y);

struct ScoreCell {
  std::string region_id;
  int time = 0;
  bool test_set = false;
  double observed = 0.0;
  double crps = 0.0;
  double abs_error = 0.0;
  double sq_error = 0.0;
  double pred_mean = 0.0;
  double pred_median = 0.0;
  double lo = 0.0;  // 95% interval bounds
  double hi = 0.0;
  bool covered = false;
};

struct ScoreAggregate {
  std::string label;  // region id, "overall"
  bool test_set = false;
  int n_cells = 0;
  double rmse = 0.0;
  double mae = 0.0;
  double mean_crps = 0.0;
  double median_crps = 0.0;
  double ecp = 0.0;
};

struct ScoreReport {
  std::vector<ScoreCell> cells;
  std::vector<ScoreAggregate> aggregates;
};

// Per-cell scores from predictive samples (rows with NaN, e.g. skipped
// forecast draws, are excluded). Point forecast is the predictive mean; the
// median is carried alongside. Intervals are the central 95%.
ScoreCell score_cell(const std::string& region_id, int time, bool test_set,
                     const Eigen::VectorXd& samples, double observed);

// Aggregates per region and overall, training and test partitions separately.
std::vector<ScoreAggregate> aggregate_scores(const std::vector<ScoreCell>& cells);

// (rmse, mae) over a set of (point forecast, observation) pairs.
std::pair<double, double> point_errors(const Eigen::VectorXd& forecasts,
                                       const Eigen::VectorXd& observed);

// Empirical coverage: fraction of cells with lo <= y <= hi (boundaries count).
double ecp(const std::vector<std::pair<double, double>>& intervals,
           const std::vector<double>& observed);

}  // namespace areagp
