#include "areagp/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "areagp/forecast.hpp"

namespace areagp {

namespace {

// Compensated accumulation keeps both CRPS routes within ~1e-15 of each
// other even at m = 4000.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = v - carry;
    const double s = sum + t;
    carry = (s - sum) - t;
    sum = s;
  }
};

}  // namespace

double crps_sample(const Eigen::VectorXd& samples, double y) {
  const Eigen::Index m = samples.size();
  if (m < 1) throw ValidationError("crps_sample: empty sample");
  std::vector<double> x(samples.data(), samples.data() + m);
  std::sort(x.begin(), x.end());
  KahanSum term1;
  for (double v : x) term1.add(std::abs(v - y));
  // For sorted x: sum_{j,k} |x_j - x_k| = 2 * sum_k (2k - m + 1) x_k.
  KahanSum term2;
  for (Eigen::Index k = 0; k < m; ++k)
    term2.add((2.0 * static_cast<double>(k) - static_cast<double>(m) + 1.0) * x[k]);
  const double md = static_cast<double>(m);
  return term1.sum / md - term2.sum / (md * md);
}

double crps_sample_bruteforce(const Eigen::VectorXd& samples, double y) {
  const Eigen::Index m = samples.size();
  if (m < 1) throw ValidationError("crps_sample: empty sample");
  KahanSum term1, term2;
  for (Eigen::Index j = 0; j < m; ++j) term1.add(std::abs(samples(j) - y));
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < m; ++k) term2.add(std::abs(samples(j) - samples(k)));
  const double md = static_cast<double>(m);
  return term1.sum / md - term2.sum / (2.0 * md * md);
}

ScoreCell score_cell(const std::string& region_id, int time, bool test_set,
                     const Eigen::VectorXd& samples, double observed) {
  std::vector<double> finite;
  finite.reserve(samples.size());
  for (Eigen::Index j = 0; j < samples.size(); ++j)
    if (std::isfinite(samples(j))) finite.push_back(samples(j));
  if (finite.empty()) throw ValidationError("score_cell: no finite predictive samples");
  Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(finite.data(), finite.size());

  ScoreCell cell;
  cell.region_id = region_id;
  cell.time = time;
  cell.test_set = test_set;
  cell.observed = observed;
  cell.crps = crps_sample(s, observed);
  const SummaryRow summary = summarize(s);
  cell.pred_mean = summary.mean;
  cell.pred_median = summary.q50;
  cell.lo = summary.q025;
  cell.hi = summary.q975;
  cell.abs_error = std::abs(summary.mean - observed);
  cell.sq_error = (summary.mean - observed) * (summary.mean - observed);
  cell.covered = (cell.lo <= observed && observed <= cell.hi);
  return cell;
}

std::vector<ScoreAggregate> aggregate_scores(const std::vector<ScoreCell>& cells) {
  std::map<std::pair<std::string, bool>, std::vector<const ScoreCell*>> groups;
  for (const auto& c : cells) {
    groups[{c.region_id, c.test_set}].push_back(&c);
    groups[{"overall", c.test_set}].push_back(&c);
  }
  std::vector<ScoreAggregate> out;
  for (const auto& [key, members] : groups) {
    ScoreAggregate agg;
    agg.label = key.first;
    agg.test_set = key.second;
    agg.n_cells = static_cast<int>(members.size());
    double se = 0.0, ae = 0.0, crps = 0.0;
    int covered = 0;
    std::vector<double> crps_values;
    for (const auto* c : members) {
      se += c->sq_error;
      ae += c->abs_error;
      crps += c->crps;
      crps_values.push_back(c->crps);
      covered += c->covered ? 1 : 0;
    }
    agg.rmse = std::sqrt(se / agg.n_cells);
    agg.mae = ae / agg.n_cells;
    agg.mean_crps = crps / agg.n_cells;
    agg.median_crps = quantile_type7(std::move(crps_values), 0.5);
    agg.ecp = static_cast<double>(covered) / agg.n_cells;
    out.push_back(agg);
  }
  return out;
}

std::pair<double, double> point_errors(const Eigen::VectorXd& forecasts,
                                       const Eigen::VectorXd& observed) {
  if (forecasts.size() == 0 || forecasts.size() != observed.size())
    throw ValidationError("point_errors: size mismatch or empty input");
  const Eigen::VectorXd err = forecasts - observed;
  const double rmse = std::sqrt(err.squaredNorm() / err.size());
  const double mae = err.cwiseAbs().mean();
  return {rmse, mae};
}

double ecp(const std::vector<std::pair<double, double>>& intervals,
           const std::vector<double>& observed) {
  if (intervals.size() != observed.size())
    throw ValidationError("ecp: size mismatch");
  if (intervals.empty()) throw ValidationError("ecp: empty input");
  int covered = 0;
  for (size_t k = 0; k < intervals.size(); ++k) {
    if (intervals[k].first > intervals[k].second)
      throw ValidationError("ecp: interval with lo > hi");
    if (intervals[k].first <= observed[k] && observed[k] <= intervals[k].second) ++covered;
  }
  return static_cast<double>(covered) / intervals.size();
}

}  // namespace areagp
