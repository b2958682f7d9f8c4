#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "areagp/sampler.hpp"

namespace areagp {

// Geweke z-score comparing the first 10% against the last 50% of the chain,
// with spectral variances from Bartlett-windowed autocovariances (bandwidth
// floor(sqrt(segment length))). Returns nullopt for degenerate chains.
std::optional<double> geweke_z(const Eigen::VectorXd& chain);

// Sample autocorrelations at lags 0..max_lag.
Eigen::VectorXd autocorrelations(const Eigen::VectorXd& chain, int max_lag);

struct EssResult {
  double ess = 0.0;     // reported value, capped at n
  double raw = 0.0;     // uncapped estimate
  bool capped = false;  // antithetic chains exceed n and are capped
  bool degenerate = false;
};

// n / (1 + 2 sum rho_k) with initial-positive-sequence truncation.
EssResult ess(const Eigen::VectorXd& chain);

struct ParameterDiagnostic {
  std::string name;
  std::optional<double> geweke;
  double ess = 0.0;
  bool ess_capped = false;
  Eigen::VectorXd acf;  // lags 0..50 (shorter for short chains)
  bool flagged = false;  // |geweke| > 1.96 or degenerate
};

struct AcceptanceRow {
  std::string block;
  bool has_rate = false;  // false when the block made no proposals
  double rate = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  std::string flag;  // "", "low", "high"
};

struct DiagnosticsReport {
  std::vector<ParameterDiagnostic> parameters;
  std::vector<AcceptanceRow> acceptance;
  // Running Geweke z-series at evenly spaced cut points, per parameter.
  std::vector<std::vector<double>> geweke_running;
};

// Expected post-adaptation bands: MALA 0.45-0.70, independence MH 0.10-0.40.
std::vector<AcceptanceRow> acceptance_report(const ChainStore& chain);

DiagnosticsReport diagnose_chain(const ChainStore& chain, int max_lag = 50,
                                 int running_points = 20);

}  // namespace areagp
