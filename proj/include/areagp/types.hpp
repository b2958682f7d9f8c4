#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "areagp/common.hpp"

namespace areagp {

enum class TransformKind { identity, log_rate, empirical_logit };

std::string to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& s);

// Region x time observations on the transformed (Gaussian) scale.
// Missing cells carry NaN in `values` and false in `observed`.
struct PanelDataset {
  std::vector<std::string> region_ids;             // length I
  std::vector<int> times;                          // strictly increasing, length T
  Eigen::MatrixXd values;                          // I x T
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> observed;  // I x T
  int period = 12;                                 // seasonal cycle length
  TransformKind transform_kind = TransformKind::identity;
  Eigen::MatrixXd denominators;                    // I x T, empty unless needed
  double rate_scale = 10000.0;                     // log-rate multiplier
  double continuity_correction = 0.0;              // log-rate c actually applied

  int n_regions() const { return static_cast<int>(region_ids.size()); }
  int n_times() const { return static_cast<int>(times.size()); }

  void validate() const;

  // New dataset restricted to times[0..t_count-1].
  PanelDataset head_times(int t_count) const;
};

// Symmetric binary spatial neighborhood (Queen contiguity in the pipelines).
struct AdjacencyGraph {
  int n_nodes = 0;
  Eigen::MatrixXd weights;       // I x I, binary, zero diagonal
  Eigen::VectorXd degrees;       // row sums
  bool connected = true;

  void validate() const;
  static AdjacencyGraph from_weights(const Eigen::MatrixXd& w);
};

struct MaternKernel {
  double kappa = 1.5;  // smoothness, fixed (not sampled)
  double phi = 1.0;    // temporal range, in time-index units

  void validate() const {
    if (!(kappa > 0.0)) throw ValidationError("MaternKernel: kappa must be > 0");
    if (!(phi > 0.0)) throw ValidationError("MaternKernel: phi must be > 0");
  }
};

struct RegionParams {
  Eigen::VectorXd beta;  // length p+1, intercept first
  double sigma2 = 1.0;   // GP variance
  double phi = 1.0;      // temporal range
  double nu2 = 1.0;      // noise-to-signal ratio

  double tau2() const { return nu2 * sigma2; }  // noise variance

  void validate() const {
    if (!(sigma2 > 0.0) || !(phi > 0.0) || !(nu2 > 0.0))
      throw ValidationError("RegionParams: sigma2, phi, nu2 must be > 0");
  }
};

// Fourier mean structure: intercept plus sin/cos pairs up to degree J.
struct DesignSpec {
  int fourier_degree = 0;  // J
  int period = 12;

  int n_columns() const { return 2 * fourier_degree + 1; }

  void validate(int n_times) const {
    if (fourier_degree < 0) throw ValidationError("DesignSpec: fourier_degree must be >= 0");
    if (period <= 0) throw ValidationError("DesignSpec: period must be > 0");
    if (n_columns() > n_times)
      throw ValidationError("DesignSpec: 2J+1 exceeds number of time points");
  }
};

// Everything the MCMC tracks at one iteration.
struct ModelState {
  std::vector<RegionParams> regions;  // length I
  Eigen::MatrixXd z;                  // I x T latent GP values
  double car_m = 0.0;
  double car_omega2 = 1.0;
  double car_rho = 0.9;

  int n_regions() const { return static_cast<int>(regions.size()); }
  void validate() const;
};

}  // namespace areagp
