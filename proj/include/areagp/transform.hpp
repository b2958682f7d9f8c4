#pragma once

#include <Eigen/Dense>

#include "areagp/types.hpp"

namespace areagp {

// Scalar transforms between the raw observation scale and the modeling scale.
//   log-rate:        log((count + c) / denominator * scale)
//   empirical-logit: log((x + 0.5) / (n - x + 0.5))
//   identity:        pass-through
double transform_value(double raw, double denominator, TransformKind kind, double scale,
                       double correction);
double inverse_transform_value(double v, double denominator, TransformKind kind, double scale,
                               double correction);

// Denominator-free mapping to a natural reporting scale: exp(v) for log-rate
// (a rate per `scale` units), logistic(v) for empirical-logit (a proportion),
// identity otherwise.
double natural_scale_value(double v, TransformKind kind);

// Applies the transform to a raw count matrix. For log-rate the continuity
// correction is c = 0.5 when any observed count is zero, else 0; the applied
// value is returned so callers can record and invert it.
struct TransformResult {
  Eigen::MatrixXd values;
  double correction = 0.0;
};
TransformResult transform_matrix(const Eigen::MatrixXd& raw,
                                 const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& observed,
                                 const Eigen::MatrixXd& denominators, TransformKind kind,
                                 double scale);

}  // namespace areagp
