#include "areagp/transform.hpp"

#include <cmath>
#include <limits>

namespace areagp {

double transform_value(double raw, double denominator, TransformKind kind, double scale,
                       double correction) {
  switch (kind) {
    case TransformKind::identity:
      return raw;
    case TransformKind::log_rate:
      if (!(denominator > 0.0))
        throw ValidationError("log-rate transform: denominator must be > 0");
      return std::log((raw + correction) / denominator * scale);
    case TransformKind::empirical_logit:
      if (!(denominator > 0.0))
        throw ValidationError("empirical-logit transform: denominator must be > 0");
      if (raw > denominator)
        throw ValidationError("empirical-logit transform: count exceeds denominator");
      return std::log((raw + 0.5) / (denominator - raw + 0.5));
  }
  return raw;
}

double inverse_transform_value(double v, double denominator, TransformKind kind, double scale,
                               double correction) {
  switch (kind) {
    case TransformKind::identity:
      return v;
    case TransformKind::log_rate:
      return std::exp(v) * denominator / scale - correction;
    case TransformKind::empirical_logit: {
      const double e = std::exp(v);
      return (e * (denominator + 0.5) - 0.5) / (1.0 + e);
    }
  }
  return v;
}

double natural_scale_value(double v, TransformKind kind) {
  switch (kind) {
    case TransformKind::identity:
      return v;
    case TransformKind::log_rate:
      return std::exp(v);
    case TransformKind::empirical_logit:
      return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

TransformResult transform_matrix(const Eigen::MatrixXd& raw,
                                 const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& observed,
                                 const Eigen::MatrixXd& denominators, TransformKind kind,
                                 double scale) {
  TransformResult out;
  out.values.setConstant(raw.rows(), raw.cols(), std::numeric_limits<double>::quiet_NaN());
  if (kind == TransformKind::log_rate) {
    bool any_zero = false;
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      for (Eigen::Index t = 0; t < raw.cols(); ++t)
        if (observed(i, t) && raw(i, t) == 0.0) any_zero = true;
    out.correction = any_zero ? 0.5 : 0.0;
  }
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    for (Eigen::Index t = 0; t < raw.cols(); ++t)
      if (observed(i, t)) {
        const double denom =
            kind == TransformKind::identity ? 1.0 : denominators(i, t);
        out.values(i, t) = transform_value(raw(i, t), denom, kind, scale, out.correction);
      }
  return out;
}

}  // namespace areagp
