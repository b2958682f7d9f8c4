#include "areagp/design.hpp"

#include <cmath>

namespace areagp {

Eigen::MatrixXd build_design(const DesignSpec& spec, const std::vector<int>& times) {
  const int T = static_cast<int>(times.size());
  spec.validate(T);
  Eigen::MatrixXd x(T, spec.n_columns());
  constexpr double two_pi = 6.283185307179586476925286766559;
  for (int r = 0; r < T; ++r) {
    x(r, 0) = 1.0;
    for (int j = 1; j <= spec.fourier_degree; ++j) {
      const double arg = two_pi * j * times[r] / spec.period;
      x(r, 2 * j - 1) = std::sin(arg);
      x(r, 2 * j) = std::cos(arg);
    }
  }
  return x;
}

}  // namespace areagp
