#pragma once

#include <Eigen/Dense>
#include <vector>

#include "areagp/types.hpp"

namespace areagp {

// T x (2J+1) Fourier design matrix: intercept, then for j = 1..J the pair
// sin(2*pi*j*t/period), cos(2*pi*j*t/period), ordered (sin1, cos1, sin2, ...).
Eigen::MatrixXd build_design(const DesignSpec& spec, const std::vector<int>& times);

}  // namespace areagp
