#pragma once

#include <Eigen/Dense>

#include "areagp/types.hpp"

namespace areagp {

// Proper-CAR precision structure Q = rho*(D - W) + (1 - rho)*I. The joint
// prior for the log-variance field s is N(m*1, omega2 * Q^{-1}).
Eigen::MatrixXd car_precision(const AdjacencyGraph& graph, double rho);

// Log-density of s under the proper CAR prior, including the 1/2 log|Q| and
// -I/2 log(omega2) normalization.
double car_logdens(const Eigen::VectorXd& s, double m, double omega2, double rho,
                   const AdjacencyGraph& graph);

// Gradient of car_logdens with respect to s: -(1/omega2) * Q * (s - m*1).
Eigen::VectorXd car_grad(const Eigen::VectorXd& s, double m, double omega2, double rho,
                         const AdjacencyGraph& graph);

}  // namespace areagp
