#include "areagp/car.hpp"

#include <cmath>

#include "areagp/covariance.hpp"

namespace areagp {

Eigen::MatrixXd car_precision(const AdjacencyGraph& graph, double rho) {
  if (rho < 0.0 || rho >= 1.0) throw ValidationError("car_precision: rho must be in [0,1)");
  Eigen::MatrixXd q = -rho * graph.weights;
  q.diagonal() = rho * graph.degrees.array() + (1.0 - rho);
  return q;
}

double car_logdens(const Eigen::VectorXd& s, double m, double omega2, double rho,
                   const AdjacencyGraph& graph) {
  if (!(omega2 > 0.0)) throw ValidationError("car_logdens: omega2 must be > 0");
  const int I = graph.n_nodes;
  if (s.size() != I) throw ValidationError("car_logdens: s length mismatch");
  const Eigen::MatrixXd q = car_precision(graph, rho);
  const CholFactor chol = chol_spd(q, 1.0, "car_logdens");
  const Eigen::VectorXd centered = s.array() - m;
  const double quad = centered.dot(q * centered);
  constexpr double two_pi = 6.283185307179586476925286766559;
  return -0.5 * I * std::log(two_pi * omega2) + 0.5 * chol.log_det - 0.5 * quad / omega2;
}

Eigen::VectorXd car_grad(const Eigen::VectorXd& s, double m, double omega2, double rho,
                         const AdjacencyGraph& graph) {
  const Eigen::MatrixXd q = car_precision(graph, rho);
  const Eigen::VectorXd centered = s.array() - m;
  return -(q * centered) / omega2;
}

}  // namespace areagp
