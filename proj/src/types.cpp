#include "areagp/types.hpp"

#include <cmath>
#include <queue>

namespace areagp {

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::identity: return "identity";
    case TransformKind::log_rate: return "log-rate";
    case TransformKind::empirical_logit: return "empirical-logit";
  }
  return "identity";
}

TransformKind transform_kind_from_string(const std::string& s) {
  if (s == "identity") return TransformKind::identity;
  if (s == "log-rate") return TransformKind::log_rate;
  if (s == "empirical-logit") return TransformKind::empirical_logit;
  throw ValidationError("unknown transform kind: " + s);
}

void PanelDataset::validate() const {
  const int I = n_regions();
  const int T = n_times();
  if (I < 1) throw ValidationError("PanelDataset: need at least one region");
  if (T < 3) throw ValidationError("PanelDataset: need at least three time points");
  for (int t = 1; t < T; ++t)
    if (times[t] <= times[t - 1])
      throw ValidationError("PanelDataset: times must be strictly increasing");
  if (values.rows() != I || values.cols() != T)
    throw ValidationError("PanelDataset: values shape does not match regions/times");
  if (observed.rows() != I || observed.cols() != T)
    throw ValidationError("PanelDataset: observed mask shape mismatch");
  if (period <= 0) throw ValidationError("PanelDataset: period must be positive");
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t)
      if (observed(i, t) && !std::isfinite(values(i, t)))
        throw ValidationError("PanelDataset: non-finite value at observed cell (" +
                              region_ids[i] + ", t=" + std::to_string(times[t]) + ")");
  const bool needs_denom = transform_kind != TransformKind::identity;
  if (needs_denom) {
    if (denominators.rows() != I || denominators.cols() != T)
      throw ValidationError("PanelDataset: denominators required for transform " +
                            to_string(transform_kind));
    for (int i = 0; i < I; ++i)
      for (int t = 0; t < T; ++t)
        if (observed(i, t) && !(denominators(i, t) > 0.0))
          throw ValidationError("PanelDataset: denominators must be strictly positive");
  }
}

PanelDataset PanelDataset::head_times(int t_count) const {
  if (t_count < 1 || t_count > n_times())
    throw ValidationError("head_times: count out of range");
  PanelDataset out = *this;
  out.times.assign(times.begin(), times.begin() + t_count);
  out.values = values.leftCols(t_count).eval();
  out.observed = observed.leftCols(t_count).eval();
  if (denominators.size() > 0) out.denominators = denominators.leftCols(t_count).eval();
  return out;
}

void AdjacencyGraph::validate() const {
  if (n_nodes < 1) throw ValidationError("AdjacencyGraph: need at least one node");
  if (weights.rows() != n_nodes || weights.cols() != n_nodes)
    throw ValidationError("AdjacencyGraph: weights shape mismatch");
  for (int i = 0; i < n_nodes; ++i) {
    if (weights(i, i) != 0.0)
      throw ValidationError("AdjacencyGraph: nonzero diagonal");
    for (int j = 0; j < n_nodes; ++j) {
      const double w = weights(i, j);
      if (w != 0.0 && w != 1.0)
        throw ValidationError("AdjacencyGraph: weights must be binary");
      if (w != weights(j, i))
        throw ValidationError("AdjacencyGraph: weights must be symmetric");
    }
  }
  if ((degrees - weights.rowwise().sum()).cwiseAbs().maxCoeff() > 0.0)
    throw ValidationError("AdjacencyGraph: degrees inconsistent with weights");
}

AdjacencyGraph AdjacencyGraph::from_weights(const Eigen::MatrixXd& w) {
  AdjacencyGraph g;
  g.n_nodes = static_cast<int>(w.rows());
  g.weights = w;
  g.degrees = w.rowwise().sum();
  // BFS from node 0; disconnection is legal but recorded.
  std::vector<bool> seen(g.n_nodes, false);
  std::queue<int> queue;
  queue.push(0);
  seen[0] = true;
  int reached = 1;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop();
    for (int v = 0; v < g.n_nodes; ++v) {
      if (w(u, v) != 0.0 && !seen[v]) {
        seen[v] = true;
        ++reached;
        queue.push(v);
      }
    }
  }
  g.connected = (reached == g.n_nodes);
  g.validate();
  return g;
}

void ModelState::validate() const {
  for (const auto& r : regions) r.validate();
  if (z.rows() != n_regions()) throw ValidationError("ModelState: z row count mismatch");
  if (!z.allFinite()) throw ValidationError("ModelState: z must be finite");
  if (!(car_omega2 > 0.0)) throw ValidationError("ModelState: car_omega2 must be > 0");
  if (car_rho < 0.0 || car_rho >= 1.0)
    throw ValidationError("ModelState: car_rho must be in [0,1)");
}

}  // namespace areagp
