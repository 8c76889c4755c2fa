#pragma once

#include "vvot/graph.hpp"
#include "vvot/solver.hpp"
#include "vvot/transport.hpp"
#include "vvot/types.hpp"

namespace vvot {

struct W1Result {
  double value = 0.0;
  Vec flow;        // per edge, signed in the stored orientation
  Vec potentials;  // per node, pinned to 0 at node 0
  double gap = 0.0;  // certified duality gap
  int iterations = 0;
  bool converged = true;
};

struct W1Config {
  double gap_tol = 1e-11;
  int max_iters = 400000;
  double tau = 0.0;  // 0 = automatic
};

/// Min-cost flow form of the Wasserstein-1 distance:
///   min c^T |u|  s.t.  nu - mu - D u = 0.
/// Costs default to 1/sqrt(w_k). The flow is exactly feasible (projection
/// onto the balance constraint), the returned potentials are dual feasible
/// (|f_i - f_j| <= c_k on every edge) and the reported gap certifies
/// optimality.
W1Result w1_graph(const Graph& g, const Vec& costs, const Vec& mu,
                  const Vec& nu, const W1Config& cfg = {});
W1Result w1_graph(const Graph& g, const Vec& mu, const Vec& nu,
                  const W1Config& cfg = {});

/// Time-dependent action form: min integral of c^T u + c^T ubar subject to
/// the rate continuity equation on a staggered grid. Collapses to the
/// min-cost flow value.
double w1_action(const Graph& g, const Vec& costs, const Vec& mu,
                 const Vec& nu, int n_t, const SolverConfig& cfg = {});

/// Vector-valued W1: min-cost flow on the layered product, spatial edges
/// costed 1/sqrt(w), mutation edges gamma/sqrt(w).
W1Result w1_vector(const Graph& spatial, const Graph& mutation, double gamma,
                   const VectorMass& mu, const VectorMass& nu,
                   const W1Config& cfg = {});

}  // namespace vvot
