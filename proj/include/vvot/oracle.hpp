#pragma once

#include "vvot/transport.hpp"
#include "vvot/types.hpp"

namespace vvot {
namespace oracle {

// Small-scale reference implementations for tests. Deliberately dense and
// slow, sharing no numerical kernels with the splitting solver.

struct KantorovichResult {
  double value = 0.0;
  Mat coupling;  // rows follow mu, columns follow nu
};

/// Exact static transport LP (successive shortest paths on the bipartite
/// support graph with potentials). Supports up to 64 x 64.
KantorovichResult static_kantorovich(const Mat& cost, const Vec& mu,
                                     const Vec& nu);

/// Independent minimizer of the same discrete action with denominators
/// rho replaced by rho + eps, run by projected gradient descent on the
/// dense feasible set (Dykstra handles the sign constraints of asymmetric
/// variants). Limited to 5000 unknowns.
struct SmoothedSolveResult {
  double value = 0.0;        // objective of the smoothed program
  double bias_bound = 0.0;   // eps * accumulated flux-over-density weight
  int iterations = 0;
  double grad_norm = 0.0;    // projected gradient norm at the last iterate
};

SmoothedSolveResult smoothed_dynamic_solve(const TransportProblem& problem,
                                           double eps, int max_iters = 200000);

/// Exact least-squares projection of x onto {A y = b} via a dense
/// complete orthogonal decomposition; rank-deficient systems with
/// consistent right-hand sides get the minimum-norm correction.
Vec dense_projection(const Vec& x, const Mat& a, const Vec& b);

}  // namespace oracle
}  // namespace vvot
