#pragma once

#include <vector>

#include "vvot/graph.hpp"
#include "vvot/types.hpp"

namespace vvot {

struct FlowState {
  Vec rho;  // strictly positive, sums to one
  double t = 0.0;
};

/// S(rho) = -sum rho_i log rho_i; requires strictly positive entries.
double entropy(const Vec& rho);

/// Right-hand side of the entropy gradient flow in the symmetric transport
/// geometry: rho_dot = -div(A(rho)^{-1} grad log rho) with per-edge
/// mobility A_k = 1/(sink mass) + 1/(source mass). Sums to zero and
/// vanishes exactly at the uniform distribution.
Vec flow_rhs(const Graph& g, const Vec& rho);

/// Explicit Euler with adaptive step halving: a step is retried at h/2
/// whenever it would break positivity or decrease entropy. Throws
/// StepUnderflow once h falls below 1e-12.
std::vector<FlowState> integrate(const Graph& g, const Vec& rho0, double h,
                                 int steps);

}  // namespace vvot
