#include "vvot/entropy_flow.hpp"

#include <cmath>

namespace vvot {

namespace {

void check_positive(const Vec& rho, int n) {
  require(rho.size() == n, ErrorCode::DimensionMismatch,
          "density has wrong length");
  require(rho.minCoeff() > 0.0, ErrorCode::NonpositiveEntry,
          "density must be strictly positive");
}

}  // namespace

double entropy(const Vec& rho) {
  require(rho.size() > 0, ErrorCode::DimensionMismatch, "empty density");
  require(rho.minCoeff() > 0.0, ErrorCode::NonpositiveEntry,
          "entropy needs strictly positive entries");
  return -(rho.array() * rho.array().log()).sum();
}

Vec flow_rhs(const Graph& g, const Vec& rho) {
  check_positive(rho, g.n);
  const Vec log_rho = rho.array().log();
  Vec u = g.grad_op * log_rho;
  for (int k = 0; k < g.edge_count(); ++k) {
    const double mobility =
        1.0 / rho[g.dst[k]] + 1.0 / rho[g.src[k]];  // A_k, inverted per edge
    u[k] = -u[k] / mobility;
  }
  return g.div_op * u;
}

std::vector<FlowState> integrate(const Graph& g, const Vec& rho0, double h,
                                 int steps) {
  check_positive(rho0, g.n);
  require(h > 0.0, ErrorCode::StepUnderflow, "step must be positive");
  std::vector<FlowState> out;
  out.reserve(steps + 1);
  out.push_back({rho0, 0.0});
  Vec rho = rho0;
  double t = 0.0;
  double s = entropy(rho);
  for (int i = 0; i < steps; ++i) {
    double step = h;
    for (;;) {
      const Vec next = rho + step * flow_rhs(g, rho);
      if (next.minCoeff() > 0.0) {
        const double s_next = entropy(next);
        if (s_next >= s - 1e-14) {
          rho = next;
          s = s_next;
          t += step;
          break;
        }
      }
      step *= 0.5;
      require(step >= 1e-12, ErrorCode::StepUnderflow,
              "entropy flow step underflow");
    }
    out.push_back({rho, t});
  }
  return out;
}

}  // namespace vvot
