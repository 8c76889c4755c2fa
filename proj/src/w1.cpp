#include "vvot/w1.hpp"

#include <cmath>

namespace vvot {

namespace {

Vec default_costs(const Graph& g) {
  return g.weights.cwiseSqrt().cwiseInverse();
}

void check_w1_inputs(const Graph& g, const Vec& costs, const Vec& mu,
                     const Vec& nu) {
  require(costs.size() == g.edge_count(), ErrorCode::DimensionMismatch,
          "cost vector has wrong length");
  require(costs.minCoeff() > 0.0, ErrorCode::NonpositiveWeight,
          "edge costs must be positive");
  require(mu.size() == g.n && nu.size() == g.n, ErrorCode::DimensionMismatch,
          "marginals have wrong length");
  require(mu.minCoeff() >= 0.0 && nu.minCoeff() >= 0.0,
          ErrorCode::MassMismatch, "marginals must be nonnegative");
  require(std::abs(mu.sum() - nu.sum()) <=
              1e-10 * std::max(1.0, mu.sum()),
          ErrorCode::MassMismatch, "total masses differ");
}

// Dual-feasible potentials from a multiplier estimate: scale until every
// edge satisfies |f_src - f_dst| <= c_k, flipping sign if that raises the
// dual objective f^T (nu - mu).
Vec clean_potentials(const Graph& g, const Vec& costs, const Vec& f_raw,
                     const Vec& demand) {
  Vec slope = g.incidence.transpose() * f_raw;  // f_src - f_dst per edge
  double shrink = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.edge_count(); ++k)
    shrink = std::min(shrink, costs[k] / std::max(std::abs(slope[k]), 1e-300));
  shrink = std::min(shrink, 1e12);  // f_raw ~ 0: any bounded scaling works
  double sigma = shrink;
  if (f_raw.dot(demand) < 0.0) sigma = -sigma;
  return sigma * f_raw;
}

}  // namespace

W1Result w1_graph(const Graph& g, const Vec& mu, const Vec& nu,
                  const W1Config& cfg) {
  return w1_graph(g, default_costs(g), mu, nu, cfg);
}

W1Result w1_graph(const Graph& g, const Vec& costs, const Vec& mu,
                  const Vec& nu, const W1Config& cfg) {
  check_w1_inputs(g, costs, mu, nu);
  const int n = g.n;
  const int m = g.edge_count();
  const Vec demand = nu - mu;

  // Split u = u+ - u-; balance rows D u = demand with node 0 dropped,
  // which pins the dual potential f_0 = 0.
  SplitProgram prog;
  std::vector<Triplet> trip;
  trip.reserve(4 * m);
  for (int k = 0; k < m; ++k) {
    if (g.src[k] > 0) {
      trip.emplace_back(g.src[k] - 1, k, 1.0);
      trip.emplace_back(g.src[k] - 1, m + k, -1.0);
    }
    if (g.dst[k] > 0) {
      trip.emplace_back(g.dst[k] - 1, k, -1.0);
      trip.emplace_back(g.dst[k] - 1, m + k, 1.0);
    }
  }
  prog.constraints.resize(n - 1, 2 * m);
  prog.constraints.setFromTriplets(trip.begin(), trip.end());
  prog.rhs = demand.tail(n - 1);
  prog.initial = Vec::Zero(2 * m);
  for (int k = 0; k < m; ++k) {
    prog.linear_cells.push_back({k, costs[k]});
    prog.linear_cells.push_back({m + k, costs[k]});
  }

  W1Result result;
  auto evaluate = [&](const Vec& x, const Vec& f_raw) {
    Vec flow = x.head(m) - x.tail(m);
    const double primal = costs.dot(flow.cwiseAbs());
    const Vec f = clean_potentials(g, costs, f_raw, demand);
    const double gap = primal - f.dot(demand);
    return std::tuple<Vec, Vec, double, double>(std::move(flow), f, primal,
                                                gap);
  };

  SolverConfig scfg;
  scfg.max_iters = cfg.max_iters;
  scfg.tau = cfg.tau;
  scfg.feasibility_tol = 0.0;  // stop on the certificate only
  StopCallback certified = [&](int, const Vec& x, const Vec&,
                               const AffineProjector& proj, double tau) {
    Vec f_raw(n);
    f_raw[0] = 0.0;
    f_raw.tail(n - 1) = -proj.last_multipliers() / tau;
    auto [flow, f, primal, gap] = evaluate(x, f_raw);
    if (gap <= cfg.gap_tol * std::max(1.0, primal)) {
      result.flow = std::move(flow);
      result.potentials = f;
      result.value = primal;
      result.gap = gap;
      return true;
    }
    return false;
  };

  EngineResult engine = run_splitting(prog, scfg, nullptr, certified);
  result.iterations = engine.stats.iterations;
  result.converged = engine.stats.converged;
  if (!result.converged) {
    // Best effort report from the final iterate.
    Vec f_raw = Vec::Zero(n);
    auto [flow, f, primal, gap] = evaluate(engine.x, f_raw);
    result.flow = std::move(flow);
    result.potentials = f;
    result.value = primal;
    result.gap = gap;
  }
  return result;
}

double w1_action(const Graph& g, const Vec& costs, const Vec& mu,
                 const Vec& nu, int n_t, const SolverConfig& cfg) {
  check_w1_inputs(g, costs, mu, nu);
  require(n_t >= 2, ErrorCode::BadTimeGrid, "need at least two subintervals");
  const int n = g.n;
  const int m = g.edge_count();
  const int T = n_t;

  // Layout: rho slices, then u, then ubar.
  const int off_u = (T + 1) * n;
  const int off_v = off_u + T * m;
  const int total = off_v + T * m;
  auto rho_idx = [&](int t, int i) { return t * n + i; };

  std::vector<Triplet> trip;
  Vec rhs = Vec::Zero(T * n + 2 * n - 1);
  const double inv_t = 1.0 / T;
  for (int j = 0; j < T; ++j) {
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(j * n + i, rho_idx(j + 1, i), 1.0);
      trip.emplace_back(j * n + i, rho_idx(j, i), -1.0);
    }
    for (int k = 0; k < m; ++k) {
      // Continuity uses the plain incidence matrix; costs carry the
      // normalization.
      trip.emplace_back(j * n + g.src[k], off_u + j * m + k, -inv_t);
      trip.emplace_back(j * n + g.dst[k], off_u + j * m + k, inv_t);
      trip.emplace_back(j * n + g.src[k], off_v + j * m + k, inv_t);
      trip.emplace_back(j * n + g.dst[k], off_v + j * m + k, -inv_t);
    }
  }
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(T * n + i, rho_idx(0, i), 1.0);
    rhs[T * n + i] = mu[i];
  }
  for (int i = 1; i < n; ++i) {
    trip.emplace_back(T * n + n + i - 1, rho_idx(T, i), 1.0);
    rhs[T * n + n + i - 1] = nu[i];
  }

  SplitProgram prog;
  prog.constraints.resize(T * n + 2 * n - 1, total);
  prog.constraints.setFromTriplets(trip.begin(), trip.end());
  prog.rhs = std::move(rhs);
  prog.initial = Vec::Zero(total);
  for (int j = 0; j <= T; ++j) {
    const double t = static_cast<double>(j) / T;
    for (int i = 0; i < n; ++i)
      prog.initial[rho_idx(j, i)] = (1.0 - t) * mu[i] + t * nu[i];
  }
  for (int j = 0; j < T; ++j)
    for (int k = 0; k < m; ++k) {
      prog.linear_cells.push_back({off_u + j * m + k, costs[k] * inv_t});
      prog.linear_cells.push_back({off_v + j * m + k, costs[k] * inv_t});
    }

  SolverConfig scfg = cfg;
  if (scfg.feasibility_tol <= 0.0) scfg.feasibility_tol = 1e-7;
  EngineResult engine = run_splitting(prog, scfg);
  double value = 0.0;
  for (int j = 0; j < T; ++j)
    for (int k = 0; k < m; ++k)
      value += costs[k] * inv_t *
               (std::max(engine.x[off_u + j * m + k], 0.0) +
                std::max(engine.x[off_v + j * m + k], 0.0));
  return value;
}

W1Result w1_vector(const Graph& spatial, const Graph& mutation, double gamma,
                   const VectorMass& mu, const VectorMass& nu,
                   const W1Config& cfg) {
  require(gamma > 0.0, ErrorCode::BadGamma, "gamma must be positive");
  require(mu.channels == mutation.n && nu.channels == mutation.n,
          ErrorCode::ChannelCountMismatch,
          "channel count does not match the mutation graph");
  require(mu.nodes == spatial.n && nu.nodes == spatial.n,
          ErrorCode::DimensionMismatch,
          "node count does not match the spatial graph");
  const LayeredGraph lg = layered_product(spatial, mutation, mutation.n);
  Vec costs(lg.composite.edge_count());
  for (int k = 0; k < lg.composite.edge_count(); ++k) {
    const double base = 1.0 / std::sqrt(lg.composite.weights[k]);
    costs[k] = k < lg.spatial_edge_count ? base : gamma * base;
  }
  return w1_graph(lg.composite, costs, mu.values, nu.values, cfg);
}

}  // namespace vvot
