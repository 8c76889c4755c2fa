#include "vvot/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vvot {

namespace {

constexpr double kMassTol = 1e-12;

void check_mass_vector(const Vec& v, ErrorCode code, const char* what) {
  require(v.size() > 0, code, std::string(what) + " is empty");
  require(v.minCoeff() >= 0.0, code, std::string(what) + " has negative entries");
  require(std::abs(v.sum() - 1.0) <= kMassTol, code,
          std::string(what) + " does not sum to one");
}

Vec eps_mixed(const Vec& v, const AssembleOptions& opts) {
  if (!opts.eps_mix) return v;
  const double eps = opts.eps_mix_value;
  return (1.0 - eps) * v + Vec::Constant(v.size(), eps / v.size());
}

// q^2 / den under the perspective convention; negative densities are
// treated as zero.
double perspective_value(double q, double den) {
  if (den > 0.0) return q * q / den;
  return q * q <= 1e-18 ? 0.0 : std::numeric_limits<double>::infinity();
}

TransportProblem assemble_impl(Variant variant, Graph geometry,
                               int spatial_edges, int mutation_edges,
                               int channels, double gamma, int n_t, Vec mu,
                               Vec nu, const AssembleOptions& opts) {
  const bool symmetric = variant == Variant::SymmetricGraph ||
                         variant == Variant::SymmetricLayered;
  const int n = geometry.n;
  const int m = geometry.edge_count();
  const int T = n_t;

  require(T >= 2, ErrorCode::BadTimeGrid, "need at least two time subintervals");
  require(mu.size() == n && nu.size() == n, ErrorCode::MarginalMismatch,
          "marginals do not match the geometry");
  check_mass_vector(mu, ErrorCode::MarginalMismatch, "mu");
  check_mass_vector(nu, ErrorCode::MarginalMismatch, "nu");
  require(std::abs(mu.sum() - nu.sum()) <= 10 * kMassTol,
          ErrorCode::InfeasibleBoundary, "marginal masses differ");

  mu = eps_mixed(mu, opts);
  nu = eps_mixed(nu, opts);

  TransportProblem p;
  p.variant = variant;
  p.geometry = std::move(geometry);
  p.spatial_edge_count = spatial_edges;
  p.mutation_edge_count = mutation_edges;
  p.channels = channels;
  p.gamma = gamma;
  p.n_t = T;
  p.mu = mu;
  p.nu = nu;
  p.symmetric = symmetric;
  p.edge_scale = Vec::Ones(m);
  p.edge_scale.tail(mutation_edges).setConstant(gamma);

  // The gamma-scaled energy gamma q^2/rho is solved in substituted flux
  // units q' = sqrt(gamma) q, which folds gamma into the mutation edge
  // weights (w/gamma) and leaves every energy cell with a uniform 1/n_t
  // scale. Extraction converts fluxes back to original units.
  Vec folded_sqrt_w(m);
  for (int k = 0; k < m; ++k)
    folded_sqrt_w[k] = std::sqrt(p.geometry.weights[k] / p.edge_scale[k]);

  p.off_rho = 0;
  p.off_u = (T + 1) * n;
  p.off_v = p.off_u + T * m;
  p.off_a = p.off_v + T * m;
  p.off_b = p.off_a + T * m;
  const int total = p.off_b + T * m;

  const int rows_cont = T * n;
  const int rows_bnd = 2 * n - 1;  // terminal row for node 0 is implied
  const int rows_aux = T * m * (symmetric ? 3 : 2);
  const int rows = rows_cont + rows_bnd + rows_aux;

  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(rows_cont) * 2 +
               static_cast<size_t>(T) * m * 10 + rows_bnd);
  Vec rhs = Vec::Zero(rows);

  // Continuity: rho^{j+1} - rho^j - (1/T) div(u^j - ubar^j) = 0.
  const double inv_t = 1.0 / T;
  for (int j = 0; j < T; ++j) {
    for (int i = 0; i < n; ++i) {
      const int row = j * n + i;
      trip.emplace_back(row, p.rho_index(j + 1, i), 1.0);
      trip.emplace_back(row, p.rho_index(j, i), -1.0);
    }
    for (int k = 0; k < m; ++k) {
      const double sw = folded_sqrt_w[k];
      const int s = p.geometry.src[k];
      const int d = p.geometry.dst[k];
      trip.emplace_back(j * n + s, p.u_index(j, k), -sw * inv_t);
      trip.emplace_back(j * n + d, p.u_index(j, k), sw * inv_t);
      if (!symmetric) {
        trip.emplace_back(j * n + s, p.v_index(j, k), sw * inv_t);
        trip.emplace_back(j * n + d, p.v_index(j, k), -sw * inv_t);
      }
    }
  }
  // Boundary rows.
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(rows_cont + i, p.rho_index(0, i), 1.0);
    rhs[rows_cont + i] = mu[i];
  }
  for (int i = 1; i < n; ++i) {
    trip.emplace_back(rows_cont + n + i - 1, p.rho_index(T, i), 1.0);
    rhs[rows_cont + n + i - 1] = nu[i];
  }
  // Midpoint density averages feeding the energy denominators:
  // a = sink-side mass, b = source-side mass.
  const int base_a = rows_cont + rows_bnd;
  const int base_b = base_a + T * m;
  const int base_c = base_b + T * m;
  for (int j = 0; j < T; ++j) {
    for (int k = 0; k < m; ++k) {
      const int s = p.geometry.src[k];
      const int d = p.geometry.dst[k];
      const int ra = base_a + j * m + k;
      trip.emplace_back(ra, p.off_a + j * m + k, 1.0);
      trip.emplace_back(ra, p.rho_index(j, d), -0.5);
      trip.emplace_back(ra, p.rho_index(j + 1, d), -0.5);
      const int rb = base_b + j * m + k;
      trip.emplace_back(rb, p.off_b + j * m + k, 1.0);
      trip.emplace_back(rb, p.rho_index(j, s), -0.5);
      trip.emplace_back(rb, p.rho_index(j + 1, s), -0.5);
      if (symmetric) {
        const int rc = base_c + j * m + k;
        trip.emplace_back(rc, p.v_index(j, k), 1.0);
        trip.emplace_back(rc, p.u_index(j, k), -1.0);
      }
    }
  }

  p.program.constraints.resize(rows, total);
  p.program.constraints.setFromTriplets(trip.begin(), trip.end());
  p.program.rhs = std::move(rhs);

  p.program.cells.reserve(static_cast<size_t>(2) * T * m);
  for (int j = 0; j < T; ++j) {
    for (int k = 0; k < m; ++k) {
      p.program.cells.push_back(
          {p.off_a + j * m + k, p.u_index(j, k), inv_t, !symmetric});
      p.program.cells.push_back(
          {p.off_b + j * m + k, p.v_index(j, k), inv_t, !symmetric});
    }
  }

  // Linear-interpolation start: strictly feasible density path, zero flux.
  Vec x0 = Vec::Zero(total);
  for (int j = 0; j <= T; ++j) {
    const double t = static_cast<double>(j) / T;
    for (int i = 0; i < n; ++i)
      x0[p.rho_index(j, i)] = (1.0 - t) * mu[i] + t * nu[i];
  }
  for (int j = 0; j < T; ++j) {
    for (int k = 0; k < m; ++k) {
      const int s = p.geometry.src[k];
      const int d = p.geometry.dst[k];
      x0[p.off_a + j * m + k] =
          0.5 * (x0[p.rho_index(j, d)] + x0[p.rho_index(j + 1, d)]);
      x0[p.off_b + j * m + k] =
          0.5 * (x0[p.rho_index(j, s)] + x0[p.rho_index(j + 1, s)]);
    }
  }
  p.program.initial = std::move(x0);
  p.projector = std::make_shared<AffineProjector>(p.program.constraints,
                                                  p.program.rhs);
  return p;
}

}  // namespace

MassDistribution make_mass(Vec values) {
  check_mass_vector(values, ErrorCode::MarginalMismatch, "mass distribution");
  return MassDistribution{std::move(values)};
}

MassDistribution uniform_mass(int n) {
  require(n >= 1, ErrorCode::EmptyShape, "need at least one node");
  return MassDistribution{Vec::Constant(n, 1.0 / n)};
}

VectorMass make_vector_mass(const Mat& channel_by_node) {
  VectorMass vm;
  vm.channels = static_cast<int>(channel_by_node.rows());
  vm.nodes = static_cast<int>(channel_by_node.cols());
  vm.values.resize(vm.channels * vm.nodes);
  for (int c = 0; c < vm.channels; ++c)
    vm.values.segment(c * vm.nodes, vm.nodes) =
        channel_by_node.row(c).transpose();
  check_mass_vector(vm.values, ErrorCode::MarginalMismatch, "vector mass");
  return vm;
}

VectorMass make_vector_mass(Vec composite, int channels) {
  require(channels >= 1 && composite.size() % channels == 0,
          ErrorCode::ChannelCountMismatch,
          "composite length is not a multiple of the channel count");
  check_mass_vector(composite, ErrorCode::MarginalMismatch, "vector mass");
  VectorMass vm;
  vm.channels = channels;
  vm.nodes = static_cast<int>(composite.size()) / channels;
  vm.values = std::move(composite);
  return vm;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::AsymmetricGraph: return "asymmetric-graph";
    case Variant::SymmetricGraph: return "symmetric-graph";
    case Variant::AsymmetricLayered: return "asymmetric-layered";
    case Variant::SymmetricLayered: return "symmetric-layered";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "asymmetric-graph") return Variant::AsymmetricGraph;
  if (name == "symmetric-graph") return Variant::SymmetricGraph;
  if (name == "asymmetric-layered") return Variant::AsymmetricLayered;
  if (name == "symmetric-layered") return Variant::SymmetricLayered;
  throw Error(ErrorCode::UnsupportedFormat, "unknown variant: " + name);
}

TransportProblem assemble(Variant variant, const Graph& g,
                          const MassDistribution& mu,
                          const MassDistribution& nu, int n_t,
                          const AssembleOptions& opts) {
  require(variant == Variant::AsymmetricGraph ||
              variant == Variant::SymmetricGraph,
          ErrorCode::MarginalMismatch,
          "layered variants need a LayeredGraph and vector marginals");
  return assemble_impl(variant, g, g.edge_count(), 0, 1, 1.0, n_t, mu.values,
                       nu.values, opts);
}

TransportProblem assemble(Variant variant, const LayeredGraph& lg,
                          const VectorMass& mu, const VectorMass& nu,
                          double gamma, int n_t, const AssembleOptions& opts) {
  require(variant == Variant::AsymmetricLayered ||
              variant == Variant::SymmetricLayered,
          ErrorCode::MarginalMismatch,
          "graph variants need scalar marginals");
  require(gamma > 0.0, ErrorCode::BadGamma, "gamma must be positive");
  require(mu.channels == lg.channels && nu.channels == lg.channels,
          ErrorCode::ChannelCountMismatch,
          "marginal channel count does not match the layered graph");
  return assemble_impl(variant, lg.composite, lg.spatial_edge_count,
                       lg.mutation_edge_count, lg.channels, gamma, n_t,
                       mu.values, nu.values, opts);
}

namespace {

Trajectory extract_trajectory(const TransportProblem& p, const Vec& x,
                              double* nonneg_violation) {
  const int n = p.nodes();
  const int m = p.edges();
  const int T = p.n_t;
  Trajectory traj;
  traj.densities.resize(T + 1, n);
  traj.flux.resize(T, m);
  if (!p.symmetric) traj.flux_bar.resize(T, m);

  double violation = 0.0;
  for (int j = 0; j <= T; ++j)
    for (int i = 0; i < n; ++i) {
      const double v = x[p.rho_index(j, i)];
      violation = std::max(violation, -v);
      traj.densities(j, i) = std::max(v, 0.0);
    }
  for (int j = 0; j < T; ++j)
    for (int k = 0; k < m; ++k) {
      // Back to original flux units (the program solves q' = sqrt(scale) q).
      const double unscale = 1.0 / std::sqrt(p.edge_scale[k]);
      traj.flux(j, k) = unscale * x[p.u_index(j, k)];
      if (!p.symmetric) {
        traj.flux_bar(j, k) = unscale * x[p.v_index(j, k)];
        violation = std::max(violation, -traj.flux(j, k));
        violation = std::max(violation, -traj.flux_bar(j, k));
      }
    }
  if (nonneg_violation) *nonneg_violation = std::max(violation, 0.0);
  return traj;
}

}  // namespace

double trajectory_energy(const TransportProblem& p, const Trajectory& traj,
                         int family, bool include_scale) {
  const int m = p.edges();
  const int first = family == 1 ? p.spatial_edge_count : 0;
  const int last = family == 0 ? p.spatial_edge_count : m;
  double total = 0.0;
  for (int j = 0; j < p.n_t; ++j) {
    for (int k = first; k < last; ++k) {
      const int s = p.geometry.src[k];
      const int d = p.geometry.dst[k];
      const double a =
          0.5 * (traj.densities(j, d) + traj.densities(j + 1, d));
      const double b =
          0.5 * (traj.densities(j, s) + traj.densities(j + 1, s));
      const double u = traj.flux(j, k);
      const double v = p.symmetric ? u : traj.flux_bar(j, k);
      const double scale = include_scale ? p.edge_scale[k] : 1.0;
      total += scale / p.n_t *
               (perspective_value(u, a) + perspective_value(v, b));
    }
  }
  return total;
}

double flux_mass(const TransportProblem& p, const Trajectory& traj,
                 int family) {
  const int m = p.edges();
  const int first = family == 1 ? p.spatial_edge_count : 0;
  const int last = family == 0 ? p.spatial_edge_count : m;
  double total = 0.0;
  for (int j = 0; j < p.n_t; ++j)
    for (int k = first; k < last; ++k) {
      total += std::abs(traj.flux(j, k));
      if (!p.symmetric) total += std::abs(traj.flux_bar(j, k));
    }
  return total / p.n_t;
}

ContinuityReport continuity_residual(const Trajectory& traj,
                                     const TransportProblem& p) {
  const int n = p.nodes();
  const int T = p.n_t;
  require(traj.densities.rows() == T + 1 && traj.densities.cols() == n &&
              traj.flux.rows() == T && traj.flux.cols() == p.edges(),
          ErrorCode::DimensionMismatch, "trajectory does not match problem");
  ContinuityReport rep;
  for (int j = 0; j < T; ++j) {
    Vec net = traj.flux.row(j).transpose();
    if (!p.symmetric) net -= traj.flux_bar.row(j).transpose();
    const Vec step = traj.densities.row(j + 1).transpose() -
                     traj.densities.row(j).transpose() -
                     (1.0 / T) * (p.geometry.div_op * net);
    rep.residual = std::max(rep.residual, step.norm());
  }
  for (int j = 0; j <= T; ++j)
    rep.mass_drift =
        std::max(rep.mass_drift, std::abs(traj.densities.row(j).sum() - 1.0));
  return rep;
}

std::pair<DistanceReport, Trajectory> solve(const TransportProblem& problem,
                                            const SolverConfig& cfg) {
  EngineResult engine =
      run_splitting(problem.program, cfg, problem.projector.get());

  DistanceReport report;
  double violation = 0.0;
  Trajectory traj = extract_trajectory(problem, engine.x, &violation);
  const ContinuityReport cr = continuity_residual(traj, problem);
  // The action is read off the prox iterate: the cell proxes keep fluxes
  // consistent with their denominators, which the raw trajectory cannot
  // guarantee where the mass vanishes.
  report.objective = engine.stats.objective;
  report.value = std::sqrt(std::max(report.objective, 0.0));
  const int m = problem.edges();
  for (size_t c = 0; c < problem.program.cells.size(); ++c) {
    const auto& cell = problem.program.cells[c];
    const double den = engine.prox_point[cell.den];
    const double q = engine.prox_point[cell.flux];
    const double e = den > 0.0 ? cell.scale * q * q / den : 0.0;
    const int k = static_cast<int>(c / 2) % m;
    if (k < problem.spatial_edge_count)
      report.spatial_energy += e;
    else
      report.mutation_energy_base += e / problem.gamma;
  }
  report.continuity_residual = cr.residual;
  report.mass_drift = cr.mass_drift;
  report.nonneg_violation = violation;
  report.rel_obj_change = engine.stats.rel_obj_change;
  report.iterations = engine.stats.iterations;
  report.converged = engine.stats.converged;
  report.wall_time_seconds = engine.stats.wall_time_seconds;
  report.split_residual = engine.stats.split_residual;
  report.operator_norm = engine.stats.operator_norm;
  report.cg_iterations_total = engine.stats.cg_iterations_total;
  return {report, traj};
}

double w2a_max_symmetrized(const Graph& g, const MassDistribution& mu,
                           const MassDistribution& nu, int n_t,
                           const SolverConfig& cfg) {
  const auto forward =
      solve(assemble(Variant::AsymmetricGraph, g, mu, nu, n_t), cfg);
  const auto backward =
      solve(assemble(Variant::AsymmetricGraph, g, nu, mu, n_t), cfg);
  return std::max(forward.first.value, backward.first.value);
}

namespace {

Vec slice_marginal(const Trajectory& traj, int index) {
  Vec v = traj.densities.row(index).transpose().cwiseMax(0.0);
  const double s = v.sum();
  require(s > 0.0, ErrorCode::MarginalMismatch, "empty trajectory slice");
  return v / s;
}

}  // namespace

double geodesic_deviation(const Trajectory& traj,
                          const TransportProblem& problem,
                          const SolverConfig& cfg) {
  const int T = problem.n_t;
  auto distance_between = [&](int si, int ti) {
    TransportProblem sub =
        assemble_impl(problem.variant, problem.geometry,
                      problem.spatial_edge_count, problem.mutation_edge_count,
                      problem.channels, problem.gamma, T,
                      slice_marginal(traj, si), slice_marginal(traj, ti),
                      AssembleOptions{});
    return solve(sub, cfg).first.value;
  };

  const double full = distance_between(0, T);
  if (full <= 1e-12) return 0.0;

  const std::pair<int, int> pairs[] = {
      {0, T / 2}, {T / 2, T}, {T / 4, (3 * T) / 4}};
  double worst = 0.0;
  for (const auto& [si, ti] : pairs) {
    const double span = static_cast<double>(ti - si) / T;
    const double sub = distance_between(si, ti);
    worst = std::max(worst, std::abs(sub - span * full) / full);
  }
  return worst;
}

}  // namespace vvot
