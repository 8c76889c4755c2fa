#pragma once

#include <memory>
#include <string>

#include "vvot/graph.hpp"
#include "vvot/solver.hpp"
#include "vvot/types.hpp"

namespace vvot {

/// Nonnegative node masses summing to one (checked to 1e-12).
struct MassDistribution {
  Vec values;
};

MassDistribution make_mass(Vec values);
MassDistribution uniform_mass(int n);

/// Vector-valued mass: nonnegative (channel, node) entries with joint sum
/// one. Stored channel-major, composite index = channel * nodes + node,
/// matching the layered-product node layout.
struct VectorMass {
  Vec values;
  int channels = 1;
  int nodes = 0;

  double operator()(int channel, int node) const {
    return values[channel * nodes + node];
  }
};

VectorMass make_vector_mass(const Mat& channel_by_node);
VectorMass make_vector_mass(Vec composite, int channels);

enum class Variant {
  AsymmetricGraph,
  SymmetricGraph,
  AsymmetricLayered,
  SymmetricLayered,
};

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct AssembleOptions {
  // Optional conditioning preprocessor rho <- (1-eps) rho + eps uniform
  // applied to both marginals; disabled by default.
  bool eps_mix = false;
  double eps_mix_value = 1e-9;
};

/// Fully assembled momentum-form transport program on a staggered time
/// grid: densities live at times j/n_t, fluxes at midpoints (j+1/2)/n_t,
/// boundary rows pin rho(0) and rho(1), and each midpoint edge carries
/// quadratic-over-linear energy cells weighted by the time-averaged
/// source/sink densities. Asymmetric variants keep two sign-constrained
/// flux families; symmetric variants keep one free flux with the combined
/// source+sink mobility. Immutable after assembly.
struct TransportProblem {
  Variant variant = Variant::SymmetricGraph;
  Graph geometry;  // composite graph for layered variants
  int spatial_edge_count = 0;
  int mutation_edge_count = 0;
  int channels = 1;
  double gamma = 1.0;
  int n_t = 0;
  Vec mu, nu;
  Vec edge_scale;  // energy scale per edge (1 or gamma)
  bool symmetric = true;

  SplitProgram program;
  std::shared_ptr<const AffineProjector> projector;

  int nodes() const { return geometry.n; }
  int edges() const { return geometry.edge_count(); }

  // Variable layout inside the stacked vector.
  int off_rho = 0, off_u = 0, off_v = 0, off_a = 0, off_b = 0;
  int rho_index(int t, int i) const { return off_rho + t * nodes() + i; }
  int u_index(int j, int k) const { return off_u + j * edges() + k; }
  int v_index(int j, int k) const { return off_v + j * edges() + k; }
};

TransportProblem assemble(Variant variant, const Graph& g,
                          const MassDistribution& mu,
                          const MassDistribution& nu, int n_t,
                          const AssembleOptions& opts = {});

TransportProblem assemble(Variant variant, const LayeredGraph& lg,
                          const VectorMass& mu, const VectorMass& nu,
                          double gamma, int n_t,
                          const AssembleOptions& opts = {});

/// Time-indexed densities plus interleaved midpoint fluxes. flux_bar is
/// empty for symmetric variants.
struct Trajectory {
  Mat densities;  // (n_t + 1) x nodes
  Mat flux;       // n_t x edges
  Mat flux_bar;   // n_t x edges, asymmetric variants only
};

struct DistanceReport {
  double value = 0.0;      // sqrt of the optimal discrete action
  double objective = 0.0;  // the action itself
  double continuity_residual = 0.0;
  double mass_drift = 0.0;
  double nonneg_violation = 0.0;
  double rel_obj_change = 0.0;
  int iterations = 0;
  bool converged = true;
  double wall_time_seconds = 0.0;
  // Energy split by edge family; objective = spatial + gamma * mutation_base.
  double spatial_energy = 0.0;
  double mutation_energy_base = 0.0;
  // Solver internals, carried through to manifests.
  double split_residual = 0.0;
  double operator_norm = 0.0;
  long cg_iterations_total = 0;
};

std::pair<DistanceReport, Trajectory> solve(const TransportProblem& problem,
                                            const SolverConfig& cfg = {});

/// max{W(mu,nu), W(nu,mu)} with the asymmetric program; symmetric by
/// construction.
double w2a_max_symmetrized(const Graph& g, const MassDistribution& mu,
                           const MassDistribution& nu, int n_t,
                           const SolverConfig& cfg = {});

struct ContinuityReport {
  double residual = 0.0;    // max over steps of |drho - div(flux)/n_t|_2
  double mass_drift = 0.0;  // max over slices of |total mass - 1|
};

ContinuityReport continuity_residual(const Trajectory& traj,
                                     const TransportProblem& problem);

/// Re-solves between trajectory slices at the pairs (0,1/2), (1/2,1),
/// (1/4,3/4) and returns max |W(rho_s, rho_t) - (t-s) W(mu,nu)| / W(mu,nu).
double geodesic_deviation(const Trajectory& traj,
                          const TransportProblem& problem,
                          const SolverConfig& cfg = {});

/// Discrete action of a trajectory evaluated from its densities (not the
/// solver's auxiliary variables). family: 0 spatial, 1 mutation, -1 both.
/// include_scale controls whether per-edge energy scales (gamma) multiply.
double trajectory_energy(const TransportProblem& problem,
                         const Trajectory& traj, int family = -1,
                         bool include_scale = true);

/// Time-integrated absolute flux over an edge family (1/n_t sum |u|).
double flux_mass(const TransportProblem& problem, const Trajectory& traj,
                 int family);

}  // namespace vvot
