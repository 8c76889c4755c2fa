#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vvot/types.hpp"

namespace vvot {

/// One quadratic-over-linear energy term scale * q^2 / rho acting on a
/// (denominator, flux) coordinate pair of the stacked variable vector,
/// with the perspective convention 0^2/0 = 0, q^2/0 = +inf for q != 0.
struct PerspectiveCell {
  int den;      // index of the denominator coordinate
  int flux;     // index of the flux coordinate
  double scale; // > 0
  bool nonneg_flux = false;
};

/// Linear cost term cost * x + indicator(x >= 0) on a single coordinate.
struct LinearCell {
  int index;
  double cost;
};

/// min  sum of cells  s.t.  constraints * x = rhs.
/// Coordinates not referenced by any cell are free (prox = identity).
struct SplitProgram {
  SpMat constraints;  // full row rank
  Vec rhs;
  std::vector<PerspectiveCell> cells;
  std::vector<LinearCell> linear_cells;
  Vec initial;  // starting point, ideally feasible
};

struct SolverConfig {
  int max_iters = 20000;
  // Prox step; 0 selects an automatic value from the problem scales. The
  // dual step pairs with tau under the product rule sigma = 1/(tau*|K|^2)
  // when a norm estimate is available; 0 keeps it implicit.
  double tau = 0.0;
  double sigma = 0.0;
  double relaxation = 1.8;  // in (0, 2)
  double feasibility_tol = 1e-6;
  double rel_obj_tol = 1e-7;
  int obj_window = 50;
  double cg_tol = 1e-11;
  int cg_max_iters = 2000;
  std::uint64_t seed = 20240501;  // operator-norm power iteration only
};

struct SolveStats {
  int iterations = 0;
  double objective = 0.0;
  double split_residual = 0.0;   // |prox iterate - projected iterate|_inf
  double rel_obj_change = 0.0;   // over the trailing window
  bool converged = false;
  double operator_norm = 0.0;    // power-iteration estimate of |A|
  long cg_iterations_total = 0;
  double wall_time_seconds = 0.0;
  std::vector<double> energy_trace;  // decimated objective values
};

struct ProxPerspectiveResult {
  double rho;
  Vec q;
};

/// Proximal map of (rho, q) -> a * sum_i q_i^2 / rho over rho >= 0 with
/// prox step tau: the returned rho is the unique nonnegative root of
/// (rho - rho_bar)(rho + 2 a tau)^2 = a tau |q_bar|^2 (safeguarded
/// Newton/bisection to 1e-12) and q_i = rho q_bar_i / (rho + 2 a tau);
/// when the minimizer has rho = 0 the flux is zeroed too.
ProxPerspectiveResult prox_perspective(double rho_bar, const Vec& q_bar,
                                       double tau, double a);

/// Scalar-flux fast path of prox_perspective.
void prox_perspective1(double rho_bar, double q_bar, double tau, double a,
                       double& rho_out, double& q_out);

/// Euclidean projection onto {x : A x = b} through the normal equations
/// A A^T lambda = A x - b. The Auto backend caches a sparse Cholesky
/// factorization of A A^T when it succeeds (the time-banded systems here
/// factor cheaply); ConjugateGradient forces the preconditioned iterative
/// path, which also serves as the fallback.
class AffineProjector {
 public:
  enum class Backend { Auto, ConjugateGradient };

  AffineProjector(SpMat constraints, Vec rhs, Backend backend = Backend::Auto);

  /// Projects x; |A x' - b| <= tol * (1 + |b|) on return or CGStall is
  /// thrown. Warm starts from the previous call's multipliers.
  Vec project(const Vec& x, double tol, int max_iters) const;

  /// Multipliers lambda of the most recent projection (A A^T lambda = Ax-b).
  const Vec& last_multipliers() const { return lambda_; }

  const SpMat& constraints() const { return a_; }
  const Vec& rhs() const { return b_; }
  long cg_iterations_total() const { return cg_total_; }

 private:
  SpMat a_;
  SpMat at_;
  SpMat normal_;  // A A^T
  Vec b_;
  mutable Vec lambda_;
  mutable long cg_total_ = 0;
  struct Pcg;
  std::shared_ptr<Pcg> pcg_;
};

/// Power-iteration estimate of the spectral norm of A (deterministic for a
/// fixed seed).
double operator_norm_estimate(const SpMat& a, std::uint64_t seed,
                              int iterations = 30);

/// Objective of the program at x using the perspective convention; negative
/// denominators are treated as zero.
double split_objective(const SplitProgram& p, const Vec& x);

struct EngineResult {
  Vec x;           // feasible iterate (projected)
  Vec prox_point;  // last prox output; objectives are stable here because
                   // the cell proxes keep fluxes consistent with their
                   // denominators near zero mass
  SolveStats stats;
};

/// Invoked periodically with the current feasible iterate, the prox point,
/// the projector (for multiplier access) and the prox step; returning true
/// stops the iteration as converged.
using StopCallback = std::function<bool(int iter, const Vec& feasible,
                                        const Vec& prox_point,
                                        const AffineProjector& projector,
                                        double tau)>;

/// Douglas-Rachford splitting between the separable cell energies and the
/// affine constraint set: project first, then prox the reflection, then
/// relax. Stops when the splitting residual and the windowed relative
/// objective change both pass their tolerances, or when the callback
/// certifies convergence.
EngineResult run_splitting(const SplitProgram& program, const SolverConfig& cfg,
                           const AffineProjector* projector = nullptr,
                           const StopCallback& stop = {});

}  // namespace vvot
