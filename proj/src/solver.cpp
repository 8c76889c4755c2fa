#include "vvot/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace vvot {

namespace {

// Unique nonnegative root of (rho - rho_bar)(rho + 2 a tau)^2 = a tau |q|^2.
// The left side is increasing on [max(rho_bar, 0), inf), so a bracket plus
// Newton with bisection fallback is safe.
double perspective_root(double rho_bar, double qsq, double tau, double a) {
  const double c = 2.0 * a * tau;
  const double rhs = a * tau * qsq;
  auto g = [&](double r) {
    const double t = r + c;
    return (r - rho_bar) * t * t - rhs;
  };
  double lo = std::max(rho_bar, 0.0);
  if (g(lo) >= 0.0) return lo;  // only at rhs == 0 boundary cases
  double step = std::max(std::cbrt(rhs), 1e-16);
  double hi = lo + step;
  int guard = 0;
  while (g(hi) < 0.0) {
    step *= 2.0;
    hi = lo + step;
    if (++guard > 200)
      throw Error(ErrorCode::NonconvergentRootFind,
                  "perspective prox bracket expansion failed");
  }
  double r = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double t = r + c;
    const double val = (r - rho_bar) * t * t - rhs;
    if (val > 0.0)
      hi = r;
    else
      lo = r;
    const double deriv = t * t + 2.0 * (r - rho_bar) * t;
    double next = deriv > 0.0 ? r - val / deriv : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - r) <= 1e-12 * std::max(1.0, std::abs(next))) {
      return next;
    }
    r = next;
  }
  throw Error(ErrorCode::NonconvergentRootFind,
              "perspective prox root find did not converge");
}

}  // namespace

void prox_perspective1(double rho_bar, double q_bar, double tau, double a,
                       double& rho_out, double& q_out) {
  const double qsq = q_bar * q_bar;
  if (qsq == 0.0) {
    rho_out = std::max(rho_bar, 0.0);
    q_out = 0.0;
    return;
  }
  // The minimizer sits at rho = 0 when 4 a tau (-rho_bar) >= |q|^2.
  if (rho_bar < 0.0 && 4.0 * a * tau * (-rho_bar) >= qsq) {
    rho_out = 0.0;
    q_out = 0.0;
    return;
  }
  const double r = perspective_root(rho_bar, qsq, tau, a);
  rho_out = r;
  q_out = r > 0.0 ? r * q_bar / (r + 2.0 * a * tau) : 0.0;
}

ProxPerspectiveResult prox_perspective(double rho_bar, const Vec& q_bar,
                                       double tau, double a) {
  require(tau > 0.0 && a > 0.0, ErrorCode::DimensionMismatch,
          "prox_perspective needs tau > 0 and a > 0");
  ProxPerspectiveResult out;
  const double qsq = q_bar.squaredNorm();
  if (qsq == 0.0) {
    out.rho = std::max(rho_bar, 0.0);
    out.q = Vec::Zero(q_bar.size());
    return out;
  }
  if (rho_bar < 0.0 && 4.0 * a * tau * (-rho_bar) >= qsq) {
    out.rho = 0.0;
    out.q = Vec::Zero(q_bar.size());
    return out;
  }
  const double r = perspective_root(rho_bar, qsq, tau, a);
  out.rho = r;
  out.q = r > 0.0 ? Vec(r / (r + 2.0 * a * tau) * q_bar)
                  : Vec(Vec::Zero(q_bar.size()));
  return out;
}

struct AffineProjector::Pcg {
  Eigen::IncompleteCholesky<double, Eigen::Lower, Eigen::AMDOrdering<int>> ic;
  bool ic_ok = false;
  Vec inv_diag;
  Eigen::SimplicialLDLT<SpMat> direct;
  bool direct_ok = false;
};

AffineProjector::AffineProjector(SpMat constraints, Vec rhs, Backend backend)
    : a_(std::move(constraints)), b_(std::move(rhs)) {
  a_.makeCompressed();
  at_ = a_.transpose();
  normal_ = (a_ * at_).pruned();
  normal_.makeCompressed();
  lambda_ = Vec::Zero(a_.rows());
  pcg_ = std::make_shared<Pcg>();
  if (backend != Backend::ConjugateGradient) {
    pcg_->direct.compute(normal_);
    pcg_->direct_ok = pcg_->direct.info() == Eigen::Success;
  }
  if (!pcg_->direct_ok) {
    pcg_->ic.setInitialShift(1e-10);
    pcg_->ic.compute(normal_);
    pcg_->ic_ok = pcg_->ic.info() == Eigen::Success;
    if (!pcg_->ic_ok)
      pcg_->inv_diag = normal_.diagonal().cwiseMax(1e-300).cwiseInverse();
  }
}

Vec AffineProjector::project(const Vec& x, double tol, int max_iters) const {
  require(x.size() == a_.cols(), ErrorCode::DimensionMismatch,
          "projection input has wrong length");
  const double target = tol * (1.0 + b_.norm());
  if (pcg_->direct_ok) {
    lambda_ = pcg_->direct.solve(a_ * x - b_);
    Vec projected = x - at_ * lambda_;
    // One refinement pass keeps the residual at roundoff level.
    const Vec r = a_ * projected - b_;
    if (r.norm() > target) {
      lambda_ += pcg_->direct.solve(r);
      projected = x - at_ * lambda_;
    }
    return projected;
  }

  Vec residual = a_ * x - b_;
  residual.noalias() -= normal_ * lambda_;  // warm start
  double rnorm = residual.norm();
  if (rnorm <= target) return x - at_ * lambda_;

  auto precond = [&](const Vec& r) -> Vec {
    return pcg_->ic_ok ? Vec(pcg_->ic.solve(r))
                       : Vec(pcg_->inv_diag.cwiseProduct(r));
  };

  Vec z = precond(residual);
  Vec p = z;
  double rz = residual.dot(z);
  double best = rnorm;
  int since_improvement = 0;
  for (int it = 0; it < max_iters; ++it) {
    const Vec ap = normal_ * p;
    const double pap = p.dot(ap);
    if (pap <= 0.0) break;  // numerical loss of definiteness
    const double alpha = rz / pap;
    lambda_ += alpha * p;
    residual -= alpha * ap;
    rnorm = residual.norm();
    ++cg_total_;
    if (rnorm <= target) break;
    if (rnorm < 0.5 * best) {
      best = rnorm;
      since_improvement = 0;
    } else if (++since_improvement > 250) {
      break;  // plateau
    }
    z = precond(residual);
    const double rz_next = residual.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  if (rnorm > target) {
    const Vec r2 = (a_ * x - b_) - normal_ * lambda_;
    if (r2.norm() > 100.0 * target)
      throw Error(ErrorCode::CGStall,
                  "projection CG stalled at residual " +
                      std::to_string(r2.norm()) + " (target " +
                      std::to_string(target) + ")");
  }
  return x - at_ * lambda_;
}

double operator_norm_estimate(const SpMat& a, std::uint64_t seed,
                              int iterations) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(a.cols());
  for (int i = 0; i < v.size(); ++i) v[i] = gauss(rng);
  v.normalize();
  const SpMat at = a.transpose();
  double norm_sq = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec w = at * (a * v).eval();
    norm_sq = w.norm();
    if (norm_sq == 0.0) return 0.0;
    v = w / norm_sq;
  }
  return std::sqrt(norm_sq);
}

double split_objective(const SplitProgram& p, const Vec& x) {
  double total = 0.0;
  for (const auto& cell : p.cells) {
    const double den = x[cell.den];
    const double q = x[cell.flux];
    if (den > 0.0) {
      total += cell.scale * q * q / den;
    } else if (q * q > 1e-24) {
      return std::numeric_limits<double>::infinity();
    }
  }
  for (const auto& cell : p.linear_cells)
    total += cell.cost * std::max(x[cell.index], 0.0);
  return total;
}

namespace {

double auto_tau(const SplitProgram& p) {
  if (!p.cells.empty()) {
    // Mass-weighted mean of the initial denominators balances the prox
    // shrinkage around the cells that actually carry mass.
    double sum = 0.0, sum_sq = 0.0, scale_sum = 0.0;
    for (const auto& cell : p.cells) {
      const double d = std::max(p.initial[cell.den], 0.0);
      sum += d;
      sum_sq += d * d;
      scale_sum += cell.scale;
    }
    const double weighted_mean = sum > 0.0 ? sum_sq / sum : 1e-8;
    const double mean_scale = std::max(scale_sum / p.cells.size(), 1e-12);
    return 0.125 * weighted_mean / mean_scale;
  }
  if (!p.linear_cells.empty()) {
    std::vector<double> costs;
    costs.reserve(p.linear_cells.size());
    for (const auto& cell : p.linear_cells) costs.push_back(cell.cost);
    std::nth_element(costs.begin(), costs.begin() + costs.size() / 2,
                     costs.end());
    return 0.1 / std::max(costs[costs.size() / 2], 1e-12);
  }
  return 1.0;
}

void apply_prox(const SplitProgram& p, double tau, const Vec& in, Vec& out) {
  out = in;
  for (const auto& cell : p.cells) {
    const double rho_bar = in[cell.den];
    const double q_bar = in[cell.flux];
    double rho, q;
    if (cell.nonneg_flux && q_bar <= 0.0) {
      rho = std::max(rho_bar, 0.0);
      q = 0.0;
    } else {
      prox_perspective1(rho_bar, q_bar, tau, cell.scale, rho, q);
    }
    out[cell.den] = rho;
    out[cell.flux] = q;
  }
  for (const auto& cell : p.linear_cells)
    out[cell.index] = std::max(in[cell.index] - tau * cell.cost, 0.0);
}

}  // namespace

EngineResult run_splitting(const SplitProgram& program, const SolverConfig& cfg,
                           const AffineProjector* external_projector,
                           const StopCallback& stop) {
  const auto start = std::chrono::steady_clock::now();
  std::unique_ptr<AffineProjector> owned;
  const AffineProjector* proj = external_projector;
  if (!proj) {
    owned = std::make_unique<AffineProjector>(program.constraints, program.rhs);
    proj = owned.get();
  }

  EngineResult result;
  result.stats.operator_norm =
      operator_norm_estimate(program.constraints, cfg.seed);
  const double tau = cfg.tau > 0.0 ? cfg.tau : auto_tau(program);

  Vec z = program.initial;
  Vec x = proj->project(z, cfg.cg_tol, cfg.cg_max_iters);
  Vec w = x;
  const int trace_stride = std::max(1, cfg.max_iters / 500);
  std::vector<double> window;
  window.reserve(static_cast<size_t>(cfg.max_iters) + 1);

  double prox_objective = split_objective(program, x);
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    apply_prox(program, tau, 2.0 * x - z, w);
    const double split_res = (w - x).lpNorm<Eigen::Infinity>();
    prox_objective = split_objective(program, w);
    window.push_back(prox_objective);
    if (it % trace_stride == 0)
      result.stats.energy_trace.push_back(prox_objective);
    result.stats.split_residual = split_res;

    const int back = std::min<int>(cfg.obj_window, it);
    const double prev = window[it - back];
    const double rel_change =
        std::abs(prox_objective - prev) / std::max(1.0, std::abs(prox_objective));
    result.stats.rel_obj_change = rel_change;
    const bool tolerances_met =
        cfg.feasibility_tol > 0.0 &&
        split_res <= cfg.feasibility_tol * (1.0 + x.lpNorm<Eigen::Infinity>()) &&
        rel_change <= cfg.rel_obj_tol;
    const bool certified = stop && stop(it, x, w, *proj, tau);
    if (tolerances_met || certified) {
      result.stats.converged = true;
      ++it;
      break;
    }
    z += cfg.relaxation * (w - x);
    x = proj->project(z, cfg.cg_tol, cfg.cg_max_iters);
  }
  result.stats.iterations = it;
  // Tightened final projection so the returned iterate is cleanly feasible.
  result.x = proj->project(x, 0.1 * cfg.cg_tol, 4 * cfg.cg_max_iters);
  result.prox_point = std::move(w);
  result.stats.objective = prox_objective;
  result.stats.cg_iterations_total = proj->cg_iterations_total();
  result.stats.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

}  // namespace vvot
