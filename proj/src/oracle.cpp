#include "vvot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace vvot {
namespace oracle {

KantorovichResult static_kantorovich(const Mat& cost, const Vec& mu,
                                     const Vec& nu) {
  const int n1 = static_cast<int>(mu.size());
  const int n2 = static_cast<int>(nu.size());
  require(n1 <= 64 && n2 <= 64, ErrorCode::ScaleExceeded,
          "static Kantorovich oracle is limited to 64 x 64");
  require(cost.rows() == n1 && cost.cols() == n2,
          ErrorCode::DimensionMismatch, "cost matrix shape mismatch");
  require(cost.minCoeff() >= 0.0, ErrorCode::DimensionMismatch,
          "costs must be nonnegative");
  require(mu.minCoeff() >= 0.0 && nu.minCoeff() >= 0.0,
          ErrorCode::MassMismatch, "marginals must be nonnegative");
  require(std::abs(mu.sum() - nu.sum()) <= 1e-10 * std::max(1.0, mu.sum()),
          ErrorCode::MassMismatch, "total masses differ");

  // Successive shortest augmenting paths with Johnson potentials. Each
  // augmentation exhausts a supply or a demand, so at most n1 + n2 rounds.
  // Reduced costs: forward arc i->j carries cost(i,j) + pi_l[i] - pi_r[j],
  // residual arc j->i its negative; both stay nonnegative under the
  // distance-capped potential update below.
  Vec supply = mu, demand = nu;
  Mat plan = Mat::Zero(n1, n2);
  Vec pi_l = Vec::Zero(n1), pi_r = Vec::Zero(n2);
  const double inf = std::numeric_limits<double>::infinity();
  const double tiny = 1e-15;

  for (;;) {
    if (supply.maxCoeff() <= tiny) break;
    // Multi-source Dijkstra from every remaining supply over the residual
    // graph with reduced costs.
    Vec dist_left = Vec::Constant(n1, inf), dist_right = Vec::Constant(n2, inf);
    std::vector<int> parent_right(n2, -1), parent_left(n1, -1);
    std::vector<char> done_left(n1, 0), done_right(n2, 0);
    using Item = std::pair<double, int>;  // (distance, node); right nodes
                                          // are offset by n1
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    for (int i = 0; i < n1; ++i)
      if (supply[i] > tiny) {
        dist_left[i] = 0.0;
        heap.push({0.0, i});
      }
    int sink = -1;
    double sink_dist = inf;
    while (!heap.empty()) {
      auto [d, node] = heap.top();
      heap.pop();
      if (node < n1) {
        const int i = node;
        if (done_left[i] || d > dist_left[i]) continue;
        done_left[i] = 1;
        for (int j = 0; j < n2; ++j) {
          const double rc =
              std::max(cost(i, j) + pi_l[i] - pi_r[j], 0.0);
          if (dist_left[i] + rc < dist_right[j] - 1e-18) {
            dist_right[j] = dist_left[i] + rc;
            parent_right[j] = i;
            heap.push({dist_right[j], n1 + j});
          }
        }
      } else {
        const int j = node - n1;
        if (done_right[j] || d > dist_right[j]) continue;
        done_right[j] = 1;
        if (demand[j] > tiny) {
          sink = j;
          sink_dist = d;
          break;
        }
        for (int i = 0; i < n1; ++i) {
          if (plan(i, j) <= tiny) continue;  // residual arc j -> i
          const double rc =
              std::max(-(cost(i, j) + pi_l[i] - pi_r[j]), 0.0);
          if (dist_right[j] + rc < dist_left[i] - 1e-18) {
            dist_left[i] = dist_right[j] + rc;
            parent_left[i] = j;
            heap.push({dist_left[i], i});
          }
        }
      }
    }
    require(sink >= 0, ErrorCode::Infeasible,
            "no augmenting path (inconsistent marginals)");

    // Trace the path back and find the bottleneck.
    double amount = demand[sink];
    for (int j = sink;;) {
      const int i = parent_right[j];
      const int pj = parent_left[i];
      if (pj < 0) {
        amount = std::min(amount, supply[i]);
        break;
      }
      amount = std::min(amount, plan(i, pj));
      j = pj;
    }
    for (int j = sink;;) {
      const int i = parent_right[j];
      plan(i, j) += amount;
      const int pj = parent_left[i];
      if (pj < 0) {
        supply[i] -= amount;
        break;
      }
      plan(i, pj) -= amount;
      j = pj;
    }
    demand[sink] -= amount;

    // pi += min(dist, dist(sink)) keeps every residual reduced cost
    // nonnegative despite the early Dijkstra exit.
    for (int i = 0; i < n1; ++i) pi_l[i] += std::min(dist_left[i], sink_dist);
    for (int j = 0; j < n2; ++j) pi_r[j] += std::min(dist_right[j], sink_dist);
  }

  KantorovichResult result;
  result.coupling = plan;
  result.value = (cost.array() * plan.array()).sum();
  return result;
}

namespace {

struct DenseAction {
  // Re-derived dense description of the discrete action, independent of the
  // solver's auxiliary-variable splitting.
  int n, m, T;
  bool symmetric;
  int off_u, off_v, total;
  Vec scale;  // per edge (1 or gamma)
  Eigen::VectorXi src, dst;
  double eps;

  int rho_idx(int t, int i) const { return t * n + i; }

  double value_and_grad(const TransportProblem& p, const Vec& x,
                        Vec* grad) const {
    if (grad) grad->setZero();
    double total_e = 0.0;
    for (int j = 0; j < T; ++j)
      for (int k = 0; k < m; ++k) {
        const int s = src[k], d = dst[k];
        const double a =
            0.5 * (x[rho_idx(j, d)] + x[rho_idx(j + 1, d)]) + eps;
        const double b =
            0.5 * (x[rho_idx(j, s)] + x[rho_idx(j + 1, s)]) + eps;
        if (a <= 0.0 || b <= 0.0)
          return std::numeric_limits<double>::infinity();
        const double u = x[off_u + j * m + k];
        const double v = symmetric ? u : x[off_v + j * m + k];
        const double w = scale[k] / T;
        total_e += w * (u * u / a + v * v / b);
        if (grad) {
          (*grad)[off_u + j * m + k] += 2.0 * w * u / a;
          if (symmetric)
            (*grad)[off_u + j * m + k] += 2.0 * w * u / b;
          else
            (*grad)[off_v + j * m + k] += 2.0 * w * v / b;
          const double da = -w * u * u / (a * a) * 0.5;
          const double db = -w * v * v / (b * b) * 0.5;
          (*grad)[rho_idx(j, d)] += da;
          (*grad)[rho_idx(j + 1, d)] += da;
          (*grad)[rho_idx(j, s)] += db;
          (*grad)[rho_idx(j + 1, s)] += db;
        }
      }
    return total_e;
  }
};

}  // namespace

SmoothedSolveResult smoothed_dynamic_solve(const TransportProblem& p,
                                           double eps, int max_iters) {
  require(eps >= 1e-9 && eps <= 1e-5, ErrorCode::ScaleExceeded,
          "eps outside the supported smoothing range");
  DenseAction act;
  act.n = p.nodes();
  act.m = p.edges();
  act.T = p.n_t;
  act.symmetric = p.symmetric;
  act.off_u = (act.T + 1) * act.n;
  act.off_v = act.off_u + act.T * act.m;
  act.total = act.symmetric ? act.off_v : act.off_v + act.T * act.m;
  act.scale = p.edge_scale;
  act.src = p.geometry.src;
  act.dst = p.geometry.dst;
  act.eps = eps;
  require(act.total <= 5000, ErrorCode::ScaleExceeded,
          "smoothed oracle is limited to 5000 unknowns");

  // Dense constraints: continuity in original weights plus both boundary
  // slices (redundant rows are fine for the least-squares projector).
  const int rows = act.T * act.n + 2 * act.n;
  Mat a = Mat::Zero(rows, act.total);
  Vec b = Vec::Zero(rows);
  for (int j = 0; j < act.T; ++j) {
    for (int i = 0; i < act.n; ++i) {
      a(j * act.n + i, act.rho_idx(j + 1, i)) = 1.0;
      a(j * act.n + i, act.rho_idx(j, i)) = -1.0;
    }
    for (int k = 0; k < act.m; ++k) {
      const double sw = std::sqrt(p.geometry.weights[k]) / act.T;
      a(j * act.n + act.src[k], act.off_u + j * act.m + k) -= sw;
      a(j * act.n + act.dst[k], act.off_u + j * act.m + k) += sw;
      if (!act.symmetric) {
        a(j * act.n + act.src[k], act.off_v + j * act.m + k) += sw;
        a(j * act.n + act.dst[k], act.off_v + j * act.m + k) -= sw;
      }
    }
  }
  for (int i = 0; i < act.n; ++i) {
    a(act.T * act.n + i, act.rho_idx(0, i)) = 1.0;
    b[act.T * act.n + i] = p.mu[i];
    a(act.T * act.n + act.n + i, act.rho_idx(act.T, i)) = 1.0;
    b[act.T * act.n + act.n + i] = p.nu[i];
  }

  const auto cod = a.completeOrthogonalDecomposition();
  auto project_affine = [&](const Vec& x) -> Vec {
    return x - cod.solve((a * x - b).eval());
  };
  auto clip = [&](Vec x) -> Vec {
    if (!act.symmetric)
      x.tail(2 * act.T * act.m) = x.tail(2 * act.T * act.m).cwiseMax(0.0);
    return x;
  };
  auto project = [&](Vec x) -> Vec {
    if (act.symmetric) return project_affine(x);
    // Dykstra between the affine set and the flux orthant.
    Vec pinc = Vec::Zero(x.size()), qinc = Vec::Zero(x.size());
    for (int it = 0; it < 400; ++it) {
      const Vec y = project_affine(x + pinc);
      pinc = x + pinc - y;
      const Vec x_next = clip(y + qinc);
      qinc = y + qinc - x_next;
      if ((x_next - x).lpNorm<Eigen::Infinity>() < 1e-13) {
        x = x_next;
        break;
      }
      x = x_next;
    }
    return x;
  };

  // Start on the linear density path, then plain projected gradient with
  // adaptive step and monotone acceptance.
  Vec x = Vec::Zero(act.total);
  for (int j = 0; j <= act.T; ++j) {
    const double t = static_cast<double>(j) / act.T;
    for (int i = 0; i < act.n; ++i)
      x[act.rho_idx(j, i)] = (1.0 - t) * p.mu[i] + t * p.nu[i];
  }
  x = project(x);

  Vec grad(act.total);
  double fx = act.value_and_grad(p, x, &grad);
  double step = 1.0;
  SmoothedSolveResult result;
  int it = 0;
  for (; it < max_iters; ++it) {
    const Vec candidate_dir = x - step * grad;
    Vec x_next = project(candidate_dir);
    double f_next = act.value_and_grad(p, x_next, nullptr);
    int backtracks = 0;
    while (!(f_next <= fx - 1e-14 * std::abs(fx)) && backtracks < 60) {
      step *= 0.5;
      x_next = project(x - step * grad);
      f_next = act.value_and_grad(p, x_next, nullptr);
      ++backtracks;
    }
    const double move = (x_next - x).norm();
    if (backtracks == 60 || move <= 1e-12 * (1.0 + x.norm())) {
      x = x_next;
      fx = std::min(fx, f_next);
      break;
    }
    x = x_next;
    fx = act.value_and_grad(p, x, &grad);
    if (backtracks == 0) step *= 1.3;
  }
  result.iterations = it;
  result.value = fx;
  Vec g(act.total);
  act.value_and_grad(p, x, &g);
  result.grad_norm = (x - project(x - g)).norm();
  // eps-bias bound: d/d(eps) of the smoothed action is -sum q^2/(den+eps)^2.
  double sensitivity = 0.0;
  for (int j = 0; j < act.T; ++j)
    for (int k = 0; k < act.m; ++k) {
      const int s = act.src[k], d = act.dst[k];
      const double aden =
          0.5 * (x[act.rho_idx(j, d)] + x[act.rho_idx(j + 1, d)]) + eps;
      const double bden =
          0.5 * (x[act.rho_idx(j, s)] + x[act.rho_idx(j + 1, s)]) + eps;
      const double u = x[act.off_u + j * act.m + k];
      const double v = act.symmetric ? u : x[act.off_v + j * act.m + k];
      sensitivity += act.scale[k] / act.T *
                     (u * u / (aden * aden) + v * v / (bden * bden));
    }
  result.bias_bound = eps * sensitivity;
  return result;
}

Vec dense_projection(const Vec& x, const Mat& a, const Vec& b) {
  require(a.rows() <= 2000, ErrorCode::ScaleExceeded,
          "dense projection oracle is limited to 2000 rows");
  require(a.cols() == x.size() && a.rows() == b.size(),
          ErrorCode::DimensionMismatch, "projection shapes mismatch");
  const Vec residual = a * x - b;
  return x - a.completeOrthogonalDecomposition().solve(residual);
}

}  // namespace oracle
}  // namespace vvot
