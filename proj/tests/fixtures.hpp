#pragma once

#include <random>
#include <tuple>
#include <vector>

#include "vvot/graph.hpp"
#include "vvot/transport.hpp"

namespace vvot::testing {

// Random connected graph: a spanning tree plus a few extra edges.
inline Graph random_graph(std::mt19937& rng, int n, double extra_edge_prob = 0.3) {
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> parent(0, i - 1);
    edges.emplace_back(parent(rng), i, weight(rng));
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      bool present = false;
      for (const auto& [a, b, w] : edges)
        if ((a == i && b == j) || (a == j && b == i)) present = true;
      if (!present && coin(rng) < extra_edge_prob)
        edges.emplace_back(i, j, weight(rng));
    }
  return build_graph(edges);
}

inline Graph random_tree(std::mt19937& rng, int n) {
  return random_graph(rng, n, 0.0);
}

// Strictly positive random mass distribution.
inline Vec random_interior_mass(std::mt19937& rng, int n, double floor = 0.05) {
  std::uniform_real_distribution<double> unif(floor, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = unif(rng);
  return v / v.sum();
}

inline Vec blob_1d(int n, double center, double sigma) {
  Vec v(n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    v[i] = std::exp(-0.5 * std::pow((x - center) / sigma, 2));
  }
  return v;
}

// The two-channel 1-D swap fixture: each channel carries half the mass and
// the channel contents trade places, so every gamma admits a per-channel
// feasible plan.
inline std::pair<VectorMass, VectorMass> channel_swap_marginals(int cells) {
  Mat mu(2, cells), nu(2, cells);
  mu.row(0) = blob_1d(cells, 0.25, 0.06).transpose();
  mu.row(1) = blob_1d(cells, 0.75, 0.06).transpose();
  nu.row(0) = blob_1d(cells, 0.75, 0.06).transpose();
  nu.row(1) = blob_1d(cells, 0.25, 0.06).transpose();
  for (int r = 0; r < 2; ++r) {
    mu.row(r) *= 0.5 / mu.row(r).sum();
    nu.row(r) *= 0.5 / nu.row(r).sum();
  }
  return {make_vector_mass(mu), make_vector_mass(nu)};
}

// Two-node closed forms of the one-edge transport actions.
inline double k2_asymmetric_exact(double w, double s0, double s1) {
  return 2.0 / std::sqrt(w) * std::abs(std::sqrt(s0) - std::sqrt(s1));
}

inline double k2_symmetric_exact(double w, double s0, double s1) {
  return std::abs(std::asin(2.0 * s1 - 1.0) - std::asin(2.0 * s0 - 1.0)) /
         std::sqrt(w);
}

}  // namespace vvot::testing
