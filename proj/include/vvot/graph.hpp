#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "vvot/types.hpp"

namespace vvot {

struct WeightedEdge {
  int src = 0;
  int dst = 0;
  double weight = 1.0;
};

/// Connected, positively weighted, undirected graph with a fixed edge
/// orientation. The incidence matrix D has column k with +1 at src(k) and
/// -1 at dst(k); D1 keeps the +1 entries (sources), D2 = D1 - D (sinks).
/// Gradient and divergence are W^{1/2} D^T and D W^{1/2}.
struct Graph {
  int n = 0;
  Eigen::VectorXi src;  // per edge
  Eigen::VectorXi dst;
  Vec weights;          // per edge, > 0

  SpMat incidence;         // D, n x m
  SpMat incidence_source;  // D1
  SpMat incidence_sink;    // D2
  SpMat grad_op;           // W^{1/2} D^T, m x n
  SpMat div_op;            // D W^{1/2}, n x m

  int edge_count() const { return static_cast<int>(weights.size()); }
};

/// Validates and canonicalizes an edge list (src = min(i,j), lexicographic
/// edge order) and builds the incidence operators. Throws on self loops,
/// duplicate undirected edges, nonpositive weights, out-of-range ids and
/// disconnected results.
Graph build_graph(const std::vector<std::tuple<int, int, double>>& edges);

/// Builds a graph from already-oriented edges without reordering them.
/// Used for layered products, where edge-family blocks must stay contiguous.
Graph make_graph(int node_count, const std::vector<WeightedEdge>& edges);

/// Nearest-neighbor lattice over the given axis sizes; every edge weight is
/// 1/h^2 so the graph gradient approximates a first-order difference quotient.
Graph grid_graph(const std::vector<int>& shape, double h);

Graph complete_graph(int node_count, double weight = 1.0);
Graph path_graph(int node_count, double weight = 1.0);

/// Returns a copy of g with edge k stored in the opposite orientation.
Graph flip_edge_orientation(const Graph& g, int edge_index);

/// Edge function: entry k is sqrt(w_k) * (x_src - x_dst).
Vec grad(const Graph& g, const Vec& x);

/// Adjoint of grad; its image sums to zero (mass conservation).
Vec divergence(const Graph& g, const Vec& y);

/// Weighted graph Laplacian D W D^T as a sparse operator.
SpMat laplacian(const Graph& g);

/// One explicit Euler step of rho_dot = -D W D^T rho. The step must satisfy
/// h <= 1 / (2 max_i sum_k |D|_ik w_k) or StepTooLarge is thrown.
Vec heat_step(const Graph& g, const Vec& rho, double h);
double heat_step_bound(const Graph& g);

/// Product of a spatial graph with a mutation graph on `channels` nodes:
/// the spatial edge set is replicated per layer (channel-major composite
/// index channel*n + node), the mutation edge set per spatial node. The
/// composite edge list keeps all spatial edges first, then mutation edges.
struct LayeredGraph {
  Graph spatial;
  Graph mutation;
  int channels = 1;
  Graph composite;
  int spatial_edge_count = 0;
  int mutation_edge_count = 0;

  int composite_nodes() const { return composite.n; }
};

LayeredGraph layered_product(const Graph& spatial, const Graph& mutation,
                             int channels);

/// TSV graph format: one edge per line "i<TAB>j<TAB>w", 0-based ids,
/// '#' comment lines ignored. The writer emits canonical sorted order.
Graph read_graph_tsv(const std::string& path);
void write_graph_tsv(const Graph& g, const std::string& path);

}  // namespace vvot
