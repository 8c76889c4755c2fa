#include "vvot/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vvot {

namespace {

void assemble_operators(Graph& g) {
  const int m = g.edge_count();
  std::vector<Triplet> d, d1, d2, grad_t, div_t;
  d.reserve(2 * m);
  for (int k = 0; k < m; ++k) {
    const int i = g.src[k];
    const int j = g.dst[k];
    const double sw = std::sqrt(g.weights[k]);
    d.emplace_back(i, k, 1.0);
    d.emplace_back(j, k, -1.0);
    d1.emplace_back(i, k, 1.0);
    d2.emplace_back(j, k, 1.0);
    grad_t.emplace_back(k, i, sw);
    grad_t.emplace_back(k, j, -sw);
    div_t.emplace_back(i, k, sw);
    div_t.emplace_back(j, k, -sw);
  }
  g.incidence.resize(g.n, m);
  g.incidence.setFromTriplets(d.begin(), d.end());
  g.incidence_source.resize(g.n, m);
  g.incidence_source.setFromTriplets(d1.begin(), d1.end());
  g.incidence_sink.resize(g.n, m);
  g.incidence_sink.setFromTriplets(d2.begin(), d2.end());
  g.grad_op.resize(m, g.n);
  g.grad_op.setFromTriplets(grad_t.begin(), grad_t.end());
  g.div_op.resize(g.n, m);
  g.div_op.setFromTriplets(div_t.begin(), div_t.end());
}

bool connected(int n, const Eigen::VectorXi& src, const Eigen::VectorXi& dst) {
  if (n <= 1) return true;
  std::vector<std::vector<int>> adj(n);
  for (int k = 0; k < src.size(); ++k) {
    adj[src[k]].push_back(dst[k]);
    adj[dst[k]].push_back(src[k]);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

}  // namespace

Graph make_graph(int node_count, const std::vector<WeightedEdge>& edges) {
  require(node_count >= 1, ErrorCode::EmptyShape, "graph needs at least one node");
  Graph g;
  g.n = node_count;
  const int m = static_cast<int>(edges.size());
  g.src.resize(m);
  g.dst.resize(m);
  g.weights.resize(m);
  for (int k = 0; k < m; ++k) {
    const auto& e = edges[k];
    require(e.src >= 0 && e.src < node_count && e.dst >= 0 && e.dst < node_count,
            ErrorCode::DimensionMismatch, "edge endpoint out of range");
    require(e.src != e.dst, ErrorCode::SelfLoop, "self loops are not allowed");
    require(e.weight > 0.0, ErrorCode::NonpositiveWeight,
            "edge weights must be positive");
    g.src[k] = e.src;
    g.dst[k] = e.dst;
    g.weights[k] = e.weight;
  }
  require(connected(g.n, g.src, g.dst), ErrorCode::DisconnectedGraph,
          "graph is not connected");
  assemble_operators(g);
  return g;
}

Graph build_graph(const std::vector<std::tuple<int, int, double>>& edges) {
  std::vector<WeightedEdge> canon;
  canon.reserve(edges.size());
  int max_node = -1;
  for (const auto& [i, j, w] : edges) {
    require(i >= 0 && j >= 0, ErrorCode::DimensionMismatch,
            "node ids must be nonnegative");
    require(i != j, ErrorCode::SelfLoop, "self loops are not allowed");
    canon.push_back({std::min(i, j), std::max(i, j), w});
    max_node = std::max(max_node, std::max(i, j));
  }
  require(max_node >= 0, ErrorCode::EmptyShape, "edge list is empty");
  std::sort(canon.begin(), canon.end(), [](const auto& a, const auto& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
  for (size_t k = 1; k < canon.size(); ++k) {
    require(canon[k].src != canon[k - 1].src || canon[k].dst != canon[k - 1].dst,
            ErrorCode::DuplicateEdge, "duplicate undirected edge");
  }
  return make_graph(max_node + 1, canon);
}

Graph grid_graph(const std::vector<int>& shape, double h) {
  require(!shape.empty(), ErrorCode::EmptyShape, "grid shape is empty");
  require(h > 0.0, ErrorCode::NonpositiveWeight, "grid spacing must be positive");
  long total = 1;
  for (int s : shape) {
    require(s >= 1, ErrorCode::EmptyShape, "grid axis sizes must be >= 1");
    total *= s;
  }
  require(total >= 1, ErrorCode::EmptyShape, "empty grid");
  // Row-major linear index; neighbors along each axis.
  const int dims = static_cast<int>(shape.size());
  std::vector<long> stride(dims, 1);
  for (int d = dims - 2; d >= 0; --d) stride[d] = stride[d + 1] * shape[d + 1];
  const double w = 1.0 / (h * h);
  std::vector<std::tuple<int, int, double>> edges;
  std::vector<int> idx(dims, 0);
  for (long lin = 0; lin < total; ++lin) {
    long rem = lin;
    for (int d = 0; d < dims; ++d) {
      idx[d] = static_cast<int>(rem / stride[d]);
      rem %= stride[d];
    }
    for (int d = 0; d < dims; ++d) {
      if (idx[d] + 1 < shape[d])
        edges.emplace_back(static_cast<int>(lin),
                           static_cast<int>(lin + stride[d]), w);
    }
  }
  require(!edges.empty() || total == 1, ErrorCode::EmptyShape,
          "grid has no edges");
  if (edges.empty()) {
    // Single-node grid: no edges, still a valid (trivial) graph.
    Graph g;
    g.n = 1;
    g.src.resize(0);
    g.dst.resize(0);
    g.weights.resize(0);
    assemble_operators(g);
    return g;
  }
  return build_graph(edges);
}

Graph complete_graph(int node_count, double weight) {
  require(node_count >= 1, ErrorCode::EmptyShape, "need at least one node");
  if (node_count == 1) {
    Graph g;
    g.n = 1;
    g.src.resize(0);
    g.dst.resize(0);
    g.weights.resize(0);
    assemble_operators(g);
    return g;
  }
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i < node_count; ++i)
    for (int j = i + 1; j < node_count; ++j) edges.emplace_back(i, j, weight);
  return build_graph(edges);
}

Graph path_graph(int node_count, double weight) {
  require(node_count >= 1, ErrorCode::EmptyShape, "need at least one node");
  if (node_count == 1) return complete_graph(1);
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i + 1 < node_count; ++i) edges.emplace_back(i, i + 1, weight);
  return build_graph(edges);
}

Graph flip_edge_orientation(const Graph& g, int edge_index) {
  require(edge_index >= 0 && edge_index < g.edge_count(),
          ErrorCode::DimensionMismatch, "edge index out of range");
  Graph flipped = g;
  std::swap(flipped.src[edge_index], flipped.dst[edge_index]);
  assemble_operators(flipped);
  return flipped;
}

Vec grad(const Graph& g, const Vec& x) {
  require(x.size() == g.n, ErrorCode::DimensionMismatch,
          "node function has wrong length");
  return g.grad_op * x;
}

Vec divergence(const Graph& g, const Vec& y) {
  require(y.size() == g.edge_count(), ErrorCode::DimensionMismatch,
          "edge function has wrong length");
  return g.div_op * y;
}

SpMat laplacian(const Graph& g) {
  SpMat l = g.div_op * g.grad_op;
  l.makeCompressed();
  return l;
}

double heat_step_bound(const Graph& g) {
  Vec weighted_degree = Vec::Zero(g.n);
  for (int k = 0; k < g.edge_count(); ++k) {
    weighted_degree[g.src[k]] += g.weights[k];
    weighted_degree[g.dst[k]] += g.weights[k];
  }
  const double max_deg = g.n > 0 ? weighted_degree.maxCoeff() : 0.0;
  return max_deg > 0.0 ? 1.0 / (2.0 * max_deg)
                       : std::numeric_limits<double>::infinity();
}

Vec heat_step(const Graph& g, const Vec& rho, double h) {
  require(rho.size() == g.n, ErrorCode::DimensionMismatch,
          "density has wrong length");
  require(h > 0.0, ErrorCode::StepTooLarge, "step must be positive");
  require(h <= heat_step_bound(g), ErrorCode::StepTooLarge,
          "explicit Euler step exceeds stability bound");
  return rho - h * (g.div_op * (g.grad_op * rho));
}

LayeredGraph layered_product(const Graph& spatial, const Graph& mutation,
                             int channels) {
  require(mutation.n == channels, ErrorCode::ChannelCountMismatch,
          "mutation graph must have one node per channel");
  LayeredGraph lg;
  lg.spatial = spatial;
  lg.mutation = mutation;
  lg.channels = channels;

  const int n = spatial.n;
  std::vector<WeightedEdge> edges;
  edges.reserve(static_cast<size_t>(channels) * spatial.edge_count() +
                static_cast<size_t>(n) * mutation.edge_count());
  for (int c = 0; c < channels; ++c)
    for (int k = 0; k < spatial.edge_count(); ++k)
      edges.push_back({c * n + spatial.src[k], c * n + spatial.dst[k],
                       spatial.weights[k]});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < mutation.edge_count(); ++k)
      edges.push_back({mutation.src[k] * n + i, mutation.dst[k] * n + i,
                       mutation.weights[k]});

  lg.composite = make_graph(channels * n, edges);
  lg.spatial_edge_count = channels * spatial.edge_count();
  lg.mutation_edge_count = n * mutation.edge_count();
  return lg;
}

Graph read_graph_tsv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IOFailure, "cannot open graph file: " + path);
  std::vector<std::tuple<int, int, double>> edges;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int i, j;
    double w;
    require(static_cast<bool>(ls >> i >> j >> w), ErrorCode::UnsupportedFormat,
            "bad graph line: " + line);
    edges.emplace_back(i, j, w);
  }
  return build_graph(edges);
}

void write_graph_tsv(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOFailure, "cannot write graph file: " + path);
  out.precision(17);
  std::vector<int> order(g.edge_count());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int sa = std::min(g.src[a], g.dst[a]), da = std::max(g.src[a], g.dst[a]);
    const int sb = std::min(g.src[b], g.dst[b]), db = std::max(g.src[b], g.dst[b]);
    return std::tie(sa, da) < std::tie(sb, db);
  });
  for (int k : order) {
    out << std::min(g.src[k], g.dst[k]) << '\t' << std::max(g.src[k], g.dst[k])
        << '\t' << g.weights[k] << '\n';
  }
  require(out.good(), ErrorCode::IOFailure, "write failed: " + path);
}

}  // namespace vvot
