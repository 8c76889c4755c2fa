#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vvot/entropy_flow.hpp"
#include "vvot/graph.hpp"
#include "vvot/image.hpp"
#include "vvot/io.hpp"
#include "vvot/transport.hpp"
#include "vvot/w1.hpp"

namespace {

using nlohmann::json;
using namespace vvot;

constexpr int kExitBadInput = 2;
constexpr int kExitNotConverged = 3;

struct GlobalOptions {
  double tol = 1e-6;
  int max_iters = 100000;
  std::uint64_t seed = 20240501;
  int threads = 1;
  std::string output_dir = ".";
};

SolverConfig solver_config(const GlobalOptions& g) {
  SolverConfig cfg;
  cfg.feasibility_tol = g.tol;
  cfg.max_iters = g.max_iters;
  cfg.seed = g.seed;
  return cfg;
}

json report_json(const DistanceReport& r) {
  return json{{"value", r.value},
              {"objective", r.objective},
              {"continuity_residual", r.continuity_residual},
              {"mass_drift", r.mass_drift},
              {"nonneg_violation", r.nonneg_violation},
              {"rel_obj_change", r.rel_obj_change},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"wall_time_seconds", r.wall_time_seconds}};
}

std::vector<double> frame_times(int count) {
  require(count >= 1, ErrorCode::DimensionMismatch,
          "need at least one frame");
  std::vector<double> times;
  for (int i = 1; i <= count; ++i)
    times.push_back(static_cast<double>(i) / (count + 1));
  return times;
}

Graph mutation_graph_from_option(const std::string& option, int channels) {
  if (option == "complete") return complete_graph(channels);
  if (option == "path") return path_graph(channels);
  Graph g = read_graph_tsv(option);
  require(g.n == channels, ErrorCode::ChannelCountMismatch,
          "mutation graph must have one node per channel");
  return g;
}

int run_dist_graph(const std::string& variant, const std::string& graph_path,
                   const std::string& mu_path, const std::string& nu_path,
                   int n_t, bool eps_mix, const GlobalOptions& g) {
  const Graph graph = read_graph_tsv(graph_path);
  const MassDistribution mu = read_density_csv(mu_path);
  const MassDistribution nu = read_density_csv(nu_path);
  const SolverConfig cfg = solver_config(g);
  AssembleOptions opts;
  opts.eps_mix = eps_mix;

  json out;
  bool converged = true;
  if (variant == "w2a" || variant == "w2a-hat") {
    const Variant v = variant == "w2a" ? Variant::AsymmetricGraph
                                       : Variant::SymmetricGraph;
    const auto [report, traj] = solve(assemble(v, graph, mu, nu, n_t, opts), cfg);
    out = report_json(report);
    out["variant"] = variant;
    converged = report.converged;
  } else if (variant == "w2a-max") {
    const auto forward = solve(
        assemble(Variant::AsymmetricGraph, graph, mu, nu, n_t, opts), cfg);
    const auto backward = solve(
        assemble(Variant::AsymmetricGraph, graph, nu, mu, n_t, opts), cfg);
    out["variant"] = variant;
    out["value"] = std::max(forward.first.value, backward.first.value);
    out["forward"] = report_json(forward.first);
    out["backward"] = report_json(backward.first);
    converged = forward.first.converged && backward.first.converged;
  } else {
    throw Error(ErrorCode::UnsupportedFormat,
                "unknown variant '" + variant + "' (w2a|w2a-hat|w2a-max)");
  }
  out["n_t"] = n_t;
  std::cout << out.dump(2) << std::endl;
  return converged ? 0 : kExitNotConverged;
}

int run_w1(const std::string& graph_path, const std::string& mu_path,
           const std::string& nu_path, bool dual_check, bool action_check,
           int n_t, const GlobalOptions& g) {
  const Graph graph = read_graph_tsv(graph_path);
  const MassDistribution mu = read_density_csv(mu_path);
  const MassDistribution nu = read_density_csv(nu_path);
  const W1Result result = w1_graph(graph, mu.values, nu.values);

  std::filesystem::create_directories(g.output_dir);
  const std::string flow_path = g.output_dir + "/w1_flow.tsv";
  {
    std::ofstream flow(flow_path);
    require(flow.good(), ErrorCode::IOFailure, "cannot write " + flow_path);
    flow.precision(17);
    for (int k = 0; k < graph.edge_count(); ++k)
      flow << graph.src[k] << '\t' << graph.dst[k] << '\t' << result.flow[k]
           << '\n';
  }

  json out{{"value", result.value},
           {"gap", result.gap},
           {"iterations", result.iterations},
           {"converged", result.converged},
           {"flow_file", flow_path}};
  if (dual_check) {
    const Vec costs = graph.weights.cwiseSqrt().cwiseInverse();
    const Vec slope = graph.incidence.transpose() * result.potentials;
    out["dual_feasible"] =
        (slope.cwiseAbs() - costs).maxCoeff() <= 1e-10;
    out["dual_objective"] = result.potentials.dot(nu.values - mu.values);
  }
  if (action_check) {
    const Vec costs = graph.weights.cwiseSqrt().cwiseInverse();
    const double action =
        w1_action(graph, costs, mu.values, nu.values, n_t, solver_config(g));
    out["action_value"] = action;
    out["action_rel_diff"] =
        std::abs(action - result.value) / std::max(1e-300, result.value);
  }
  std::cout << out.dump(2) << std::endl;
  return result.converged ? 0 : kExitNotConverged;
}

int run_interp_vector(const std::string& mu_path, const std::string& nu_path,
                      const std::string& graph_path, const std::string& grid,
                      double spacing, const std::string& mutation_opt,
                      double gamma, int n_t, int frames, bool asymmetric,
                      const GlobalOptions& g) {
  const VectorMass mu = read_any_density_csv(mu_path);
  const VectorMass nu = read_any_density_csv(nu_path);
  require(mu.channels == nu.channels && mu.nodes == nu.nodes,
          ErrorCode::MarginalMismatch, "marginal shapes differ");

  Graph spatial;
  int width = mu.nodes, height = 1;
  if (!graph_path.empty()) {
    spatial = read_graph_tsv(graph_path);
  } else {
    require(!grid.empty(), ErrorCode::UnsupportedFormat,
            "need --graph or --grid");
    std::vector<int> shape;
    size_t pos = 0;
    std::string spec = grid;
    for (;;) {
      const size_t x = spec.find('x', pos);
      shape.push_back(std::stoi(spec.substr(pos, x - pos)));
      if (x == std::string::npos) break;
      pos = x + 1;
    }
    require(shape.size() <= 2, ErrorCode::UnsupportedFormat,
            "--grid takes N or WxH");
    if (shape.size() == 2) {
      width = shape[1];
      height = shape[0];
    } else {
      width = shape[0];
      height = 1;
    }
    const double h = spacing > 0 ? spacing : 1.0 / std::max(width, height);
    spatial = grid_graph(shape, h);
  }
  require(spatial.n == mu.nodes, ErrorCode::MarginalMismatch,
          "marginals do not match the spatial graph");

  const Graph mutation = mutation_graph_from_option(mutation_opt, mu.channels);
  const LayeredGraph lg = layered_product(spatial, mutation, mu.channels);
  const Variant variant =
      asymmetric ? Variant::AsymmetricLayered : Variant::SymmetricLayered;
  const TransportProblem problem = assemble(variant, lg, mu, nu, gamma, n_t);
  const auto [report, traj] = solve(problem, solver_config(g));

  FrameRenderOptions opts;
  opts.times = frame_times(frames);
  opts.times.insert(opts.times.begin(), 0.0);
  opts.times.push_back(1.0);
  render_frames(problem, traj, report, width, height, g.output_dir, opts);
  json out = report_json(report);
  out["gamma"] = gamma;
  out["output_dir"] = g.output_dir;
  std::cout << out.dump(2) << std::endl;
  return report.converged ? 0 : kExitNotConverged;
}

int run_interp_image(const std::string& a_path, const std::string& b_path,
                     const std::string& mutation_opt, double gamma, int n_t,
                     int frames, double spacing, const GlobalOptions& g) {
  const ImageDensity a = load_image(a_path);
  const ImageDensity b = load_image(b_path);
  require(a.width == b.width && a.height == b.height,
          ErrorCode::DimensionMismatch, "image dimensions differ");

  const double h = spacing > 0 ? spacing : 1.0 / std::max(a.width, a.height);
  const Graph spatial = grid_graph({a.height, a.width}, h);
  const Graph mutation = mutation_graph_from_option(mutation_opt, 3);
  const LayeredGraph lg = layered_product(spatial, mutation, 3);
  const TransportProblem problem =
      assemble(Variant::SymmetricLayered, lg, a.mass, b.mass, gamma, n_t);
  const auto [report, traj] = solve(problem, solver_config(g));

  FrameRenderOptions opts;
  opts.times = frame_times(frames);
  opts.times.insert(opts.times.begin(), 0.0);
  opts.times.push_back(1.0);
  render_frames(problem, traj, report, a.width, a.height, g.output_dir, opts);
  json out = report_json(report);
  out["gamma"] = gamma;
  out["output_dir"] = g.output_dir;
  std::cout << out.dump(2) << std::endl;
  return report.converged ? 0 : kExitNotConverged;
}

int run_entropy_flow(const std::string& graph_path, const std::string& rho_path,
                     double h, int steps, const GlobalOptions& g) {
  const Graph graph = read_graph_tsv(graph_path);
  const MassDistribution rho0 = read_density_csv(rho_path);
  require(rho0.values.minCoeff() > 0.0, ErrorCode::NonpositiveEntry,
          "entropy flow needs a strictly positive start");
  const auto states = integrate(graph, rho0.values, h, steps);

  std::filesystem::create_directories(g.output_dir);
  const std::string out_path = g.output_dir + "/entropy_flow.csv";
  std::ofstream out(out_path);
  require(out.good(), ErrorCode::IOFailure, "cannot write " + out_path);
  out.precision(17);
  out << "t";
  for (int i = 0; i < graph.n; ++i) out << ",rho" << i;
  out << ",entropy\n";
  for (const auto& state : states) {
    out << state.t;
    for (int i = 0; i < graph.n; ++i) out << ',' << state.rho[i];
    out << ',' << entropy(state.rho) << '\n';
  }
  json summary{{"steps", steps},
               {"final_time", states.back().t},
               {"final_entropy", entropy(states.back().rho)},
               {"trajectory_file", out_path}};
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal mass transport distances and interpolations on "
               "weighted graphs and vector-valued densities"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--tol", g.tol, "solver feasibility tolerance");
  app.add_option("--max-iters", g.max_iters, "solver iteration cap");
  app.add_option("--seed", g.seed, "seed for randomized subroutines");
  app.add_option("--threads", g.threads, "linear algebra thread cap");
  app.add_option("--output-dir", g.output_dir, "directory for written files");

  auto* dist = app.add_subcommand("dist-graph",
                                  "transport distance between two densities");
  std::string variant = "w2a-hat", graph_path, mu_path, nu_path;
  int n_t = 16;
  bool eps_mix = false;
  dist->add_option("--variant", variant, "w2a | w2a-hat | w2a-max");
  dist->add_option("--nt", n_t, "time subintervals");
  dist->add_flag("--eps-mix", eps_mix, "mix marginals with 1e-9 uniform");
  dist->add_option("graph", graph_path, "graph TSV")->required();
  dist->add_option("mu", mu_path, "source density CSV")->required();
  dist->add_option("nu", nu_path, "target density CSV")->required();

  auto* w1cmd = app.add_subcommand("w1", "Wasserstein-1 min-cost flow");
  std::string w1_graph_path, w1_mu, w1_nu;
  bool dual_check = false, action_check = false;
  int w1_nt = 16;
  w1cmd->add_flag("--dual-check", dual_check, "verify the dual certificate");
  w1cmd->add_flag("--action-check", action_check,
                  "cross-check with the dynamic action form");
  w1cmd->add_option("--nt", w1_nt, "subintervals for --action-check");
  w1cmd->add_option("graph", w1_graph_path, "graph TSV")->required();
  w1cmd->add_option("mu", w1_mu, "source density CSV")->required();
  w1cmd->add_option("nu", w1_nu, "target density CSV")->required();

  auto* iv = app.add_subcommand("interp-vector",
                                "interpolate vector-valued densities");
  std::string iv_mu, iv_nu, iv_graph, iv_grid, iv_mutation = "complete";
  double iv_gamma = 1.0, iv_spacing = 0.0;
  int iv_nt = 16, iv_frames = 9;
  bool iv_asym = false;
  iv->add_option("mu", iv_mu)->required();
  iv->add_option("nu", iv_nu)->required();
  iv->add_option("--graph", iv_graph, "spatial graph TSV");
  iv->add_option("--grid", iv_grid, "spatial grid size N or HxW");
  iv->add_option("--spacing", iv_spacing, "grid spacing (default 1/max side)");
  iv->add_option("--mutation-graph", iv_mutation, "complete | path | TSV file");
  iv->add_option("--gamma", iv_gamma, "inter-channel transfer cost weight");
  iv->add_option("--nt", iv_nt, "time subintervals");
  iv->add_option("--frames", iv_frames, "interior frame count");
  iv->add_flag("--asymmetric", iv_asym, "use the quasimetric program");

  auto* ii = app.add_subcommand("interp-image", "interpolate two RGB images");
  std::string ii_a, ii_b, ii_mutation = "complete";
  double ii_gamma = 0.001, ii_spacing = 0.0;
  int ii_nt = 16, ii_frames = 9;
  ii->add_option("image_a", ii_a)->required();
  ii->add_option("image_b", ii_b)->required();
  ii->add_option("--mutation-graph", ii_mutation, "complete | path | TSV file");
  ii->add_option("--gamma", ii_gamma, "inter-channel transfer cost weight");
  ii->add_option("--nt", ii_nt, "time subintervals");
  ii->add_option("--frames", ii_frames, "interior frame count");
  ii->add_option("--spacing", ii_spacing, "grid spacing (default 1/max side)");

  auto* ef = app.add_subcommand("entropy-flow",
                                "entropy gradient flow in the transport "
                                "geometry");
  ef->set_help_flag("--help", "print help");  // frees --h for the step size
  std::string ef_graph, ef_rho;
  double ef_h = 1e-3;
  int ef_steps = 1000;
  ef->add_option("graph", ef_graph)->required();
  ef->add_option("rho", ef_rho)->required();
  ef->add_option("--h", ef_h, "initial step size");
  ef->add_option("--steps", ef_steps, "step count");

  CLI11_PARSE(app, argc, argv);
  Eigen::setNbThreads(g.threads);

  try {
    if (*dist)
      return run_dist_graph(variant, graph_path, mu_path, nu_path, n_t,
                            eps_mix, g);
    if (*w1cmd)
      return run_w1(w1_graph_path, w1_mu, w1_nu, dual_check, action_check,
                    w1_nt, g);
    if (*iv)
      return run_interp_vector(iv_mu, iv_nu, iv_graph, iv_grid, iv_spacing,
                               iv_mutation, iv_gamma, iv_nt, iv_frames,
                               iv_asym, g);
    if (*ii)
      return run_interp_image(ii_a, ii_b, ii_mutation, ii_gamma, ii_nt,
                              ii_frames, ii_spacing, g);
    if (*ef) return run_entropy_flow(ef_graph, ef_rho, ef_h, ef_steps, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitBadInput;
  }
  return kExitBadInput;
}
