// Acceptance suite: runs every gate criterion end to end and prints one
// pass/fail line each. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "vvot/entropy_flow.hpp"
#include "vvot/graph.hpp"
#include "vvot/image.hpp"
#include "vvot/io.hpp"
#include "vvot/oracle.hpp"
#include "vvot/transport.hpp"
#include "vvot/w1.hpp"

using namespace vvot;
using namespace vvot::testing;

namespace {

int failures = 0;

void criterion(int number, const std::string& name, bool pass,
               const std::string& details) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), details.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

struct ConservationRecord {
  std::string label;
  double continuity;
  double drift;
};
std::vector<ConservationRecord> conservation;

void record(const std::string& label, const DistanceReport& report) {
  if (report.converged)
    conservation.push_back(
        {label, report.continuity_residual, report.mass_drift});
}

SolverConfig default_cfg(int max_iters = 100000) {
  SolverConfig cfg;
  cfg.max_iters = max_iters;
  return cfg;
}

// ---------------------------------------------------------------------------

void criterion_two_node_closed_forms() {
  const Graph k2 = build_graph({{0, 1, 1.0}});
  const auto mu = make_mass((Vec(2) << 0.9, 0.1).finished());
  const auto nu_swap = make_mass((Vec(2) << 0.1, 0.9).finished());
  const auto nu_half = make_mass((Vec(2) << 0.5, 0.5).finished());

  Timer t1;
  const auto hat =
      solve(assemble(Variant::SymmetricGraph, k2, mu, nu_swap, 64),
            default_cfg());
  const double t_hat = t1.seconds();
  record("k2 symmetric", hat.first);

  Timer t2;
  const auto fwd = solve(assemble(Variant::AsymmetricGraph, k2, mu, nu_half, 64),
                         default_cfg());
  const double t_fwd = t2.seconds();
  record("k2 asymmetric forward", fwd.first);

  Timer t3;
  const auto rev = solve(assemble(Variant::AsymmetricGraph, k2, nu_half, mu, 64),
                         default_cfg());
  const double t_rev = t3.seconds();
  record("k2 asymmetric reverse", rev.first);

  const double exact_hat = 2.0 * std::asin(0.8);
  const double exact_fwd = 2.0 * (std::sqrt(0.9) - std::sqrt(0.5));
  const double exact_rev = 2.0 * (std::sqrt(0.5) - std::sqrt(0.1));
  const double rel_hat = std::abs(hat.first.value - exact_hat) / exact_hat;
  const double rel_fwd = std::abs(fwd.first.value - exact_fwd) / exact_fwd;
  const double rel_rev = std::abs(rev.first.value - exact_rev) / exact_rev;

  char details[256];
  std::snprintf(details, sizeof details,
                "sym %.5f vs %.5f, asym %.5f/%.5f vs %.5f/%.5f, rel "
                "%.1e/%.1e/%.1e, %.1f/%.1f/%.1f s",
                hat.first.value, exact_hat, fwd.first.value, rev.first.value,
                exact_fwd, exact_rev, rel_hat, rel_fwd, rel_rev, t_hat, t_fwd,
                t_rev);
  criterion(1, "two-node closed forms within 2% at n_t=64",
            rel_hat <= 0.02 && rel_fwd <= 0.02 && rel_rev <= 0.02 &&
                hat.first.converged && fwd.first.converged &&
                rev.first.converged && t_hat < 10 && t_fwd < 10 && t_rev < 10,
            details);
}

void criterion_geodesic_linearity() {
  const Graph k2 = build_graph({{0, 1, 1.0}});
  const auto mu = make_mass((Vec(2) << 0.9, 0.1).finished());
  const auto nu = make_mass((Vec(2) << 0.1, 0.9).finished());
  const TransportProblem p = assemble(Variant::SymmetricGraph, k2, mu, nu, 64);
  const auto [rep, traj] = solve(p, default_cfg());
  record("geodesic k2", rep);
  const double dev_k2 = geodesic_deviation(traj, p, default_cfg());

  const LayeredGraph lg =
      layered_product(grid_graph({8}, 0.125), complete_graph(2), 2);
  const auto [vmu, vnu] = channel_swap_marginals(8);
  const TransportProblem lp =
      assemble(Variant::SymmetricLayered, lg, vmu, vnu, 0.5, 64);
  const auto [lrep, ltraj] = solve(lp, default_cfg(60000));
  record("geodesic layered", lrep);
  const double dev_layered = geodesic_deviation(ltraj, lp, default_cfg(60000));

  char details[128];
  std::snprintf(details, sizeof details,
                "two-node deviation %.4f (<=0.03), layered %.4f (<=0.05)",
                dev_k2, dev_layered);
  criterion(2, "geodesic linearity", dev_k2 <= 0.03 && dev_layered <= 0.05,
            details);
}

void criterion_w1_exactness() {
  bool pass = true;
  std::string details;

  // tree fixtures carry a unique feasible flow
  {
    const Graph path = path_graph(3);
    const W1Result r =
        w1_graph(path, Vec::Ones(2), (Vec(3) << 1.0, 0.0, 0.0).finished(),
                 (Vec(3) << 0.0, 0.0, 1.0).finished());
    pass = pass && std::abs(r.value - 2.0) <= 1e-9 && r.gap <= 1e-8;
    details += "path value " + std::to_string(r.value);
  }

  std::mt19937 rng(811);
  double worst_gap = 0.0, worst_action = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> size(2, 6);
    const Graph g = random_graph(rng, size(rng));
    const Vec mu = random_interior_mass(rng, g.n);
    const Vec nu = random_interior_mass(rng, g.n);
    const W1Result r = w1_graph(g, mu, nu);
    pass = pass && r.converged;
    worst_gap = std::max(worst_gap, r.gap);
    if (trial < 3) {
      const Vec costs = g.weights.cwiseSqrt().cwiseInverse();
      const double action = w1_action(g, costs, mu, nu, 8, default_cfg());
      worst_action = std::max(
          worst_action, std::abs(action - r.value) / std::max(r.value, 1e-12));
    }
  }
  pass = pass && worst_gap <= 1e-8 && worst_action <= 1e-3;
  char buf[128];
  std::snprintf(buf, sizeof buf, ", worst gap %.2e, worst action rel %.2e",
                worst_gap, worst_action);
  criterion(3, "W1 exactness, duality gap and action form", pass,
            details + buf);
}

void criterion_oracle_equivalence() {
  SolverConfig cfg = default_cfg(60000);
  double worst = 0.0;
  int count = 0;
  bool pass = true;
  auto compare = [&](const std::string& label, const TransportProblem& p) {
    const auto primal = solve(p, cfg).first;
    record("oracle fixture " + label, primal);
    const auto reference = oracle::smoothed_dynamic_solve(p, 1e-8);
    const double err = std::abs(primal.objective - reference.value);
    const double budget = std::max(1e-3 * reference.value, 1e-6);
    worst = std::max(worst, err / budget);
    pass = pass && err <= budget && primal.converged;
    ++count;
  };

  const Graph k2 = build_graph({{0, 1, 1.0}});
  compare("k2 symmetric",
          assemble(Variant::SymmetricGraph, k2,
                   make_mass((Vec(2) << 0.9, 0.1).finished()),
                   make_mass((Vec(2) << 0.1, 0.9).finished()), 64));
  compare("k2 asymmetric",
          assemble(Variant::AsymmetricGraph, k2,
                   make_mass((Vec(2) << 0.9, 0.1).finished()),
                   make_mass((Vec(2) << 0.5, 0.5).finished()), 32));
  compare("path3 symmetric",
          assemble(Variant::SymmetricGraph, path_graph(3),
                   make_mass((Vec(3) << 0.6, 0.3, 0.1).finished()),
                   make_mass((Vec(3) << 0.1, 0.2, 0.7).finished()), 32));
  {
    const LayeredGraph lg =
        layered_product(build_graph({{0, 1, 1.0}}), complete_graph(2), 2);
    Mat mu(2, 2), nu(2, 2);
    mu << 0.5, 0.2, 0.2, 0.1;
    nu << 0.1, 0.2, 0.2, 0.5;
    compare("layered k2xk2",
            assemble(Variant::SymmetricLayered, lg, make_vector_mass(mu),
                     make_vector_mass(nu), 0.7, 16));
  }
  {
    const LayeredGraph lg =
        layered_product(grid_graph({8}, 0.125), complete_graph(2), 2);
    const auto [vmu, vnu] = channel_swap_marginals(8);
    compare("grid8 layered",
            assemble(Variant::SymmetricLayered, lg, vmu, vnu, 0.1, 8));
  }
  {
    const Graph grid = grid_graph({3, 3}, 1.0 / 3);
    Vec mu = Vec::Constant(9, 0.02), nu = Vec::Constant(9, 0.02);
    mu[0] += 0.82;
    nu[8] += 0.82;
    compare("grid3x3 scalar",
            assemble(Variant::SymmetricGraph, grid, make_mass(mu),
                     make_mass(nu), 8));
  }

  char details[128];
  std::snprintf(details, sizeof details,
                "%d fixtures, worst error %.2f of budget", count, worst);
  criterion(4, "splitting solver matches the smoothed dense oracle",
            pass && count >= 5, details);
}

void criterion_metric_axioms() {
  Timer timer;
  std::mt19937 rng(821);
  SolverConfig cfg = default_cfg(40000);
  const int triples = 200;
  int violations_nonneg = 0, violations_identity = 0;
  double worst_triangle = -1e300, worst_symmetry = 0.0;

  for (int trial = 0; trial < triples; ++trial) {
    std::uniform_int_distribution<int> size(3, 5);
    const Graph g = random_graph(rng, size(rng));
    const auto a = make_mass(random_interior_mass(rng, g.n));
    const auto b = make_mass(random_interior_mass(rng, g.n));
    const auto c = make_mass(random_interior_mass(rng, g.n));

    const double ab =
        solve(assemble(Variant::AsymmetricGraph, g, a, b, 32), cfg).first.value;
    const double bc =
        solve(assemble(Variant::AsymmetricGraph, g, b, c, 32), cfg).first.value;
    const double ac =
        solve(assemble(Variant::AsymmetricGraph, g, a, c, 32), cfg).first.value;
    if (!(ab > 0 && bc > 0 && ac > 0)) ++violations_nonneg;
    worst_triangle = std::max(worst_triangle, ac - (ab + bc));

    const double hat_ab =
        solve(assemble(Variant::SymmetricGraph, g, a, b, 32), cfg).first.value;
    const double hat_ba =
        solve(assemble(Variant::SymmetricGraph, g, b, a, 32), cfg).first.value;
    worst_symmetry = std::max(
        worst_symmetry, std::abs(hat_ab - hat_ba) / std::max(hat_ab, hat_ba));
    const double hat_ac =
        solve(assemble(Variant::SymmetricGraph, g, a, c, 32), cfg).first.value;
    const double hat_bc =
        solve(assemble(Variant::SymmetricGraph, g, b, c, 32), cfg).first.value;
    worst_triangle = std::max(worst_triangle, hat_ac - (hat_ab + hat_bc));

    const double self =
        solve(assemble(Variant::AsymmetricGraph, g, a, a, 32), cfg)
            .first.value;
    if (self > 1e-4) ++violations_identity;
  }
  const double elapsed = timer.seconds();
  // The legs of a triple share one time grid, so discretization bias
  // largely cancels and the slack only has to absorb solver error.
  const double triangle_budget = 3.0 * cfg.feasibility_tol;
  char details[256];
  std::snprintf(details, sizeof details,
                "%d triples, worst triangle slack %.2e (budget %.1e), worst "
                "symmetry %.2e, identity/nonneg violations %d/%d, %.0f s",
                triples, worst_triangle, triangle_budget, worst_symmetry,
                violations_identity, violations_nonneg, elapsed);
  criterion(5, "metric axiom property suite",
            violations_nonneg == 0 && violations_identity == 0 &&
                worst_triangle <= triangle_budget && worst_symmetry <= 0.02 &&
                elapsed < 1800,
            details);
}

void criterion_gamma_sweep() {
  Timer timer;
  const Graph grid = grid_graph({32}, 1.0 / 32);
  const LayeredGraph lg = layered_product(grid, complete_graph(2), 2);
  const auto [vmu, vnu] = channel_swap_marginals(32);
  SolverConfig cfg = default_cfg(60000);

  std::vector<double> gammas{1e-4, 1e-2, 1.0, 1e2};
  std::vector<double> mutation_masses;
  double channel_change_at_large_gamma = 1.0;
  bool converged = true;
  for (double gamma : gammas) {
    const TransportProblem p =
        assemble(Variant::SymmetricLayered, lg, vmu, vnu, gamma, 16);
    const auto [rep, traj] = solve(p, cfg);
    record("gamma sweep " + std::to_string(gamma), rep);
    converged = converged && rep.converged;
    mutation_masses.push_back(flux_mass(p, traj, 1));
    if (gamma == 1e2) {
      double worst = 0.0;
      for (int t = 0; t <= p.n_t; ++t)
        for (int c = 0; c < 2; ++c) {
          const double mass_t = traj.densities.row(t).segment(c * 32, 32).sum();
          const double mass_0 = traj.densities.row(0).segment(c * 32, 32).sum();
          worst = std::max(worst, std::abs(mass_t - mass_0));
        }
      channel_change_at_large_gamma = worst;
    }
  }
  bool decreasing = true;
  for (size_t i = 1; i < mutation_masses.size(); ++i)
    decreasing = decreasing && mutation_masses[i] < mutation_masses[i - 1];
  const double elapsed = timer.seconds();
  char details[256];
  std::snprintf(details, sizeof details,
                "mutation flux mass %.4f > %.4f > %.4f > %.4f, channel change "
                "at gamma=100: %.2e, %.0f s",
                mutation_masses[0], mutation_masses[1], mutation_masses[2],
                mutation_masses[3], channel_change_at_large_gamma, elapsed);
  criterion(6, "gamma sweep reproduces the transfer/transport tradeoff",
            converged && decreasing &&
                channel_change_at_large_gamma <= 0.01 && elapsed < 300,
            details);
}

void criterion_entropy_flow() {
  const Graph k2 = build_graph({{0, 1, 1.0}});
  const Vec rhs = flow_rhs(k2, (Vec(2) << 0.9, 0.1).finished());
  const bool rhs_ok = std::abs(rhs[0] + 0.19775) <= 1e-5 &&
                      std::abs(rhs[1] - 0.19775) <= 1e-5;

  bool monotone = true, reaches_uniform = true;
  for (const Graph& g : {build_graph({{0, 1, 1.0}}), path_graph(4)}) {
    Vec start(g.n);
    for (int i = 0; i < g.n; ++i) start[i] = 1.0 + 0.7 * i;
    start /= start.sum();
    const auto states = integrate(g, start, 1e-3, 30000);
    double prev = -1.0;
    for (const auto& s : states) {
      const double e = entropy(s.rho);
      monotone = monotone && e >= prev - 1e-12;
      prev = e;
    }
    reaches_uniform =
        reaches_uniform &&
        (states.back().rho - Vec::Constant(g.n, 1.0 / g.n))
                .lpNorm<Eigen::Infinity>() <= 1e-3;
  }
  char details[128];
  std::snprintf(details, sizeof details,
                "rhs (%.6f, %.6f), monotone %d, uniform limit %d", rhs[0],
                rhs[1], int(monotone), int(reaches_uniform));
  criterion(7, "entropy gradient flow", rhs_ok && monotone && reaches_uniform,
            details);
}

void criterion_imaging_pipeline() {
  Timer timer;
  const auto dir = std::filesystem::temp_directory_path() / "vvot_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  // 16x16 two-Gaussian fixture: a red blob moving and recoloring to blue.
  // Integer blob centers mirror each other so both images quantize to the
  // same totals and to a full-scale maximum.
  const int side = 16;
  auto blob_image = [&](int cx, int cy, int channel) {
    Rgb8Image image;
    image.width = side;
    image.height = side;
    image.pixels.assign(side * side * 3, 0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double r2 = std::pow(x - cx, 2) + std::pow(y - cy, 2);
        image.at(x, y, channel) = static_cast<std::uint8_t>(
            std::lround(255.0 * std::exp(-r2 / (2.0 * 1.8 * 1.8))));
      }
    return image;
  };
  const std::string a_path = (dir / "a.png").string();
  const std::string b_path = (dir / "b.png").string();
  write_png(blob_image(4, 8, 0), a_path);
  write_png(blob_image(11, 8, 2), b_path);

  const ImageDensity a = load_image(a_path);
  const ImageDensity b = load_image(b_path);
  const Graph spatial = grid_graph({side, side}, 1.0 / side);
  const LayeredGraph lg = layered_product(spatial, complete_graph(3), 3);
  const TransportProblem p =
      assemble(Variant::SymmetricLayered, lg, a.mass, b.mass, 0.001, 16);
  const auto [rep, traj] = solve(p, default_cfg(30000));
  record("imaging pipeline", rep);

  FrameRenderOptions opts;
  for (int i = 0; i <= 10; ++i) opts.times.push_back(i / 10.0);
  const auto files = render_frames(p, traj, rep, side, side,
                                   (dir / "frames").string(), opts);

  // joint mass per frame
  bool mass_ok = true;
  for (double t : opts.times) {
    char name[64];
    std::snprintf(name, sizeof name, "frame_t%.3f.csv", t);
    const RawDensity frame =
        read_raw_density_csv((dir / "frames" / name).string());
    mass_ok = mass_ok && std::abs(frame.values.sum() - 1.0) <= 1e-6;
  }

  // endpoint frames match the inputs within one quantization level
  auto max_pixel_diff = [&](const std::string& rendered,
                            const std::string& original) {
    const Rgb8Image r = read_png(rendered);
    const Rgb8Image o = read_png(original);
    int worst = 0;
    for (size_t i = 0; i < r.pixels.size(); ++i)
      worst = std::max(worst, std::abs(int(r.pixels[i]) - int(o.pixels[i])));
    return worst;
  };
  const int diff_a =
      max_pixel_diff((dir / "frames" / "frame_t0.000.png").string(), a_path);
  const int diff_b =
      max_pixel_diff((dir / "frames" / "frame_t1.000.png").string(), b_path);

  // the mass centroid sweeps monotonically between the blob centers
  bool monotone = true;
  double prev_cx = -1.0;
  for (double t : opts.times) {
    const Vec slice = [&] {
      char name[64];
      std::snprintf(name, sizeof name, "frame_t%.3f.csv", t);
      return read_raw_density_csv((dir / "frames" / name).string()).values;
    }();
    double cx = 0.0, total = 0.0;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double v = slice[c * side * side + y * side + x];
          cx += v * x;
          total += v;
        }
    cx /= total;
    monotone = monotone && cx >= prev_cx - 1e-6;
    prev_cx = cx;
  }
  const double elapsed = timer.seconds();
  char details[256];
  std::snprintf(details, sizeof details,
                "mass ok %d, endpoint diffs %d/%d levels, centroid monotone "
                "%d, converged %d, %.0f s",
                int(mass_ok), diff_a, diff_b, int(monotone),
                int(rep.converged), elapsed);
  criterion(8, "imaging pipeline at desk scale",
            mass_ok && diff_a <= 1 && diff_b <= 1 && monotone &&
                rep.converged && elapsed < 120,
            details);
}

void criterion_conservation() {
  double worst_continuity = 0.0, worst_drift = 0.0;
  for (const auto& rec : conservation) {
    worst_continuity = std::max(worst_continuity, rec.continuity);
    worst_drift = std::max(worst_drift, rec.drift);
  }
  char details[160];
  std::snprintf(details, sizeof details,
                "%zu converged trajectories, worst continuity %.2e (<=1e-6), "
                "worst mass drift %.2e (<=1e-8)",
                conservation.size(), worst_continuity, worst_drift);
  criterion(9, "conservation and feasibility of converged trajectories",
            !conservation.empty() && worst_continuity <= 1e-6 &&
                worst_drift <= 1e-8,
            details);
}

}  // namespace

int main() {
  criterion_two_node_closed_forms();
  criterion_geodesic_linearity();
  criterion_w1_exactness();
  criterion_oracle_equivalence();
  criterion_metric_axioms();
  criterion_gamma_sweep();
  criterion_entropy_flow();
  criterion_imaging_pipeline();
  criterion_conservation();
  if (failures == 0)
    std::puts("acceptance: all criteria passed");
  else
    std::printf("acceptance: %d criteria failed\n", failures);
  return failures;
}
