#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "fixtures.hpp"
#include "vvot/image.hpp"
#include "vvot/io.hpp"

using namespace vvot;
using namespace vvot::testing;

namespace {

bool throws_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("density CSV round trips at full precision") {
  TempDir dir("vvot_io_test");
  std::mt19937 rng(401);
  const Vec mass = random_interior_mass(rng, 9);
  write_density_csv(mass, dir.file("scalar.csv"));
  const MassDistribution back = read_density_csv(dir.file("scalar.csv"));
  CHECK((back.values - mass).lpNorm<Eigen::Infinity>() <= 1e-12);

  Mat vm(3, 5);
  vm.setRandom();
  vm = vm.cwiseAbs();
  vm /= vm.sum();
  const VectorMass vmass = make_vector_mass(vm);
  write_vector_density_csv(vmass, dir.file("vector.csv"));
  const VectorMass vback = read_vector_density_csv(dir.file("vector.csv"));
  CHECK(vback.channels == 3);
  CHECK(vback.nodes == 5);
  CHECK((vback.values - vmass.values).lpNorm<Eigen::Infinity>() <= 1e-12);

  // scalar reader rejects vector files
  CHECK(throws_code(ErrorCode::UnsupportedFormat,
                    [&] { read_density_csv(dir.file("vector.csv")); }));
  CHECK(throws_code(ErrorCode::IOFailure,
                    [&] { read_density_csv(dir.file("missing.csv")); }));
}

TEST_CASE("png round trip is lossless") {
  TempDir dir("vvot_png_test");
  Rgb8Image image;
  image.width = 7;
  image.height = 5;
  image.pixels.resize(7 * 5 * 3);
  std::mt19937 rng(409);
  for (auto& p : image.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  write_png(image, dir.file("round.png"));
  const Rgb8Image back = read_png(dir.file("round.png"));
  CHECK(back.width == image.width);
  CHECK(back.height == image.height);
  CHECK(back.pixels == image.pixels);
}

TEST_CASE("load_image normalizes jointly with an epsilon floor") {
  TempDir dir("vvot_img_test");
  // 2x1: pure red next to pure blue
  Rgb8Image image;
  image.width = 2;
  image.height = 1;
  image.pixels = {255, 0, 0, 0, 0, 255};
  write_png(image, dir.file("rb.png"));
  const ImageDensity density = load_image(dir.file("rb.png"));
  CHECK(density.mass.channels == 3);
  CHECK(density.mass.nodes == 2);
  CHECK(density.mass.values.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(density.mass(0, 0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(density.mass(2, 1) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(density.mass(1, 0) <= 1e-6);
  CHECK(density.mass(1, 0) > 0.0);  // epsilon floor keeps support full

  Rgb8Image black;
  black.width = 2;
  black.height = 2;
  black.pixels.assign(12, 0);
  write_png(black, dir.file("black.png"));
  CHECK(throws_code(ErrorCode::ZeroImage,
                    [&] { load_image(dir.file("black.png")); }));
}

TEST_CASE("render_frames writes frames, CSVs and a manifest") {
  TempDir dir("vvot_render_test");
  const Graph grid = grid_graph({2, 2}, 0.5);
  const LayeredGraph lg = layered_product(grid, complete_graph(3), 3);
  Mat mu = Mat::Constant(3, 4, 0.02), nu = Mat::Constant(3, 4, 0.02);
  mu(0, 0) += 1.0 - 0.24;
  nu(2, 3) += 1.0 - 0.24;
  const TransportProblem p =
      assemble(Variant::SymmetricLayered, lg, make_vector_mass(mu),
               make_vector_mass(nu), 0.1, 4);
  SolverConfig cfg;
  cfg.max_iters = 20000;
  const auto [rep, traj] = solve(p, cfg);
  REQUIRE(rep.converged);

  FrameRenderOptions opts;
  opts.times = {0.0, 0.1, 0.5, 0.9, 1.0};
  const auto files =
      render_frames(p, traj, rep, 2, 2, dir.file("frames"), opts);
  CHECK(std::filesystem::exists(dir.file("frames") + "/frame_t0.100.png"));
  CHECK(std::filesystem::exists(dir.file("frames") + "/frame_t0.500.csv"));
  CHECK(std::filesystem::exists(dir.file("frames") + "/manifest.json"));

  std::ifstream manifest(dir.file("frames") + "/manifest.json");
  const auto parsed = nlohmann::json::parse(manifest);
  CHECK(parsed["variant"] == "symmetric-layered");
  CHECK(parsed["n_t"] == 4);
  CHECK(parsed["converged"] == true);
  CHECK(parsed["files"].size() == files.size() - 1);  // manifest lists itself last

  // each frame CSV carries (near) unit joint mass
  const RawDensity frame =
      read_raw_density_csv(dir.file("frames") + "/frame_t0.500.csv");
  CHECK(frame.channels == 3);
  CHECK(std::abs(frame.values.sum() - 1.0) <= 1e-6);

  // a constant trajectory renders byte-identical frames
  Trajectory constant;
  constant.densities = p.mu.transpose().replicate(5, 1);
  constant.flux = Mat::Zero(4, lg.composite.edge_count());
  const TransportProblem p_same =
      assemble(Variant::SymmetricLayered, lg, make_vector_mass(mu),
               make_vector_mass(mu), 0.1, 4);
  FrameRenderOptions two;
  two.times = {0.25, 0.75};
  render_frames(p_same, constant, rep, 2, 2, dir.file("const"), two);
  std::ifstream f1(dir.file("const") + "/frame_t0.250.png", std::ios::binary);
  std::ifstream f2(dir.file("const") + "/frame_t0.750.png", std::ios::binary);
  const std::string bytes1((std::istreambuf_iterator<char>(f1)),
                           std::istreambuf_iterator<char>());
  const std::string bytes2((std::istreambuf_iterator<char>(f2)),
                           std::istreambuf_iterator<char>());
  CHECK(bytes1 == bytes2);
  CHECK(!bytes1.empty());
}
