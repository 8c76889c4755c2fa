#include "vvot/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace vvot {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Rgb8Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorCode::IOFailure, "cannot open " + path);
  png_byte header[8];
  require(std::fread(header, 1, 8, fp.get()) == 8 &&
              png_sig_cmp(header, 0, 8) == 0,
          ErrorCode::UnsupportedFormat, path + " is not a PNG file");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::IOFailure, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::IOFailure, "libpng init failed");
  }
  Rgb8Image image;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::UnsupportedFormat, "failed to decode " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte depth = png_get_bit_depth(png, info);
  require(depth <= 8, ErrorCode::UnsupportedFormat,
          path + ": only 8-bit images are supported");
  // Canonicalize palette/gray/alpha inputs to 8-bit RGB.
  png_set_expand(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA)
    png_set_strip_alpha(png);
  if (!(png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR))
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  require(png_get_rowbytes(png, info) ==
              static_cast<size_t>(image.width) * 3,
          ErrorCode::UnsupportedFormat, path + ": expected 8-bit RGB data");
  image.pixels.resize(static_cast<size_t>(image.width) * image.height * 3);
  row_ptrs.resize(image.height);
  for (int y = 0; y < image.height; ++y)
    row_ptrs[y] = image.pixels.data() + static_cast<size_t>(y) * image.width * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const Rgb8Image& image, const std::string& path) {
  require(image.width > 0 && image.height > 0 &&
              image.pixels.size() ==
                  static_cast<size_t>(image.width) * image.height * 3,
          ErrorCode::DimensionMismatch, "malformed image buffer");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorCode::IOFailure, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::IOFailure, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IOFailure, "libpng init failed");
  }
  std::vector<png_bytep> row_ptrs(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IOFailure, "failed to encode " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    row_ptrs[y] = const_cast<png_bytep>(
        image.pixels.data() + static_cast<size_t>(y) * image.width * 3);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageDensity load_image(const std::string& path) {
  const Rgb8Image image = read_png(path);
  ImageDensity density;
  density.width = image.width;
  density.height = image.height;
  const int nodes = image.width * image.height;
  Mat values(3, nodes);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c)
        values(c, y * image.width + x) = image.at(x, y, c) / 255.0;
  const double max_intensity = values.maxCoeff();
  require(max_intensity > 0.0, ErrorCode::ZeroImage,
          path + " carries no intensity");
  density.floor_applied = 1e-6 * max_intensity;
  values = values.cwiseMax(density.floor_applied);
  density.total_intensity = values.sum();
  values /= density.total_intensity;
  density.mass = make_vector_mass(values);
  return density;
}

namespace {

std::string frame_stem(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_t%.3f", t);
  return buf;
}

Vec interpolated_slice(const Trajectory& traj, int n_t, double t) {
  const double pos = t * n_t;
  const int lo = std::clamp(static_cast<int>(std::floor(pos)), 0, n_t);
  const int hi = std::min(lo + 1, n_t);
  const double frac = pos - lo;
  Vec slice = (1.0 - frac) * traj.densities.row(lo).transpose();
  if (hi > lo && frac > 0.0) slice += frac * traj.densities.row(hi).transpose();
  return slice;
}

void json_kv(std::ofstream& out, const char* key, double value,
             bool comma = true) {
  out << "  \"" << key << "\": " << value << (comma ? ",\n" : "\n");
}

}  // namespace

std::vector<std::string> render_frames(const TransportProblem& problem,
                                       const Trajectory& trajectory,
                                       const DistanceReport& report,
                                       int width, int height,
                                       const std::string& out_dir,
                                       const FrameRenderOptions& options) {
  require(!options.times.empty(), ErrorCode::DimensionMismatch,
          "no frame times requested");
  for (double t : options.times)
    require(t >= 0.0 && t <= 1.0, ErrorCode::DimensionMismatch,
            "frame times must lie in [0, 1]");
  const int channels = problem.channels;
  const int nodes = problem.nodes() / channels;
  require(nodes == width * height, ErrorCode::DimensionMismatch,
          "pixel grid does not match the trajectory");
  std::filesystem::create_directories(out_dir);

  std::vector<Vec> slices;
  slices.reserve(options.times.size());
  double global_max = 0.0;
  for (double t : options.times) {
    slices.push_back(interpolated_slice(trajectory, problem.n_t, t));
    global_max = std::max(global_max, slices.back().maxCoeff());
  }
  const double scale =
      options.scale > 0.0 ? options.scale
                          : (global_max > 0.0 ? global_max : 1.0);

  std::vector<std::string> files;
  const bool png_output = channels == 3;
  for (size_t f = 0; f < options.times.size(); ++f) {
    const std::string stem = frame_stem(options.times[f]);
    const Vec& slice = slices[f];
    VectorMass frame_mass;
    frame_mass.values = slice;
    frame_mass.channels = channels;
    frame_mass.nodes = nodes;
    {
      std::ofstream csv(out_dir + "/" + stem + ".csv");
      require(csv.good(), ErrorCode::IOFailure, "cannot write frame CSV");
      csv.precision(17);
      csv << "channels=" << channels << '\n';
      for (int i = 0; i < nodes; ++i) {
        for (int c = 0; c < channels; ++c) {
          if (c) csv << ',';
          csv << slice[c * nodes + i];
        }
        csv << '\n';
      }
      require(csv.good(), ErrorCode::IOFailure, "frame CSV write failed");
      files.push_back(stem + ".csv");
    }
    if (png_output) {
      Rgb8Image image;
      image.width = width;
      image.height = height;
      image.pixels.assign(static_cast<size_t>(width) * height * 3, 0);
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          for (int c = 0; c < 3; ++c) {
            const double v = slice[c * nodes + y * width + x] / scale;
            image.at(x, y, c) = static_cast<std::uint8_t>(
                std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
          }
      write_png(image, out_dir + "/" + stem + ".png");
      files.push_back(stem + ".png");
    }
  }

  std::ofstream manifest(out_dir + "/manifest.json");
  require(manifest.good(), ErrorCode::IOFailure, "cannot write manifest");
  manifest.precision(17);
  manifest << "{\n";
  manifest << "  \"variant\": \"" << variant_name(problem.variant) << "\",\n";
  json_kv(manifest, "gamma", problem.gamma);
  manifest << "  \"n_t\": " << problem.n_t << ",\n";
  json_kv(manifest, "value", report.value);
  json_kv(manifest, "objective", report.objective);
  json_kv(manifest, "continuity_residual", report.continuity_residual);
  json_kv(manifest, "mass_drift", report.mass_drift);
  json_kv(manifest, "nonneg_violation", report.nonneg_violation);
  manifest << "  \"iterations\": " << report.iterations << ",\n";
  manifest << "  \"converged\": " << (report.converged ? "true" : "false")
           << ",\n";
  manifest << "  \"solver\": {\n";
  manifest << "    \"split_residual\": " << report.split_residual << ",\n";
  manifest << "    \"rel_obj_change\": " << report.rel_obj_change << ",\n";
  manifest << "    \"operator_norm\": " << report.operator_norm << ",\n";
  manifest << "    \"cg_iterations_total\": " << report.cg_iterations_total
           << ",\n";
  manifest << "    \"wall_time_seconds\": " << report.wall_time_seconds
           << "\n  },\n";
  json_kv(manifest, "render_scale", scale);
  manifest << "  \"frames\": [";
  for (size_t f = 0; f < options.times.size(); ++f)
    manifest << (f ? ", " : "") << options.times[f];
  manifest << "],\n";
  manifest << "  \"files\": [";
  for (size_t f = 0; f < files.size(); ++f)
    manifest << (f ? ", " : "") << '"' << files[f] << '"';
  manifest << "]\n}\n";
  require(manifest.good(), ErrorCode::IOFailure, "manifest write failed");
  files.push_back("manifest.json");
  return files;
}

}  // namespace vvot
