#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vvot/transport.hpp"
#include "vvot/types.hpp"

namespace vvot {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int x, int y, int c) {
    return pixels[3 * (y * width + x) + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[3 * (y * width + x) + c];
  }
};

Rgb8Image read_png(const std::string& path);
void write_png(const Rgb8Image& image, const std::string& path);

/// A color image as a jointly normalized three-channel mass over the pixel
/// grid (node index y*width + x). The pre-normalization total intensity and
/// the applied floor are kept so frames can be rendered back at a
/// comparable brightness.
struct ImageDensity {
  int width = 0;
  int height = 0;
  VectorMass mass;              // 3 channels
  double total_intensity = 0;   // sum of [0,1] intensities before normalizing
  double floor_applied = 0;     // the epsilon floor in intensity units
};

/// Loads an 8-bit RGB PNG, maps intensities to [0,1], floors them at
/// 1e-6 * max and normalizes jointly to total mass one. All-black images
/// are rejected.
ImageDensity load_image(const std::string& path);

struct FrameRenderOptions {
  std::vector<double> times;  // within [0,1]
  // One intensity scale shared by every frame; 0 picks the global maximum
  // density over all rendered frames.
  double scale = 0.0;
};

/// Renders trajectory slices at the requested times (linear interpolation
/// between adjacent slices) as PNG frames named frame_t<t>.png plus raw
/// per-frame CSVs, and writes a manifest.json describing the run. Returns
/// the written file names. PNG output needs 3 channels; other channel
/// counts get CSV frames only.
std::vector<std::string> render_frames(const TransportProblem& problem,
                                       const Trajectory& trajectory,
                                       const DistanceReport& report,
                                       int width, int height,
                                       const std::string& out_dir,
                                       const FrameRenderOptions& options);

}  // namespace vvot
