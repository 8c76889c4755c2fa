#include "vvot/io.hpp"

#include <fstream>
#include <sstream>

namespace vvot {

namespace {

Mat read_density_table(const std::string& path, int* channels_out) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IOFailure, "cannot open density file: " + path);
  std::string line;
  int channels = 1;
  std::vector<std::vector<double>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && line.rfind("channels=", 0) == 0) {
      channels = std::stoi(line.substr(9));
      require(channels >= 1, ErrorCode::UnsupportedFormat,
              "bad channel count in " + path);
      first = false;
      continue;
    }
    first = false;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "bad density value '" + field + "' in " + path);
      }
    }
    require(!row.empty(), ErrorCode::UnsupportedFormat,
            "empty density row in " + path);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::UnsupportedFormat,
          "density file has no data: " + path);
  const size_t width = rows.front().size();
  require(width == static_cast<size_t>(channels), ErrorCode::UnsupportedFormat,
          "density row width does not match channel count in " + path);
  Mat table(rows.size(), width);
  for (size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == width, ErrorCode::UnsupportedFormat,
            "ragged density rows in " + path);
    for (size_t c = 0; c < width; ++c) table(r, c) = rows[r][c];
  }
  if (channels_out) *channels_out = channels;
  return table;
}

}  // namespace

MassDistribution read_density_csv(const std::string& path) {
  int channels = 1;
  const Mat table = read_density_table(path, &channels);
  require(channels == 1, ErrorCode::UnsupportedFormat,
          "expected a scalar density file: " + path);
  return make_mass(table.col(0));
}

VectorMass read_vector_density_csv(const std::string& path) {
  int channels = 1;
  const Mat table = read_density_table(path, &channels);
  return make_vector_mass(Mat(table.transpose()));
}

VectorMass read_any_density_csv(const std::string& path) {
  int channels = 1;
  const Mat table = read_density_table(path, &channels);
  return make_vector_mass(Mat(table.transpose()));
}

RawDensity read_raw_density_csv(const std::string& path) {
  RawDensity raw;
  const Mat table = read_density_table(path, &raw.channels);
  raw.nodes = static_cast<int>(table.rows());
  raw.values.resize(raw.channels * raw.nodes);
  for (int c = 0; c < raw.channels; ++c)
    raw.values.segment(c * raw.nodes, raw.nodes) = table.col(c);
  return raw;
}

void write_density_csv(const Vec& values, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOFailure, "cannot write " + path);
  out.precision(17);
  for (int i = 0; i < values.size(); ++i) out << values[i] << '\n';
  require(out.good(), ErrorCode::IOFailure, "write failed: " + path);
}

void write_vector_density_csv(const VectorMass& mass,
                              const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IOFailure, "cannot write " + path);
  out.precision(17);
  out << "channels=" << mass.channels << '\n';
  for (int i = 0; i < mass.nodes; ++i) {
    for (int c = 0; c < mass.channels; ++c) {
      if (c) out << ',';
      out << mass(c, i);
    }
    out << '\n';
  }
  require(out.good(), ErrorCode::IOFailure, "write failed: " + path);
}

}  // namespace vvot
