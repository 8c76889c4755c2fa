#pragma once

#include <string>

#include "vvot/transport.hpp"
#include "vvot/types.hpp"

namespace vvot {

/// Density CSV: one row per node. Vector-valued files carry M comma
/// separated columns per row and a leading "channels=M" header line;
/// scalar files may omit the header. Values round-trip at full precision.
MassDistribution read_density_csv(const std::string& path);
VectorMass read_vector_density_csv(const std::string& path);
void write_density_csv(const Vec& values, const std::string& path);
void write_vector_density_csv(const VectorMass& mass, const std::string& path);

/// Reads either form; scalar densities come back with channels = 1.
VectorMass read_any_density_csv(const std::string& path);

/// Same format without the unit-mass validation, for trajectory frames and
/// other solver outputs that only sum to one within solver tolerance.
struct RawDensity {
  Vec values;  // channel-major composite layout
  int channels = 1;
  int nodes = 0;
};
RawDensity read_raw_density_csv(const std::string& path);

}  // namespace vvot
