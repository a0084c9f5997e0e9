#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dynsdf/io.hpp"
#include "dynsdf/neural_field.hpp"

namespace dynsdf {

/// Scalar samples on a regular lattice of corners.
struct SdfGrid {
  Vec3 min = Vec3::Zero();
  double resolution = 0.1;
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> values;  // x fastest
  std::vector<std::uint8_t> covered;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  Vec3 corner(int i, int j, int k) const { return min + resolution * Vec3(i, j, k); }
  std::size_t size() const { return values.size(); }
};

/// Corners per axis for an extent: ceil(extent / resolution) + 1.
int grid_points(double extent, double resolution);

using OptionalField = std::function<std::optional<double>(const Vec3&)>;

/// Samples `field` on the lattice spanning [lo, hi]; corners where the field
/// has no value get `sentinel`.
SdfGrid sample_grid(const Vec3& lo, const Vec3& hi, double resolution, const OptionalField& field, double sentinel);

/// Samples the neural field over the bounds of its allocated leaves. An
/// empty octree yields a single all-sentinel cell at the origin.
SdfGrid sample_grid(const NeuralField& field, double resolution, double sentinel);

/// Triangulates the `iso` level set. Cells touching an uncovered corner are
/// skipped; vertices on shared edges are emitted once.
Mesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

}  // namespace dynsdf
