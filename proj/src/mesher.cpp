#include "dynsdf/mesher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "mc_tables.inc"

namespace dynsdf {

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

int grid_points(double extent, double resolution) {
  if (!(resolution > 0.0)) throw ValidationError("grid resolution must be positive");
  if (extent < 0.0) throw ValidationError("grid extent must be nonnegative");
  return static_cast<int>(std::ceil(extent / resolution - 1e-9)) + 1;
}

SdfGrid sample_grid(const Vec3& lo, const Vec3& hi, double resolution, const OptionalField& field, double sentinel) {
  SdfGrid g;
  g.min = lo;
  g.resolution = resolution;
  g.nx = grid_points(hi.x() - lo.x(), resolution);
  g.ny = grid_points(hi.y() - lo.y(), resolution);
  g.nz = grid_points(hi.z() - lo.z(), resolution);
  const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny * g.nz;
  g.values.assign(n, sentinel);
  g.covered.assign(n, 0);
  for (int k = 0; k < g.nz; ++k) {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const auto v = field(g.corner(i, j, k));
        if (!v) continue;
        const auto idx = g.index(i, j, k);
        g.values[idx] = *v;
        g.covered[idx] = 1;
      }
    }
  }
  return g;
}

SdfGrid sample_grid(const NeuralField& field, double resolution, double sentinel) {
  if (!(resolution > 0.0)) throw ValidationError("grid resolution must be positive");
  Vec3 lo, hi;
  if (!field.octree().leaf_bounds(lo, hi)) {
    return sample_grid(Vec3::Zero(), Vec3::Constant(resolution), resolution,
                       [](const Vec3&) { return std::optional<double>(); }, sentinel);
  }
  SdfGrid g;
  g.min = lo;
  g.resolution = resolution;
  g.nx = grid_points(hi.x() - lo.x(), resolution);
  g.ny = grid_points(hi.y() - lo.y(), resolution);
  g.nz = grid_points(hi.z() - lo.z(), resolution);
  const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny * g.nz;
  g.values.assign(n, sentinel);
  g.covered.assign(n, 0);

  // One z-slab at a time keeps the batch small enough for the field's chunking.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Vec3> slab(static_cast<std::size_t>(g.nx) * g.ny);
  for (int k = 0; k < g.nz; ++k) {
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) slab[static_cast<std::size_t>(j) * g.nx + i] = g.corner(i, j, k);
    }
    const auto values = field.evaluate(slab, nan);
    const std::size_t base = g.index(0, 0, k);
    for (std::size_t s = 0; s < slab.size(); ++s) {
      if (std::isnan(values[s])) continue;
      g.values[base + s] = values[s];
      g.covered[base + s] = 1;
    }
  }
  return g;
}

Mesh marching_cubes(const SdfGrid& grid, double iso) {
  Mesh mesh;
  if (grid.nx < 2 || grid.ny < 2 || grid.nz < 2) return mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

  // Edge id: the lower corner's linear index times 3 plus the axis.
  auto edge_id = [&](int i, int j, int k, int e) {
    const int a = kEdge[e][0], b = kEdge[e][1];
    const int ci = i + std::min(kCorner[a][0], kCorner[b][0]);
    const int cj = j + std::min(kCorner[a][1], kCorner[b][1]);
    const int ck = k + std::min(kCorner[a][2], kCorner[b][2]);
    int axis = 0;
    if (kCorner[a][1] != kCorner[b][1]) axis = 1;
    if (kCorner[a][2] != kCorner[b][2]) axis = 2;
    return static_cast<std::uint64_t>(grid.index(ci, cj, ck)) * 3 + axis;
  };

  std::array<double, 8> val;
  std::array<std::uint32_t, 12> vid;
  for (int k = 0; k + 1 < grid.nz; ++k) {
    for (int j = 0; j + 1 < grid.ny; ++j) {
      for (int i = 0; i + 1 < grid.nx; ++i) {
        bool ok = true;
        int cube = 0;
        for (int c = 0; c < 8 && ok; ++c) {
          const auto idx = grid.index(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          ok = grid.covered[idx] != 0;
          val[c] = grid.values[idx];
          if (val[c] < iso) cube |= 1 << c;
        }
        if (!ok) continue;
        const int edges = kEdgeTable[cube];
        if (edges == 0) continue;
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1 << e))) continue;
          const auto id = edge_id(i, j, k, e);
          auto [it, inserted] = edge_vertex.try_emplace(id, static_cast<std::uint32_t>(mesh.vertices.size()));
          if (inserted) {
            const int a = kEdge[e][0], b = kEdge[e][1];
            const Vec3 pa = grid.corner(i + kCorner[a][0], j + kCorner[a][1], k + kCorner[a][2]);
            const Vec3 pb = grid.corner(i + kCorner[b][0], j + kCorner[b][1], k + kCorner[b][2]);
            const double denom = val[b] - val[a];
            const double t = std::abs(denom) < 1e-300 ? 0.5 : (iso - val[a]) / denom;
            mesh.vertices.push_back(pa + std::clamp(t, 0.0, 1.0) * (pb - pa));
          }
          vid[e] = it->second;
        }
        for (int t = 0; kTriTable[cube][t] != -1; t += 3) {
          // Reversed table order so normals point toward positive values.
          const std::array<std::uint32_t, 3> tri{vid[kTriTable[cube][t]], vid[kTriTable[cube][t + 2]],
                                                 vid[kTriTable[cube][t + 1]]};
          if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
          mesh.triangles.push_back(tri);
        }
      }
    }
  }
  return mesh;
}

}  // namespace dynsdf
