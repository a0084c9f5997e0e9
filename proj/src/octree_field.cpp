#include "dynsdf/octree_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dynsdf {

namespace {

constexpr std::int64_t kKeyOffset = std::int64_t{1} << 20;
constexpr std::int64_t kKeyMask = (std::int64_t{1} << 21) - 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Snaps lattice coordinates that are within rounding noise of an integer.
double snapped_floor(double u, double& frac) {
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-9) {
    frac = 0.0;
    return r;
  }
  const double f = std::floor(u);
  frac = u - f;
  return f;
}

}  // namespace

std::size_t FeatureOctree::KeyHash::operator()(std::uint64_t k) const noexcept {
  return static_cast<std::size_t>(splitmix64(k));
}

FeatureOctree::FeatureOctree(const OctreeConfig& config)
    : config_(config),
      anchor_(config.origin),
      origin_(config.origin),
      root_size_(config.leaf_size * std::ldexp(1.0, config.max_depth)),
      max_depth_(config.max_depth) {
  if (!(config.leaf_size > 0.0)) throw ValidationError("leaf size must be positive");
  if (config.feature_levels < 1 || config.feature_levels > config.max_depth + 1) {
    throw ValidationError("feature levels must satisfy 1 <= H <= D_max + 1");
  }
  if (config.feature_dim < 1) throw ValidationError("feature dimension must be positive");
  const auto levels = static_cast<std::size_t>(config.feature_levels);
  nodes_.resize(levels);
  vertex_rows_.resize(levels);
  vertex_keys_.resize(levels);
  embeddings_.resize(levels);
}

std::uint64_t FeatureOctree::pack(const GridKey& key) {
  std::uint64_t out = 0;
  for (int a = 0; a < 3; ++a) {
    const std::int64_t shifted = key[a] + kKeyOffset;
    if (shifted < 0 || shifted > kKeyMask) throw ValidationError("octree key out of range");
    out |= static_cast<std::uint64_t>(shifted) << (21 * a);
  }
  return out;
}

GridKey FeatureOctree::leaf_key(const Vec3& p) const {
  GridKey key;
  for (int a = 0; a < 3; ++a) {
    double frac;
    key[a] = static_cast<std::int64_t>(snapped_floor((p[a] - anchor_[a]) / config_.leaf_size, frac));
  }
  return key;
}

Vec3 FeatureOctree::node_min(const GridKey& key, int level) const {
  return anchor_ + key.cast<double>() * cell_size(level);
}

bool FeatureOctree::inside_root(const Vec3& p) const {
  for (int a = 0; a < 3; ++a) {
    if (p[a] < origin_[a] || p[a] >= origin_[a] + root_size_) return false;
  }
  return true;
}

void FeatureOctree::grow_toward(const Vec3& p) {
  for (int a = 0; a < 3; ++a) {
    if (p[a] < origin_[a]) origin_[a] -= root_size_;
  }
  root_size_ *= 2.0;
  ++max_depth_;
}

void FeatureOctree::add_vertex(int level, const GridKey& key) {
  const auto packed = pack(key);
  auto [it, inserted] = vertex_rows_[level].try_emplace(packed, static_cast<std::uint32_t>(vertex_keys_[level].size()));
  if (!inserted) return;
  vertex_keys_[level].push_back(key);
  auto& table = embeddings_[level];
  const int F = config_.feature_dim;
  // Values depend only on (seed, level, key, component) so allocation order
  // never changes the initial field.
  std::uint64_t h = splitmix64(config_.seed ^ splitmix64(packed + 0x51ed2701ULL * static_cast<std::uint64_t>(level + 1)));
  for (int c = 0; c < F; ++c) {
    h = splitmix64(h);
    const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
    table.push_back(config_.init_scale * (2.0 * unit - 1.0));
  }
}

void FeatureOctree::allocate(std::span<const Vec3> points) {
  for (const auto& p : points) {
    if (!p.allFinite()) throw ValidationError("cannot allocate a non-finite point");
    int guard = 0;
    while (!inside_root(p)) {
      if (++guard > 20) throw ValidationError("point too far outside the octree root");
      grow_toward(p);
    }
    const GridKey leaf = leaf_key(p);
    if (nodes_[0].contains(pack(leaf))) continue;
    for (int level = 0; level < config_.feature_levels; ++level) {
      const std::int64_t div = std::int64_t{1} << level;
      const GridKey node(floor_div(leaf[0], div), floor_div(leaf[1], div), floor_div(leaf[2], div));
      if (!nodes_[level].insert(pack(node)).second) continue;
      for (int v = 0; v < 8; ++v) {
        add_vertex(level, node + GridKey(v & 1, (v >> 1) & 1, (v >> 2) & 1));
      }
    }
  }
}

bool FeatureOctree::level_stencil(const Vec3& p, int level, LevelStencil& out) const {
  const double cell = cell_size(level);
  GridKey key;
  Vec3 local;
  for (int a = 0; a < 3; ++a) {
    double frac;
    key[a] = static_cast<std::int64_t>(snapped_floor((p[a] - anchor_[a]) / cell, frac));
    local[a] = frac;
  }
  const auto& nodes = nodes_[level];
  if (!nodes.contains(pack(key))) {
    // A point on a node face belongs to both neighbors; try the lower ones.
    bool found = false;
    for (int m = 1; m < 8 && !found; ++m) {
      GridKey alt = key;
      Vec3 alt_local = local;
      bool valid = true;
      for (int a = 0; a < 3; ++a) {
        if (m & (1 << a)) {
          if (local[a] != 0.0) { valid = false; break; }
          alt[a] -= 1;
          alt_local[a] = 1.0;
        }
      }
      if (valid && nodes.contains(pack(alt))) {
        key = alt;
        local = alt_local;
        found = true;
      }
    }
    if (!found) return false;
  }
  out.level = level;
  out.local = local;
  out.cell_size = cell;
  const auto& rows = vertex_rows_[level];
  for (int v = 0; v < 8; ++v) {
    const int dx = v & 1, dy = (v >> 1) & 1, dz = (v >> 2) & 1;
    out.rows[v] = rows.at(pack(key + GridKey(dx, dy, dz)));
    out.weights[v] = (dx ? local.x() : 1.0 - local.x()) * (dy ? local.y() : 1.0 - local.y()) *
                     (dz ? local.z() : 1.0 - local.z());
  }
  return true;
}

bool FeatureOctree::covered(const Vec3& p, int level) const {
  LevelStencil s;
  return level_stencil(p, level, s);
}

bool FeatureOctree::covered_all(const Vec3& p) const {
  FeatureStencil s;
  return try_stencil(p, s);
}

bool FeatureOctree::try_stencil(const Vec3& p, FeatureStencil& out) const {
  out.resize(static_cast<std::size_t>(config_.feature_levels));
  for (int level = 0; level < config_.feature_levels; ++level) {
    if (!level_stencil(p, level, out[level])) return false;
  }
  return true;
}

FeatureStencil FeatureOctree::feature_gradient_weights(const Vec3& p) const {
  FeatureStencil out(static_cast<std::size_t>(config_.feature_levels));
  for (int level = 0; level < config_.feature_levels; ++level) {
    if (!level_stencil(p, level, out[level])) {
      throw NotAllocatedError("point not covered at octree depth " + std::to_string(depth_of_level(level)),
                              depth_of_level(level));
    }
  }
  return out;
}

void FeatureOctree::gather(const FeatureStencil& stencil, double* out) const {
  const int F = config_.feature_dim;
  std::fill(out, out + F, 0.0);
  for (const auto& s : stencil) {
    const double* table = embeddings_[s.level].data();
    for (int v = 0; v < 8; ++v) {
      const double w = s.weights[v];
      if (w == 0.0) continue;
      const double* e = table + static_cast<std::size_t>(s.rows[v]) * F;
      for (int c = 0; c < F; ++c) out[c] += w * e[c];
    }
  }
}

Eigen::MatrixXd FeatureOctree::feature_jacobian(const FeatureStencil& stencil) const {
  const int F = config_.feature_dim;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(F, 3);
  for (const auto& s : stencil) {
    const double* table = embeddings_[s.level].data();
    const Vec3& u = s.local;
    for (int v = 0; v < 8; ++v) {
      const int d[3] = {v & 1, (v >> 1) & 1, (v >> 2) & 1};
      const double f[3] = {d[0] ? u.x() : 1.0 - u.x(), d[1] ? u.y() : 1.0 - u.y(), d[2] ? u.z() : 1.0 - u.z()};
      const double* e = table + static_cast<std::size_t>(s.rows[v]) * F;
      for (int a = 0; a < 3; ++a) {
        const double dw = (d[a] ? 1.0 : -1.0) * f[(a + 1) % 3] * f[(a + 2) % 3] / s.cell_size;
        for (int c = 0; c < F; ++c) J(c, a) += dw * e[c];
      }
    }
  }
  return J;
}

Eigen::VectorXd FeatureOctree::interpolate_level(const Vec3& p, int depth) const {
  const int level = max_depth_ - depth;
  if (level < 0 || level >= config_.feature_levels) {
    throw ValidationError("depth " + std::to_string(depth) + " carries no embeddings");
  }
  LevelStencil s;
  if (!level_stencil(p, level, s)) {
    throw NotAllocatedError("point not covered at octree depth " + std::to_string(depth), depth);
  }
  Eigen::VectorXd out(config_.feature_dim);
  gather(FeatureStencil{s}, out.data());
  return out;
}

Eigen::VectorXd FeatureOctree::multires_feature(const Vec3& p) const {
  const auto stencil = feature_gradient_weights(p);
  Eigen::VectorXd out(config_.feature_dim);
  gather(stencil, out.data());
  return out;
}

std::vector<GridKey> FeatureOctree::leaf_keys() const {
  std::vector<GridKey> keys;
  keys.reserve(nodes_[0].size());
  for (auto packed : nodes_[0]) {
    GridKey k;
    for (int a = 0; a < 3; ++a) k[a] = static_cast<std::int64_t>((packed >> (21 * a)) & kKeyMask) - kKeyOffset;
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end(), [](const GridKey& a, const GridKey& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  return keys;
}

bool FeatureOctree::leaf_bounds(Vec3& lo, Vec3& hi) const {
  if (nodes_[0].empty()) return false;
  GridKey kmin = GridKey::Constant(std::numeric_limits<std::int64_t>::max());
  GridKey kmax = GridKey::Constant(std::numeric_limits<std::int64_t>::min());
  for (auto packed : nodes_[0]) {
    for (int a = 0; a < 3; ++a) {
      const std::int64_t k = static_cast<std::int64_t>((packed >> (21 * a)) & kKeyMask) - kKeyOffset;
      kmin[a] = std::min(kmin[a], k);
      kmax[a] = std::max(kmax[a], k);
    }
  }
  lo = node_min(kmin, 0);
  hi = node_min(kmax + GridKey::Ones(), 0);
  return true;
}

void FeatureOctree::restore(const Vec3& origin, double root_size, int max_depth, std::span<const GridKey> leaves,
                            const std::vector<std::vector<GridKey>>& vertex_keys,
                            const std::vector<std::vector<double>>& embeddings) {
  const auto levels = static_cast<std::size_t>(config_.feature_levels);
  if (vertex_keys.size() != levels || embeddings.size() != levels) {
    throw FormatError("checkpoint level count does not match the octree configuration");
  }
  origin_ = origin;
  root_size_ = root_size;
  max_depth_ = max_depth;
  for (auto& n : nodes_) n.clear();
  for (const auto& leaf : leaves) {
    for (int level = 0; level < config_.feature_levels; ++level) {
      const std::int64_t div = std::int64_t{1} << level;
      nodes_[level].insert(pack(GridKey(floor_div(leaf[0], div), floor_div(leaf[1], div), floor_div(leaf[2], div))));
    }
  }
  for (std::size_t level = 0; level < levels; ++level) {
    if (embeddings[level].size() != vertex_keys[level].size() * static_cast<std::size_t>(config_.feature_dim)) {
      throw FormatError("checkpoint embedding table has the wrong size");
    }
    vertex_rows_[level].clear();
    for (std::size_t i = 0; i < vertex_keys[level].size(); ++i) {
      vertex_rows_[level].emplace(pack(vertex_keys[level][i]), static_cast<std::uint32_t>(i));
    }
    vertex_keys_[level] = vertex_keys[level];
    embeddings_[level] = embeddings[level];
  }
}

}  // namespace dynsdf
