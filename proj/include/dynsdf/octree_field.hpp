#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "dynsdf/types.hpp"

namespace dynsdf {

struct OctreeConfig {
  Vec3 origin = Vec3(-25.6, -25.6, -25.6);
  double leaf_size = 0.2;
  int max_depth = 8;       ///< D_max; root_size = leaf_size · 2^max_depth
  int feature_levels = 3;  ///< H, the number of deepest levels carrying embeddings
  int feature_dim = 8;     ///< F
  double init_scale = 1e-4;
  std::uint64_t seed = 1;
};

/// Integer lattice coordinate of a node or vertex at one feature level.
using GridKey = Eigen::Matrix<std::int64_t, 3, 1>;

/// Trilinear stencil of one query point at one feature level: the rows of
/// the eight surrounding vertex embeddings and their weights. Vertex v has
/// offset (v & 1, (v >> 1) & 1, (v >> 2) & 1) from the node's min corner.
struct LevelStencil {
  int level = 0;  ///< 0 = deepest feature level (D_max)
  std::array<std::uint32_t, 8> rows{};
  std::array<double, 8> weights{};
  Vec3 local = Vec3::Zero();  ///< normalized position inside the node
  double cell_size = 0.0;
};

using FeatureStencil = std::vector<LevelStencil>;

/// Sparse octree whose H deepest levels carry learnable embeddings on node
/// vertices. Nodes are stored as hashed integer keys per level; the tree
/// structure is implicit in the keys (a level-l node is the parent of the
/// eight level-(l-1) nodes whose keys floor-divide to it).
class FeatureOctree {
 public:
  explicit FeatureOctree(const OctreeConfig& config = {});

  /// Allocates every depth-D_max leaf containing one of `points`, growing
  /// the root toward points outside its bounds. Existing embeddings are
  /// left untouched.
  void allocate(std::span<const Vec3> points);

  /// True when the node containing `p` at feature level `level` is allocated.
  bool covered(const Vec3& p, int level) const;
  bool covered_all(const Vec3& p) const;

  Eigen::VectorXd interpolate_level(const Vec3& p, int depth) const;
  Eigen::VectorXd multires_feature(const Vec3& p) const;

  /// Trilinear stencils at every feature level; throws NotAllocatedError
  /// naming the first uncovered depth.
  FeatureStencil feature_gradient_weights(const Vec3& p) const;
  /// Same as feature_gradient_weights but reports a miss instead of throwing.
  bool try_stencil(const Vec3& p, FeatureStencil& out) const;

  /// Σ over levels and vertices of weight · embedding.
  void gather(const FeatureStencil& stencil, double* out) const;
  /// ∂F/∂p (F × 3) implied by the trilinear weights of `stencil`.
  Eigen::MatrixXd feature_jacobian(const FeatureStencil& stencil) const;

  const Vec3& origin() const { return origin_; }
  double root_size() const { return root_size_; }
  int max_depth() const { return max_depth_; }
  int feature_levels() const { return config_.feature_levels; }
  int feature_dim() const { return config_.feature_dim; }
  double leaf_size() const { return config_.leaf_size; }
  const OctreeConfig& config() const { return config_; }
  /// Octree depth of feature level `level` (level 0 is D_max).
  int depth_of_level(int level) const { return max_depth_ - level; }
  double cell_size(int level) const { return config_.leaf_size * static_cast<double>(1 << level); }

  std::size_t leaf_count() const { return nodes_[0].size(); }
  std::size_t node_count(int level) const { return nodes_[level].size(); }
  std::size_t vertex_count(int level) const { return vertex_keys_[level].size(); }

  /// Row-major (vertex_count × F) embedding table of one level.
  std::vector<double>& embeddings(int level) { return embeddings_[level]; }
  const std::vector<double>& embeddings(int level) const { return embeddings_[level]; }
  const std::vector<GridKey>& vertex_keys(int level) const { return vertex_keys_[level]; }
  std::vector<GridKey> leaf_keys() const;

  /// World-space min corner of a level node.
  Vec3 node_min(const GridKey& key, int level) const;
  /// Bounding box of all allocated leaves; false when the tree is empty.
  bool leaf_bounds(Vec3& lo, Vec3& hi) const;

  // Checkpoint support.
  Vec3 anchor() const { return anchor_; }
  void restore(const Vec3& origin, double root_size, int max_depth, std::span<const GridKey> leaves,
               const std::vector<std::vector<GridKey>>& vertex_keys,
               const std::vector<std::vector<double>>& embeddings);

 private:
  struct KeyHash {
    std::size_t operator()(std::uint64_t k) const noexcept;
  };
  using NodeSet = std::unordered_set<std::uint64_t, KeyHash>;
  using VertexMap = std::unordered_map<std::uint64_t, std::uint32_t, KeyHash>;

  static std::uint64_t pack(const GridKey& key);
  GridKey leaf_key(const Vec3& p) const;
  bool inside_root(const Vec3& p) const;
  void grow_toward(const Vec3& p);
  void add_vertex(int level, const GridKey& key);
  bool level_stencil(const Vec3& p, int level, LevelStencil& out) const;

  OctreeConfig config_;
  Vec3 anchor_;  // fixed lattice anchor; keys are relative to it
  Vec3 origin_;
  double root_size_;
  int max_depth_;
  std::vector<NodeSet> nodes_;
  std::vector<VertexMap> vertex_rows_;
  std::vector<std::vector<GridKey>> vertex_keys_;
  std::vector<std::vector<double>> embeddings_;
};

}  // namespace dynsdf
