#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynsdf/io.hpp"

namespace dynsdf {

/// Static 3-d tree for nearest-neighbor distance queries.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points);
  /// Euclidean distance from q to the nearest stored point.
  double nearest_distance(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // leaf range into points_ when axis < 0
    int axis;
    double split;
    std::int32_t left, right;
  };
  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, double& best2) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
};

/// Area-weighted uniform samples on the mesh surface.
std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

/// Nearest-neighbor distance from every query point to `reference`.
std::vector<double> nearest_distances(std::span<const Vec3> query, std::span<const Vec3> reference);

/// Mean distance from pred to gt (meters).
double accuracy(std::span<const Vec3> pred, std::span<const Vec3> gt);
/// Mean distance from gt to pred (meters).
double completion(std::span<const Vec3> pred, std::span<const Vec3> gt);
double chamfer_l1(std::span<const Vec3> pred, std::span<const Vec3> gt);
/// Harmonic mean of precision and recall at threshold tau, in percent.
double f_score(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau);

/// Best rigid transform mapping `from` onto `to` in the least-squares sense.
RigidTransform kabsch(std::span<const Vec3> from, std::span<const Vec3> to);
/// RMSE of translation residuals after rigidly aligning est to gt.
double ate_rmse(std::span<const RigidTransform> est, std::span<const RigidTransform> gt);

struct MetricsReport {
  double accuracy_cm = 0.0;
  double completion_cm = 0.0;
  double chamfer_l1_cm = 0.0;
  double f_score_pct = 0.0;
  double tau_m = 0.1;
  std::optional<double> ate_rmse_m;

  /// Fixed-width table, columns Comp. Acc. C-l1 F-score (and ATE if present).
  std::string table() const;
  /// Single-line JSON record.
  std::string json() const;
};

MetricsReport evaluate_points(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau);

}  // namespace dynsdf
