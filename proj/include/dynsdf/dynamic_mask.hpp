#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dynsdf/io.hpp"
#include "dynsdf/types.hpp"

namespace dynsdf {

/// Axis-aligned world-XY footprint of a moving object's box.
struct DynamicMask {
  int track_id = 0;
  int created_frame = 0;
  Vec2 p_l = Vec2::Zero();  ///< lower corner
  Vec2 p_r = Vec2::Zero();  ///< upper corner
  Vec3 center = Vec3::Zero();  ///< R·P_c + T at creation
  double height = 0.0;         ///< source box h

  double center_y() const { return center.y(); }
  double area() const { return (p_r - p_l).prod(); }
  bool contains_xy(const Vec3& p) const {
    return p.x() >= p_l.x() && p.x() <= p_r.x() && p.y() >= p_l.y() && p.y() <= p_r.y();
  }
  /// Euclidean XY distance to the closest rectangle point, 0 inside.
  double xy_distance(const Vec3& p) const;
};

DynamicMask box_to_mask(const Box3D& box, const RigidTransform& pose);

/// The global list of dynamic masks. Masks whose creation-time center lies
/// behind the sensor along `axis` are dropped on every update.
class DynamicList {
 public:
  explicit DynamicList(int axis = 1) : axis_(axis) {}

  /// Appends a mask per box, then removes masks with center[axis] < T[axis].
  /// Throws ValidationError on a duplicate (track_id, created_frame).
  void update(std::span<const Box3D> new_boxes, const RigidTransform& pose);

  const std::vector<DynamicMask>& masks() const { return masks_; }
  bool empty() const { return masks_.empty(); }
  std::size_t size() const { return masks_.size(); }
  bool contains_xy(const Vec3& p) const;
  int axis() const { return axis_; }

 private:
  int axis_;
  std::vector<DynamicMask> masks_;
};

enum class PointLabel : int { Ground = 0, StaticNonGround = 1, DynamicForeground = 2, SynthesizedGround = 3 };

struct GroundParams {
  double inlier_threshold = 0.15;
  int iterations = 200;
  double candidate_fraction = 0.3;  ///< fraction of the z-range admitted as candidates
  double max_slope_deg = 30.0;
  std::uint64_t seed = 7;
};

class NoGroundPlaneError : public Error {
 public:
  using Error::Error;
};

/// RANSAC ground plane on the world-frame points of `scan`; flags inliers.
/// Throws NoGroundPlaneError for < 3 candidates or degenerate support.
std::vector<bool> classify_ground(const Scan& scan, const GroundParams& params = {});

/// Same as above on points that are already in the world frame.
std::vector<bool> classify_ground_points(std::span<const Vec3> world_points,
                                         const GroundParams& params = {});

std::vector<PointLabel> label_points(const Scan& scan, const DynamicList& list,
                                     const std::vector<bool>& ground_flags);

struct InfillResult {
  std::vector<Vec3> points;
  double mean_height = 0.0;
  std::size_t support = 0;
  bool insufficient_support = false;
};

/// Averages the height of ground points within `r` of the mask and scatters
/// `n` points uniformly over the mask rectangle at that height.
InfillResult infill_ground(const DynamicMask& mask, std::span<const Vec3> ground_points,
                           double r, std::size_t n, std::uint64_t seed);

/// ceil(area · density), density in points per square meter.
std::size_t default_infill_count(const DynamicMask& mask, double density = 100.0);

}  // namespace dynsdf
