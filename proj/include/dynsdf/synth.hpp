#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dynsdf/io.hpp"

namespace dynsdf {

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p, double tol = 0.0) const;
  /// Entry distance of the ray o + t·d, if it hits within (t_min, t_max).
  std::optional<double> intersect(const Vec3& o, const Vec3& d, double t_min, double t_max) const;
};

/// Axis-aligned moving box with one world-frame center per frame.
struct MovingBox {
  int track_id = 0;
  double h = 1.5, w = 1.8, l = 4.0;
  std::vector<Vec3> centers;

  Aabb at(std::size_t frame) const;
};

/// Spinning LiDAR: `rings` elevation angles spread over [elev_min, elev_max]
/// and `azimuths` columns per revolution.
struct LidarModel {
  int rings = 24;
  int azimuths = 160;
  double elevation_min_deg = -25.0;
  double elevation_max_deg = 3.0;
  double min_range = 0.5;
  double max_range = 15.0;
  bool azimuth_jitter = true;  ///< random per-scan phase offset
  /// Ground truth is cast with this many times more rings and azimuths.
  int gt_oversample = 3;
};

struct SceneSpec {
  bool has_ground = true;
  double ground_z = 0.0;
  std::vector<Aabb> statics;
  std::vector<MovingBox> movers;
  std::vector<RigidTransform> poses;  ///< one per frame, sensor → world
  LidarModel lidar;
};

struct SyntheticScene {
  std::vector<Scan> scans;
  std::vector<RigidTransform> poses;
  std::vector<Box3D> tracks;
  /// Static geometry only, seen from every pose by a denser scanner.
  std::vector<Vec3> gt_points;
};

SyntheticScene synth_generate(const SceneSpec& spec, std::uint64_t seed);

/// Ground plane and three static boxes; sensor 1.8 m above ground moving
/// 0.5 m per frame along +y.
SceneSpec default_static_spec(int frames = 20);
/// The static scene plus one vehicle driving ahead of the sensor and
/// drifting across the lane.
SceneSpec default_dynamic_spec(int frames = 20);

}  // namespace dynsdf
