#include "dynsdf/synth.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dynsdf {

bool Aabb::contains(const Vec3& p, double tol) const {
  return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
}

std::optional<double> Aabb::intersect(const Vec3& o, const Vec3& d, double t_min, double t_max) const {
  double t0 = t_min, t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= t_min) return std::nullopt;  // origin inside the box
  return t0;
}

Aabb MovingBox::at(std::size_t frame) const {
  const Vec3 half(0.5 * w, 0.5 * l, 0.5 * h);
  return {centers[frame] - half, centers[frame] + half};
}

namespace {

std::optional<double> cast(const SceneSpec& spec, const Vec3& o, const Vec3& d, std::size_t frame, bool with_movers) {
  const double t_min = spec.lidar.min_range;
  double best = spec.lidar.max_range;
  bool hit = false;
  if (spec.has_ground && d.z() < 0.0) {
    const double t = (spec.ground_z - o.z()) / d.z();
    if (t > t_min && t <= best) {
      best = t;
      hit = true;
    }
  }
  auto test = [&](const Aabb& box) {
    if (auto t = box.intersect(o, d, t_min, best)) {
      best = *t;
      hit = true;
    }
  };
  for (const auto& box : spec.statics) test(box);
  if (with_movers) {
    for (const auto& m : spec.movers) test(m.at(frame));
  }
  if (!hit) return std::nullopt;
  return best;
}

}  // namespace

SyntheticScene synth_generate(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.poses.empty()) throw ValidationError("scene has no frames");
  if (!spec.has_ground && spec.statics.empty()) throw ValidationError("scene has no static surface");
  if (spec.lidar.rings < 1 || spec.lidar.azimuths < 1 || spec.lidar.gt_oversample < 1) throw ValidationError("lidar needs at least one ray");
  for (const auto& m : spec.movers) {
    if (m.centers.size() != spec.poses.size()) throw ValidationError("moving box needs one center per frame");
    if (!(m.h > 0 && m.w > 0 && m.l > 0)) throw ValidationError("moving box dimensions must be positive");
  }

  SyntheticScene scene;
  scene.poses = spec.poses;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 1.0);
  const double deg = std::numbers::pi / 180.0;
  const auto& lidar = spec.lidar;

  for (std::size_t f = 0; f < spec.poses.size(); ++f) {
    const auto& pose = spec.poses[f];
    Scan scan;
    scan.frame_id = static_cast<int>(f);
    scan.pose = pose;
    const double offset = lidar.azimuth_jitter ? phase(rng) : 0.0;
    for (int r = 0; r < lidar.rings; ++r) {
      const double t = lidar.rings == 1 ? 0.5 : static_cast<double>(r) / (lidar.rings - 1);
      const double elev = (lidar.elevation_min_deg + t * (lidar.elevation_max_deg - lidar.elevation_min_deg)) * deg;
      for (int a = 0; a < lidar.azimuths; ++a) {
        const double az = 2.0 * std::numbers::pi * (a + offset) / lidar.azimuths;
        const Vec3 dir_sensor(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
        const Vec3 dir = pose.R * dir_sensor;
        if (auto hit = cast(spec, pose.T, dir, f, true)) scan.points.push_back(*hit * dir_sensor);
      }
    }
    const int gr = lidar.rings * lidar.gt_oversample, ga = lidar.azimuths * lidar.gt_oversample;
    for (int r = 0; r < gr; ++r) {
      const double t = gr == 1 ? 0.5 : static_cast<double>(r) / (gr - 1);
      const double elev = (lidar.elevation_min_deg + t * (lidar.elevation_max_deg - lidar.elevation_min_deg)) * deg;
      for (int a = 0; a < ga; ++a) {
        const double az = 2.0 * std::numbers::pi * (a + offset) / ga;
        const Vec3 dir = pose.R * Vec3(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
        if (auto hit = cast(spec, pose.T, dir, f, false)) scene.gt_points.push_back(pose.T + *hit * dir);
      }
    }
    scene.scans.push_back(std::move(scan));

    for (const auto& m : spec.movers) {
      Box3D box;
      box.frame_id = static_cast<int>(f);
      box.track_id = m.track_id;
      box.center = pose.R.transpose() * (m.centers[f] - pose.T);
      box.h = m.h;
      box.w = m.w;
      box.l = m.l;
      scene.tracks.push_back(box);
    }
  }
  return scene;
}

SceneSpec default_static_spec(int frames) {
  SceneSpec spec;
  spec.statics = {
      {Vec3(3.0, 1.0, 0.0), Vec3(5.0, 4.0, 1.5)},
      {Vec3(-5.5, 5.0, 0.0), Vec3(-3.5, 7.0, 2.0)},
      {Vec3(3.5, 9.0, 0.0), Vec3(5.0, 12.0, 1.0)},
  };
  for (int f = 0; f < frames; ++f) spec.poses.push_back({Mat3::Identity(), Vec3(0.0, 0.5 * f, 1.8)});
  return spec;
}

SceneSpec default_dynamic_spec(int frames) {
  SceneSpec spec = default_static_spec(frames);
  MovingBox car;
  car.track_id = 1;
  for (int f = 0; f < frames; ++f) {
    const double s = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.0;
    car.centers.emplace_back(-1.0 + 2.0 * s, 5.0 + 0.8 * f, 0.5 * car.h);
  }
  spec.movers.push_back(car);
  return spec;
}

}  // namespace dynsdf
