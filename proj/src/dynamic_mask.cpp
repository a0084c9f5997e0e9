#include "dynsdf/dynamic_mask.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/SVD>

namespace dynsdf {

double DynamicMask::xy_distance(const Vec3& p) const {
  const double dx = std::max({p_l.x() - p.x(), 0.0, p.x() - p_r.x()});
  const double dy = std::max({p_l.y() - p.y(), 0.0, p.y() - p_r.y()});
  return std::hypot(dx, dy);
}

DynamicMask box_to_mask(const Box3D& box, const RigidTransform& pose) {
  const Vec3 rotated = pose.R * box.center;
  DynamicMask mask;
  mask.track_id = box.track_id;
  mask.created_frame = box.frame_id;
  mask.p_l = Vec2(rotated.x() + pose.T.x() - box.w / 2, rotated.y() + pose.T.y() - box.l / 2);
  mask.p_r = Vec2(rotated.x() + pose.T.x() + box.w / 2, rotated.y() + pose.T.y() + box.l / 2);
  mask.center = rotated + pose.T;
  mask.height = box.h;
  return mask;
}

void DynamicList::update(std::span<const Box3D> new_boxes, const RigidTransform& pose) {
  for (const auto& box : new_boxes) {
    const auto mask = box_to_mask(box, pose);
    const bool duplicate = std::any_of(masks_.begin(), masks_.end(), [&](const DynamicMask& m) {
      return m.track_id == mask.track_id && m.created_frame == mask.created_frame;
    });
    if (duplicate) {
      throw ValidationError("mask for track " + std::to_string(mask.track_id) + " at frame " +
                            std::to_string(mask.created_frame) + " already in the dynamic list");
    }
    masks_.push_back(mask);
  }
  const double limit = pose.T[axis_];
  std::erase_if(masks_, [&](const DynamicMask& m) { return m.center[axis_] < limit; });
}

bool DynamicList::contains_xy(const Vec3& p) const {
  return std::any_of(masks_.begin(), masks_.end(), [&](const DynamicMask& m) { return m.contains_xy(p); });
}

namespace {

struct Plane {
  Vec3 normal;
  double offset;  // normal·x + offset = 0
  double distance(const Vec3& p) const { return std::abs(normal.dot(p) + offset); }
};

std::optional<Plane> plane_through(const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  const double scale = std::max({(b - a).norm(), (c - a).norm(), 1e-12});
  if (len < 1e-9 * scale * scale) return std::nullopt;
  n /= len;
  if (n.z() < 0) n = -n;
  return Plane{n, -n.dot(a)};
}

std::optional<Plane> fit_plane(std::span<const Vec3> pts) {
  if (pts.size() < 3) return std::nullopt;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  if (s(1) <= 1e-12 * std::max(s(0), 1e-300)) return std::nullopt;  // collinear support
  Vec3 n = svd.matrixU().col(2);
  if (n.z() < 0) n = -n;
  return Plane{n, -n.dot(mean)};
}

}  // namespace

std::vector<bool> classify_ground_points(std::span<const Vec3> pts, const GroundParams& params) {
  if (pts.size() < 3) throw NoGroundPlaneError("fewer than 3 points");

  double z_min = pts[0].z(), z_max = pts[0].z();
  for (const auto& p : pts) {
    z_min = std::min(z_min, p.z());
    z_max = std::max(z_max, p.z());
  }
  const double z_cut = z_min + params.candidate_fraction * (z_max - z_min);
  std::vector<Vec3> candidates;
  for (const auto& p : pts) {
    if (p.z() <= z_cut) candidates.push_back(p);
  }
  if (candidates.size() < 3) throw NoGroundPlaneError("fewer than 3 low ground candidates");

  const double min_nz = std::cos(params.max_slope_deg * std::numbers::pi / 180.0);
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  std::optional<Plane> best;
  std::size_t best_inliers = 0;
  for (int it = 0; it < params.iterations; ++it) {
    const auto plane = plane_through(candidates[pick(rng)], candidates[pick(rng)], candidates[pick(rng)]);
    if (!plane || plane->normal.z() < min_nz) continue;
    std::size_t inliers = 0;
    for (const auto& c : candidates) inliers += plane->distance(c) <= params.inlier_threshold;
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best = plane;
    }
  }
  if (!best) {
    // Tiny or exactly planar candidate sets can miss with random triples; fall back
    // to a least-squares fit of all candidates.
    best = fit_plane(candidates);
    if (!best || best->normal.z() < min_nz) throw NoGroundPlaneError("degenerate ground support");
  }

  // One least-squares refinement on the RANSAC inliers.
  std::vector<Vec3> support;
  for (const auto& c : candidates) {
    if (best->distance(c) <= params.inlier_threshold) support.push_back(c);
  }
  if (auto refined = fit_plane(support); refined && refined->normal.z() >= min_nz) best = refined;

  std::vector<bool> flags(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) flags[i] = best->distance(pts[i]) <= params.inlier_threshold;
  return flags;
}

std::vector<bool> classify_ground(const Scan& scan, const GroundParams& params) {
  const auto world = scan.world_points();
  return classify_ground_points(world, params);
}

std::vector<PointLabel> label_points(const Scan& scan, const DynamicList& list,
                                     const std::vector<bool>& ground_flags) {
  if (ground_flags.size() != scan.points.size()) {
    throw ValidationError("ground flag count " + std::to_string(ground_flags.size()) +
                          " does not match point count " + std::to_string(scan.points.size()));
  }
  std::vector<PointLabel> labels(scan.points.size(), PointLabel::StaticNonGround);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (ground_flags[i]) {
      labels[i] = PointLabel::Ground;
    } else if (list.contains_xy(scan.pose.apply(scan.points[i]))) {
      labels[i] = PointLabel::DynamicForeground;
    }
  }
  return labels;
}

InfillResult infill_ground(const DynamicMask& mask, std::span<const Vec3> ground_points, double r,
                           std::size_t n, std::uint64_t seed) {
  if (!(r > 0.0)) throw ValidationError("infill radius must be positive");
  InfillResult result;
  double sum = 0.0;
  for (const auto& p : ground_points) {
    if (mask.xy_distance(p) <= r) {
      sum += p.z();
      ++result.support;
    }
  }
  if (result.support == 0) {
    result.insufficient_support = true;
    return result;
  }
  result.mean_height = sum / static_cast<double>(result.support);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(mask.p_l.x(), mask.p_r.x());
  std::uniform_real_distribution<double> uy(mask.p_l.y(), mask.p_r.y());
  result.points.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = ux(rng);
    const double y = uy(rng);
    result.points.emplace_back(x, y, result.mean_height);
  }
  return result;
}

std::size_t default_infill_count(const DynamicMask& mask, double density) {
  return static_cast<std::size_t>(std::ceil(mask.area() * density));
}

}  // namespace dynsdf
