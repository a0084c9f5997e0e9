#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dynsdf/types.hpp"

namespace dynsdf {

/// One LiDAR frame: points in the sensor frame plus the sensor→world pose.
struct Scan {
  int frame_id = 0;
  std::vector<Vec3> points;
  RigidTransform pose;

  std::vector<Vec3> world_points() const;
};

/// Moving-object box as delivered by the detector, in the sensor frame.
/// `w` spans x, `l` spans y and `h` spans z.
struct Box3D {
  int frame_id = 0;
  int track_id = 0;
  Vec3 center = Vec3::Zero();
  double h = 0.0;
  double w = 0.0;
  double l = 0.0;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Throws ValidationError if any triangle index is out of range or a
/// triangle repeats one index three times.
void validate_mesh(const Mesh& mesh);

// KITTI velodyne .bin: little-endian float32 x, y, z, intensity per point.
std::vector<Vec3> read_scan_bin(const std::filesystem::path& path);
void write_scan_bin(const std::filesystem::path& path, std::span<const Vec3> points);

// KITTI poses: one row-major 3x4 matrix per line.
std::vector<RigidTransform> read_poses(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, std::span<const RigidTransform> poses);

// CSV `frame_id,track_id,x_c,y_c,z_c,h,w,l`; result sorted by frame then track.
std::vector<Box3D> read_box_tracks(const std::filesystem::path& path);
void write_box_tracks(const std::filesystem::path& path, std::span<const Box3D> boxes);

enum class PlyFormat { Ascii, BinaryLittleEndian };

void write_mesh_ply(const Mesh& mesh, const std::filesystem::path& path,
                    PlyFormat format = PlyFormat::BinaryLittleEndian);
/// Reads vertex x/y/z (float or double) and triangular faces; extra vertex
/// properties are skipped.
Mesh read_mesh_ply(const std::filesystem::path& path);

/// Point cloud PLY, optionally carrying an integer `label` per vertex.
void write_points_ply(const std::filesystem::path& path, std::span<const Vec3> points,
                      std::span<const int> labels = {});

}  // namespace dynsdf
