#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "dynsdf/io.hpp"

namespace fs = std::filesystem;
using namespace dynsdf;

namespace {

fs::path tmp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dynsdf_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_floats(const fs::path& p, const std::vector<float>& v) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

Mesh unit_cube() {
  Mesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  m.triangles = {{0, 1, 3}, {0, 3, 2}, {4, 6, 7}, {4, 7, 5}, {0, 4, 5}, {0, 5, 1},
                 {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
  return m;
}

}  // namespace

TEST(ReadScanBin, DecodesPointsAndDropsIntensity) {
  const auto p = tmp_file("two.bin");
  write_floats(p, {1, 2, 3, 0.5f, 4, 5, 6, 0.1f});
  const auto pts = read_scan_bin(p);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0], Vec3(1, 2, 3));
  EXPECT_EQ(pts[1], Vec3(4, 5, 6));
}

TEST(ReadScanBin, EmptyFile) {
  const auto p = tmp_file("empty.bin");
  write_floats(p, {});
  EXPECT_TRUE(read_scan_bin(p).empty());
}

TEST(ReadScanBin, LengthNotMultipleOf16) {
  const auto p = tmp_file("bad.bin");
  write_floats(p, {1, 2, 3, 4, 5});
  EXPECT_THROW(read_scan_bin(p), FormatError);
}

TEST(ReadScanBin, NanNamesIndex) {
  const auto p = tmp_file("nan.bin");
  write_floats(p, {1, 2, 3, 0, 1, std::numeric_limits<float>::quiet_NaN(), 3, 0});
  try {
    read_scan_bin(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(ReadScanBin, RoundTrip) {
  std::vector<Vec3> pts = {{0.5, -1.25, 3.0}, {100.0, 0.0, -2.5}};
  const auto p = tmp_file("rt.bin");
  write_scan_bin(p, pts);
  EXPECT_EQ(read_scan_bin(p), pts);
}

TEST(ReadPoses, IdentityAndTranslation) {
  const auto p = tmp_file("poses.txt");
  write_text(p, "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 5 0 1 0 0 0 0 1 0\n");
  const auto poses = read_poses(p);
  ASSERT_EQ(poses.size(), 2u);
  EXPECT_EQ(poses[0].R, Mat3::Identity());
  EXPECT_EQ(poses[0].T, Vec3::Zero());
  EXPECT_EQ(poses[1].R, Mat3::Identity());
  EXPECT_EQ(poses[1].T, Vec3(5, 0, 0));
}

TEST(ReadPoses, ArityError) {
  const auto p = tmp_file("poses11.txt");
  write_text(p, "1 0 0 0 0 1 0 0 0 0 1\n");
  EXPECT_THROW(read_poses(p), FormatError);
}

TEST(ReadPoses, NonOrthonormalNamesLine) {
  const auto p = tmp_file("posesbad.txt");
  write_text(p, "1 0 0 0 0 1 0 0 0 0 1 0\n1.1 0 0 0 0 1 0 0 0 0 1 0\n");
  try {
    read_poses(p);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(ReadPoses, RoundTrip) {
  std::vector<RigidTransform> poses = {{yaw_rotation(0.3), Vec3(1, 2, 3)}, {so3_exp(Vec3(0.1, -0.2, 0.3)), Vec3(-4, 0, 1)}};
  const auto p = tmp_file("posesrt.txt");
  write_poses(p, poses);
  const auto back = read_poses(p);
  ASSERT_EQ(back.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].R, poses[i].R);
    EXPECT_EQ(back[i].T, poses[i].T);
  }
}

TEST(ReadBoxTracks, DirectDecode) {
  const auto p = tmp_file("tracks.csv");
  write_text(p, "0,7,2.0,3.0,1.0,1.5,2.0,4.0\n");
  const auto boxes = read_box_tracks(p);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_EQ(boxes[0].frame_id, 0);
  EXPECT_EQ(boxes[0].track_id, 7);
  EXPECT_EQ(boxes[0].center, Vec3(2, 3, 1));
  EXPECT_EQ(boxes[0].h, 1.5);
  EXPECT_EQ(boxes[0].w, 2.0);
  EXPECT_EQ(boxes[0].l, 4.0);
}

TEST(ReadBoxTracks, SortedByFrame) {
  const auto p = tmp_file("tracks_sort.csv");
  write_text(p, "3,1,0,0,0,1,1,1\n1,2,0,0,0,1,1,1\n1,1,0,0,0,1,1,1\n");
  const auto boxes = read_box_tracks(p);
  ASSERT_EQ(boxes.size(), 3u);
  EXPECT_EQ(boxes[0].frame_id, 1);
  EXPECT_EQ(boxes[0].track_id, 1);
  EXPECT_EQ(boxes[1].track_id, 2);
  EXPECT_EQ(boxes[2].frame_id, 3);
}

TEST(ReadBoxTracks, DuplicatePair) {
  const auto p = tmp_file("tracks_dup.csv");
  write_text(p, "0,7,2,3,1,1.5,2,4\n0,7,5,3,1,1.5,2,4\n");
  EXPECT_THROW(read_box_tracks(p), ValidationError);
}

TEST(ReadBoxTracks, NonpositiveDimension) {
  const auto p = tmp_file("tracks_dim.csv");
  write_text(p, "0,7,2,3,1,0,2,4\n");
  EXPECT_THROW(read_box_tracks(p), ValidationError);
}

TEST(ReadBoxTracks, EmptyFile) {
  const auto p = tmp_file("tracks_empty.csv");
  write_text(p, "");
  EXPECT_TRUE(read_box_tracks(p).empty());
}

TEST(MeshPly, CubeCountsAscii) {
  const auto p = tmp_file("cube.ply");
  write_mesh_ply(unit_cube(), p, PlyFormat::Ascii);
  std::ifstream in(p);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(all.find("element vertex 8"), std::string::npos);
  EXPECT_NE(all.find("element face 12"), std::string::npos);
  const auto back = read_mesh_ply(p);
  EXPECT_EQ(back.vertices, unit_cube().vertices);
  EXPECT_EQ(back.triangles, unit_cube().triangles);
}

TEST(MeshPly, BinaryRoundTripIsBitExact) {
  Mesh m;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 50; ++i) m.vertices.emplace_back(n(rng), n(rng), n(rng));
  for (std::uint32_t i = 0; i + 2 < 50; ++i) m.triangles.push_back({i, i + 1, i + 2});
  const auto p = tmp_file("rand.ply");
  write_mesh_ply(m, p);
  const auto back = read_mesh_ply(p);
  ASSERT_EQ(back.vertices.size(), m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    EXPECT_EQ(std::memcmp(back.vertices[i].data(), m.vertices[i].data(), sizeof(double) * 3), 0);
  }
  EXPECT_EQ(back.triangles, m.triangles);

  const auto p2 = tmp_file("rand2.ply");
  write_mesh_ply(back, p2);
  std::ifstream a(p, std::ios::binary), b(p2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST(MeshPly, EmptyMesh) {
  const auto p = tmp_file("empty.ply");
  write_mesh_ply(Mesh{}, p, PlyFormat::Ascii);
  std::ifstream in(p);
  std::string all((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(all.find("element vertex 0"), std::string::npos);
  EXPECT_NE(all.find("element face 0"), std::string::npos);
  const auto back = read_mesh_ply(p);
  EXPECT_TRUE(back.vertices.empty());
  EXPECT_TRUE(back.triangles.empty());
}

TEST(MeshPly, OutOfRangeIndexRejected) {
  Mesh m = unit_cube();
  m.triangles.push_back({0, 1, 8});
  EXPECT_THROW(write_mesh_ply(m, tmp_file("bad.ply")), ValidationError);
  Mesh d = unit_cube();
  d.triangles.push_back({2, 2, 2});
  EXPECT_THROW(validate_mesh(d), ValidationError);
}

TEST(MeshPly, UnwritablePathNamesPath) {
  try {
    write_mesh_ply(unit_cube(), "/nonexistent_dir/x/mesh.ply");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir/x/mesh.ply"), std::string::npos);
  }
}

TEST(Scan, PoseTransformPreservesDistances) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  Scan s;
  s.pose = {so3_exp(Vec3(0.4, -1.1, 2.0)), Vec3(3, -7, 1)};
  for (int i = 0; i < 200; ++i) s.points.emplace_back(u(rng), u(rng), u(rng));
  const auto w = s.world_points();
  for (int i = 0; i + 1 < 200; ++i) {
    const double d0 = (s.points[i] - s.points[i + 1]).norm();
    const double d1 = (w[i] - w[i + 1]).norm();
    EXPECT_NEAR(d1, d0, 1e-6 * d0);
  }
}
