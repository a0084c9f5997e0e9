#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "dynsdf/dynamic_mask.hpp"

using namespace dynsdf;

namespace {

Box3D box(Vec3 c, double w, double l, int track = 1, int frame = 0, double h = 1.5) {
  Box3D b;
  b.frame_id = frame;
  b.track_id = track;
  b.center = c;
  b.h = h;
  b.w = w;
  b.l = l;
  return b;
}

RigidTransform translation(Vec3 t) { return {Mat3::Identity(), t}; }

Scan scan_of(std::vector<Vec3> pts) {
  Scan s;
  s.points = std::move(pts);
  return s;
}

}  // namespace

TEST(BoxToMask, IdentityPose) {
  const auto m = box_to_mask(box({2, 3, 1}, 2, 4), translation(Vec3::Zero()));
  EXPECT_EQ(m.p_l, Vec2(1, 1));
  EXPECT_EQ(m.p_r, Vec2(3, 5));
  EXPECT_EQ(m.center_y(), 3.0);
}

TEST(BoxToMask, PureTranslation) {
  const auto m = box_to_mask(box({0, 0, 0}, 2, 2), translation({10, 0, 0}));
  EXPECT_EQ(m.p_l, Vec2(9, -1));
  EXPECT_EQ(m.p_r, Vec2(11, 1));
}

TEST(BoxToMask, RotatedCenterExtentsNotRotated) {
  const auto m = box_to_mask(box({1, 0, 0}, 2, 2), {yaw_rotation(std::numbers::pi / 2), Vec3::Zero()});
  EXPECT_NEAR(m.p_l.x(), -1.0, 1e-12);
  EXPECT_NEAR(m.p_l.y(), 0.0, 1e-12);
  EXPECT_NEAR(m.p_r.x(), 1.0, 1e-12);
  EXPECT_NEAR(m.p_r.y(), 2.0, 1e-12);
}

TEST(BoxToMask, FrozenOracleYaw) {
  // Values from tests/oracles/oracles.py.
  const auto m = box_to_mask(box({4, -1, 0.5}, 1.5, 3.0), {yaw_rotation(0.3), Vec3(1, 2, 3)});
  EXPECT_NEAR(m.p_l.x(), 4.3668661631637633, 1e-12);
  EXPECT_NEAR(m.p_l.y(), 0.7267443375197522, 1e-12);
  EXPECT_NEAR(m.p_r.x(), 5.8668661631637633, 1e-12);
  EXPECT_NEAR(m.p_r.y(), 3.7267443375197522, 1e-12);
  EXPECT_NEAR(m.center_y(), 2.2267443375197522, 1e-12);
}

TEST(BoxToMask, AreaMatchesBox) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 6.0);
  for (int i = 0; i < 50; ++i) {
    const double w = u(rng), l = u(rng);
    const auto m = box_to_mask(box({u(rng), u(rng), 0}, w, l), {so3_exp(Vec3(0.1, 0.2, u(rng))), Vec3(u(rng), 0, 0)});
    EXPECT_NEAR(m.p_r.x() - m.p_l.x(), w, 1e-9);
    EXPECT_NEAR(m.p_r.y() - m.p_l.y(), l, 1e-9);
    EXPECT_NEAR(m.area(), w * l, 1e-9);
  }
}

TEST(DynamicList, Insertion) {
  DynamicList list;
  const std::vector<Box3D> b = {box({0, 5, 0}, 1, 1)};
  list.update(b, translation(Vec3::Zero()));
  EXPECT_EQ(list.size(), 1u);
}

TEST(DynamicList, RemovesMaskBehindSensor) {
  DynamicList list;
  // Sensor-frame y = 7 at T_y = -10 puts the center at world y = -3.
  const std::vector<Box3D> b = {box({0, 7, 0}, 1, 1)};
  list.update(b, translation({0, -10, 0}));
  ASSERT_EQ(list.size(), 1u);
  list.update({}, translation(Vec3::Zero()));
  EXPECT_TRUE(list.empty());
}

TEST(DynamicList, StrictInequality) {
  DynamicList list;
  // World centers y = -1, 2, 7.
  const std::vector<Box3D> b = {box({0, 4, 0}, 1, 1, 1), box({0, 7, 0}, 1, 1, 2), box({0, 12, 0}, 1, 1, 3)};
  list.update(b, translation({0, -5, 0}));
  ASSERT_EQ(list.size(), 3u);
  list.update({}, translation({0, 2, 0}));
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list.masks()[0].center_y(), 2.0);
  EXPECT_EQ(list.masks()[1].center_y(), 7.0);
}

TEST(DynamicList, NewBoxBehindSensorRemovedSameUpdate) {
  DynamicList list;
  const std::vector<Box3D> b = {box({0, -1, 0}, 1, 1)};
  list.update(b, translation(Vec3::Zero()));
  EXPECT_TRUE(list.empty());
}

TEST(DynamicList, DuplicateTrackFrameRejected) {
  DynamicList list;
  const std::vector<Box3D> b = {box({0, 5, 0}, 1, 1, 4, 2), box({1, 5, 0}, 1, 1, 4, 2)};
  EXPECT_THROW(list.update(b, translation(Vec3::Zero())), ValidationError);
}

TEST(DynamicList, ConfigurableAxis) {
  DynamicList list(0);
  const std::vector<Box3D> b = {box({-1, 5, 0}, 1, 1)};
  list.update(b, translation(Vec3::Zero()));
  EXPECT_TRUE(list.empty());
}

TEST(ClassifyGround, PlanePlusElevatedPoints) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) pts.emplace_back(i, j, 0.0);
  }
  for (int i = 0; i < 10; ++i) pts.emplace_back(i, 0.5 * i, 2.0);
  const auto flags = classify_ground(scan_of(pts));
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(flags[i]) << i;
  for (int i = 100; i < 110; ++i) EXPECT_FALSE(flags[i]) << i;
}

TEST(ClassifyGround, PurePlane) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 30; ++i) pts.emplace_back(0.37 * i, std::fmod(1.3 * i, 5.0), 0.0);
  const auto flags = classify_ground(scan_of(pts));
  EXPECT_TRUE(std::all_of(flags.begin(), flags.end(), [](bool b) { return b; }));
}

TEST(ClassifyGround, TooFewPoints) {
  EXPECT_THROW(classify_ground(scan_of({{0, 0, 0}, {1, 0, 0}})), NoGroundPlaneError);
}

TEST(ClassifyGround, CollinearSupport) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(i, 0, 0);
  EXPECT_THROW(classify_ground(scan_of(pts)), NoGroundPlaneError);
}

TEST(ClassifyGround, UsesWorldFrameAndIsDeterministic) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10, 10);
  Scan s;
  s.pose = {Mat3::Identity(), Vec3(0, 0, 1.8)};
  for (int i = 0; i < 300; ++i) s.points.emplace_back(u(rng), u(rng), -1.8);
  for (int i = 0; i < 50; ++i) s.points.emplace_back(u(rng), u(rng), 0.5 * std::abs(u(rng)));
  const auto a = classify_ground(s);
  const auto b = classify_ground(s);
  EXPECT_EQ(a, b);
  const auto world = s.world_points();
  for (std::size_t i = 0; i < world.size(); ++i) {
    if (a[i]) EXPECT_LE(std::abs(world[i].z()), 0.15);
  }
  EXPECT_EQ(std::count(a.begin(), a.begin() + 300, true), 300);
}

TEST(LabelPoints, Rules) {
  DynamicList list;
  const std::vector<Box3D> b = {box({2, 3, 1}, 2, 4)};
  list.update(b, translation(Vec3::Zero()));
  const auto s = scan_of({{2, 2, 0.5}, {2, 2, 0.0}, {100, 100, 0.5}, {3, 5, 1.0}});
  const auto labels = label_points(s, list, {false, true, false, false});
  EXPECT_EQ(labels[0], PointLabel::DynamicForeground);
  EXPECT_EQ(labels[1], PointLabel::Ground);
  EXPECT_EQ(labels[2], PointLabel::StaticNonGround);
  EXPECT_EQ(labels[3], PointLabel::DynamicForeground);  // boundary is inclusive
}

TEST(LabelPoints, EmptyListNeverDynamic) {
  DynamicList list;
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(i * 0.1, -i * 0.2, i % 3);
  const auto labels = label_points(scan_of(pts), list, std::vector<bool>(pts.size(), false));
  EXPECT_EQ(std::count(labels.begin(), labels.end(), PointLabel::DynamicForeground), 0);
}

TEST(LabelPoints, OrderIndependentAndIdempotent) {
  DynamicList list;
  const std::vector<Box3D> b = {box({0, 3, 0}, 2, 2), box({4, 6, 0}, 1, 3, 2)};
  list.update(b, translation(Vec3::Zero()));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 8);
  std::vector<Vec3> pts;
  std::vector<bool> flags;
  for (int i = 0; i < 200; ++i) {
    pts.emplace_back(u(rng), u(rng), u(rng));
    flags.push_back(i % 5 == 0);
  }
  const auto labels = label_points(scan_of(pts), list, flags);
  EXPECT_EQ(labels, label_points(scan_of(pts), list, flags));
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Vec3> p2;
  std::vector<bool> f2;
  for (auto i : perm) {
    p2.push_back(pts[i]);
    f2.push_back(flags[i]);
  }
  const auto l2 = label_points(scan_of(p2), list, f2);
  for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(l2[k], labels[perm[k]]);
}

TEST(LabelPoints, LengthMismatch) {
  DynamicList list;
  EXPECT_THROW(label_points(scan_of({{0, 0, 0}}), list, {}), ValidationError);
}

TEST(InfillGround, MeanHeight) {
  DynamicMask m;
  m.p_l = Vec2(0, 0);
  m.p_r = Vec2(2, 2);
  const std::vector<Vec3> support = {{1, 1, 0.1}, {0.5, 1.5, 0.2}, {2.1, 1.0, 0.3}, {5, 5, 9.0}};
  const auto r = infill_ground(m, support, 0.3, 20, 1);
  EXPECT_EQ(r.support, 3u);
  EXPECT_DOUBLE_EQ(r.mean_height, 0.20000000000000004);
  for (const auto& p : r.points) EXPECT_EQ(p.z(), r.mean_height);
}

TEST(InfillGround, ZeroCount) {
  DynamicMask m;
  m.p_r = Vec2(1, 1);
  EXPECT_TRUE(infill_ground(m, std::vector<Vec3>{{0.5, 0.5, 0}}, 0.3, 0, 1).points.empty());
}

TEST(InfillGround, InsideMaskAndDeterministic) {
  DynamicMask m;
  m.p_l = Vec2(0, 0);
  m.p_r = Vec2(2, 2);
  const std::vector<Vec3> support = {{1, 1, 1.0}, {-0.2, 0.5, 1.0}};
  const auto a = infill_ground(m, support, 0.3, 50, 42);
  const auto b = infill_ground(m, support, 0.3, 50, 42);
  ASSERT_EQ(a.points.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.points[i], b.points[i]);
    EXPECT_GE(a.points[i].x(), 0.0);
    EXPECT_LE(a.points[i].x(), 2.0);
    EXPECT_GE(a.points[i].y(), 0.0);
    EXPECT_LE(a.points[i].y(), 2.0);
    EXPECT_EQ(a.points[i].z(), 1.0);
  }
}

TEST(InfillGround, NoSupportFlag) {
  DynamicMask m;
  m.p_r = Vec2(1, 1);
  const auto r = infill_ground(m, std::vector<Vec3>{{5, 5, 0}}, 0.3, 10, 1);
  EXPECT_TRUE(r.insufficient_support);
  EXPECT_TRUE(r.points.empty());
  EXPECT_THROW(infill_ground(m, {}, 0.0, 1, 1), ValidationError);
}

TEST(InfillGround, DefaultCount) {
  DynamicMask m;
  m.p_r = Vec2(1.8, 4.0);
  EXPECT_EQ(default_infill_count(m), 720u);
  m.p_r = Vec2(0.15, 0.1);
  EXPECT_EQ(default_infill_count(m), 2u);
}

TEST(DynamicMask, XyDistance) {
  DynamicMask m;
  m.p_l = Vec2(0, 0);
  m.p_r = Vec2(2, 2);
  EXPECT_EQ(m.xy_distance({1, 1, 5}), 0.0);
  EXPECT_DOUBLE_EQ(m.xy_distance({3, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(m.xy_distance({5, 6, 0}), 5.0);
}
