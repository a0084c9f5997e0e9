#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "dynsdf/checkpoint.hpp"
#include "dynsdf/mesher.hpp"
#include "dynsdf/pipeline.hpp"

using namespace dynsdf;
namespace fs = std::filesystem;

namespace {

SceneSpec small_spec(bool dynamic, int frames) {
  auto spec = dynamic ? default_dynamic_spec(frames) : default_static_spec(frames);
  spec.lidar.rings = 12;
  spec.lidar.azimuths = 72;
  spec.lidar.gt_oversample = 1;
  return spec;
}

PipelineConfig fast_config() {
  PipelineConfig c;
  c.trainer.iterations = 3;
  c.field.hidden = {16, 16};
  c.field.fourier_k = 8;
  c.trainer.sampler.budget = 1024;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("dynsdf_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DYNSDF_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Synth, StaticSceneHasNoTracks) {
  const auto scene = synth_generate(small_spec(false, 3), 1);
  EXPECT_EQ(scene.scans.size(), 3u);
  EXPECT_TRUE(scene.tracks.empty());
  ASSERT_FALSE(scene.gt_points.empty());
  const auto spec = small_spec(false, 3);
  for (const auto& scan : scene.scans) {
    for (const auto& p : scan.world_points()) {
      bool on = std::abs(p.z()) < 1e-6;
      for (const auto& b : spec.statics) on = on || b.contains(p, 1e-6);
      EXPECT_TRUE(on) << p.transpose();
    }
  }
}

TEST(Synth, TracksFollowTrajectory) {
  const auto spec = small_spec(true, 4);
  const auto scene = synth_generate(spec, 1);
  ASSERT_EQ(scene.tracks.size(), 4u);
  for (const auto& b : scene.tracks) {
    const Vec3 world = scene.poses[b.frame_id].apply(b.center);
    EXPECT_LT((world - spec.movers[0].centers[b.frame_id]).norm(), 1e-9);
    EXPECT_EQ(b.track_id, 1);
    EXPECT_DOUBLE_EQ(b.l, 4.0);
  }
  // The car is actually hit by some rays.
  std::size_t on_car = 0;
  for (std::size_t f = 0; f < scene.scans.size(); ++f) {
    const auto box = spec.movers[0].at(f);
    for (const auto& p : scene.scans[f].world_points()) on_car += box.contains(p, 1e-6);
  }
  EXPECT_GT(on_car, 0u);
}

TEST(Synth, DeterministicAndValidated) {
  const auto a = synth_generate(small_spec(true, 2), 5);
  const auto b = synth_generate(small_spec(true, 2), 5);
  EXPECT_EQ(a.scans[1].points, b.scans[1].points);
  EXPECT_EQ(a.gt_points, b.gt_points);
  EXPECT_THROW(synth_generate(small_spec(true, 0), 1), ValidationError);
}

TEST(Pipeline, ConfigValidation) {
  PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.resolution(), 0.1);
  EXPECT_DOUBLE_EQ(c.f_score_tau(), 0.4);
  c.mask_axis = 3;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Pipeline, SmallStaticRun) {
  const auto scene = synth_generate(small_spec(false, 3), 1);
  std::vector<std::string> lines;
  const auto result = run_map(scene.scans, {}, fast_config(), [&](const std::string& l) { lines.push_back(l); });
  EXPECT_EQ(result.failed_frames, 0u);
  EXPECT_EQ(result.reports.size(), 3u);
  // One record per frame plus the final mesh record.
  EXPECT_EQ(lines.size(), 4u);
  EXPECT_NE(lines.back().find("\"mesh\""), std::string::npos);
  EXPECT_TRUE(result.all_masks.empty());
  ASSERT_FALSE(result.mesh.triangles.empty());
  EXPECT_NO_THROW(validate_mesh(result.mesh));
  for (const auto& v : result.mesh.vertices) EXPECT_TRUE(v.allFinite());
  const auto jsonl = training_records_jsonl(result.reports);
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 9);
}

TEST(Pipeline, EmptyTracksEqualMaskingDisabled) {
  const auto scene = synth_generate(small_spec(true, 2), 1);
  auto on = fast_config();
  auto off = fast_config();
  off.masking = false;
  const auto a = run_map(scene.scans, {}, on);
  const auto b = run_map(scene.scans, scene.tracks, off);
  ASSERT_EQ(a.mesh.vertices.size(), b.mesh.vertices.size());
  for (std::size_t i = 0; i < a.mesh.vertices.size(); ++i) ASSERT_EQ(a.mesh.vertices[i], b.mesh.vertices[i]) << i;
  EXPECT_EQ(a.mesh.triangles, b.mesh.triangles);
}

TEST(Pipeline, MaskingCreatesMasksAndInfill) {
  const auto scene = synth_generate(small_spec(true, 3), 1);
  const auto result = run_map(scene.scans, scene.tracks, fast_config());
  EXPECT_EQ(result.all_masks.size(), 3u);
  std::size_t dynamic = 0, synthesized = 0;
  for (const auto& f : result.frames) {
    dynamic += f.dynamic;
    synthesized += f.synthesized;
  }
  EXPECT_GT(dynamic, 0u);
  EXPECT_GT(synthesized, 0u);
  for (double h : result.ground_heights) EXPECT_NEAR(h, 0.0, 0.05);
}

TEST(Pipeline, CheckpointRoundTrip) {
  const auto scene = synth_generate(small_spec(false, 2), 1);
  const auto config = fast_config();
  const auto result = run_map(scene.scans, {}, config);
  const auto dir = temp_dir("ckpt");
  save_checkpoint(result.field, dir / "f.ckpt");
  const auto loaded = load_checkpoint(dir / "f.ckpt");
  const auto mesh = extract_mesh(loaded, config);
  EXPECT_EQ(mesh.vertices, result.mesh.vertices);
  EXPECT_EQ(mesh.triangles, result.mesh.triangles);
}

TEST(Pipeline, DatasetRoundTrip) {
  const auto scene = synth_generate(small_spec(true, 2), 1);
  const auto dir = temp_dir("dataset");
  write_dataset(scene, dir);
  const auto ds = load_dataset(dir / "scans", dir / "poses.txt", dir / "tracks.csv");
  ASSERT_EQ(ds.scans.size(), 2u);
  EXPECT_EQ(ds.tracks.size(), scene.tracks.size());
  EXPECT_EQ(read_points_ply(dir / "gt_points.ply").size(), scene.gt_points.size());
  for (std::size_t i = 0; i < 2; ++i) {
    ASSERT_EQ(ds.scans[i].points.size(), scene.scans[i].points.size());
    // Scans are stored as float32.
    for (std::size_t k = 0; k < ds.scans[i].points.size(); ++k) {
      EXPECT_LT((ds.scans[i].points[k] - scene.scans[i].points[k]).norm(), 1e-5);
    }
  }
  std::ofstream(dir / "short_poses.txt") << "1 0 0 0 0 1 0 0 0 0 1 0\n";
  EXPECT_THROW(load_dataset(dir / "scans", dir / "short_poses.txt", std::nullopt), Error);
}

TEST(Pipeline, RefinePoseOnTrainedField) {
  auto spec = small_spec(false, 3);
  const auto scene = synth_generate(spec, 1);
  auto config = fast_config();
  // Pose refinement needs a field close to convergence.
  config.trainer.iterations = 200;
  const auto result = run_map(scene.scans, {}, config);
  const auto& truth = scene.poses[1];
  RigidTransform init = truth;
  init.T += Vec3(0.03, -0.02, 0.03);
  const auto r = refine_pose(scene.scans[1], result.field, init);
  EXPECT_FALSE(r.refused);
  EXPECT_LE(r.final_objective, r.initial_objective);
  EXPECT_LT((r.pose.T - truth.T).norm(), (init.T - truth.T).norm());
}

TEST(Eval, MeshAgainstItsOwnSurface) {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.triangles = {{0, 1, 2}};
  const auto gt = sample_mesh_surface(m, 5000, 3);
  const auto r = run_eval(m, gt, 0.05, 5000, 4);
  EXPECT_LT(r.chamfer_l1_cm, 1.5);
  EXPECT_GT(r.f_score_pct, 99.0);
  EXPECT_FALSE(r.ate_rmse_m.has_value());
}

TEST(Cli, ExitCodes) {
  if (std::string(DYNSDF_CLI).empty()) GTEST_SKIP() << "command-line tool not built";
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("eval --pred /nonexistent.ply"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  const auto dir = temp_dir("cli");
  std::ofstream(dir / "bad.ply") << "not a ply\n";
  std::ofstream(dir / "gt.ply") << "not a ply\n";
  EXPECT_EQ(run_cli("eval --pred " + (dir / "bad.ply").string() + " --gt " + (dir / "gt.ply").string()), 1);
}

TEST(Cli, SynthMapEval) {
  if (std::string(DYNSDF_CLI).empty()) GTEST_SKIP() << "command-line tool not built";
  const auto dir = temp_dir("cli_flow");
  ASSERT_EQ(run_cli("synth --out " + dir.string() + " --scene dynamic --frames 2"), 0);
  ASSERT_EQ(run_cli("map --quiet --scans " + (dir / "scans").string() + " --poses " + (dir / "poses.txt").string() +
                    " --tracks " + (dir / "tracks.csv").string() + " --out " + (dir / "out").string() +
                    " --iterations 1 --budget 512"),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "mesh.ply"));
  EXPECT_TRUE(fs::exists(dir / "out" / "field.ckpt"));
  EXPECT_EQ(run_cli("eval --pred " + (dir / "out" / "mesh.ply").string() + " --gt " +
                    (dir / "gt_points.ply").string() + " --samples 2000 --json " + (dir / "report.json").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_EQ(run_cli("mesh --checkpoint " + (dir / "out" / "field.ckpt").string() + " --out " +
                    (dir / "remesh.ply").string()),
            0);
}
