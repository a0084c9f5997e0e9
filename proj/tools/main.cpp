// dynsdf command-line tool: synth, map, mesh, eval, refine-pose.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dynsdf/checkpoint.hpp"
#include "dynsdf/mesher.hpp"
#include "dynsdf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dynsdf;

namespace {

struct Globals {
  bool quiet = false;
  bool deterministic = false;
};

void log_line(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cerr << line << '\n';
}

void bind_config(CLI::App* app, PipelineConfig& c) {
  auto& oc = c.field.octree;
  app->add_option("--leaf-size", oc.leaf_size, "leaf size at D_max (m)")->capture_default_str();
  app->add_option("--max-depth", oc.max_depth, "initial D_max")->capture_default_str();
  app->add_option("--feature-levels", oc.feature_levels, "H, levels carrying embeddings")->capture_default_str();
  app->add_option("--feature-dim", oc.feature_dim, "F, embedding width")->capture_default_str();
  app->add_option("--fourier-k", c.field.fourier_k, "Fourier frequencies k")->capture_default_str();
  app->add_option("--sigma2", c.field.sigma2, "Fourier variance")->capture_default_str();
  app->add_option("--encoding-scale", c.field.encoding_scale, "length divided out before encoding (m)")
      ->capture_default_str();
  app->add_flag("!--no-fourier", c.field.use_fourier, "disable the Fourier encoding");
  app->add_option("--truncation", c.trainer.sampler.truncation, "truncation distance (m)")->capture_default_str();
  app->add_option("--near-samples", c.trainer.sampler.n_near)->capture_default_str();
  app->add_option("--free-samples", c.trainer.sampler.n_free)->capture_default_str();
  app->add_option("--budget", c.trainer.sampler.budget, "rays per frame")->capture_default_str();
  app->add_option("--iterations", c.trainer.iterations, "optimizer steps per frame")->capture_default_str();
  app->add_option("--lr", c.trainer.decoder_adam.lr, "decoder step size")->capture_default_str();
  app->add_option("--embedding-lr", c.trainer.embedding_adam.lr, "embedding step size")->capture_default_str();
  app->add_option("--lambda-s", c.trainer.weights.sdf)->capture_default_str();
  app->add_option("--lambda-f", c.trainer.weights.free_space)->capture_default_str();
  app->add_option("--lambda-e", c.trainer.weights.eikonal)->capture_default_str();
  app->add_option("--lambda-d", c.trainer.weights.dynamic)->capture_default_str();
  app->add_option("--infill-radius", c.infill_radius, "support radius r (m)")->capture_default_str();
  app->add_option("--infill-density", c.infill_density, "points per m²")->capture_default_str();
  app->add_option("--mask-axis", c.mask_axis, "removal comparison axis (0=x, 1=y, 2=z)")->capture_default_str();
  app->add_flag("!--no-mask", c.masking, "disable dynamic masking");
  const std::map<std::string, DynamicRegionMode> modes{{"mask", DynamicRegionMode::MaskVolume},
                                                       {"ball", DynamicRegionMode::RadiusBall}};
  app->add_option("--region-mode", c.region_mode, "dynamic-loss region")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  app->add_option("--resolution", c.extraction_resolution, "meshing resolution (m), 0 = leaf/2")
      ->capture_default_str();
  app->add_option("--seed", c.seed)->capture_default_str();
}

int cmd_synth(const std::string& out, const std::string& scene, int frames, std::uint64_t seed, const Globals& g) {
  const auto spec = scene == "static" ? default_static_spec(frames) : default_dynamic_spec(frames);
  const auto s = synth_generate(spec, seed);
  write_dataset(s, out);
  std::size_t n = 0;
  for (const auto& sc : s.scans) n += sc.points.size();
  log_line(g, nlohmann::json{{"event", "synth"}, {"frames", s.scans.size()}, {"points", n},
                             {"tracks", s.tracks.size()}, {"gt_points", s.gt_points.size()}}
                  .dump());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural SDF mapping of dynamic LiDAR scenes"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI/TOML file with option values");
  Globals g;
  app.add_flag("--quiet", g.quiet, "only print errors");
  app.add_flag("--deterministic", g.deterministic, "serial, reproducible reductions");

  std::string synth_out, synth_scene = "dynamic";
  int synth_frames = 20;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--scene", synth_scene)->check(CLI::IsMember({"static", "dynamic"}))->capture_default_str();
  synth->add_option("--frames", synth_frames)->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();

  PipelineConfig config;
  std::string scans_dir, poses_path, tracks_path, map_out;
  auto* map = app.add_subcommand("map", "train the field and extract a mesh");
  map->add_option("--scans", scans_dir, "directory of .bin scans")->required()->check(CLI::ExistingDirectory);
  map->add_option("--poses", poses_path)->required()->check(CLI::ExistingFile);
  map->add_option("--tracks", tracks_path, "box-track CSV (omit for a static scene)");
  map->add_option("--out", map_out)->required();
  bind_config(map, config);

  std::string ckpt_path, mesh_out;
  double mesh_res = 0.0, mesh_trunc = 0.3;
  auto* mesh = app.add_subcommand("mesh", "extract a mesh from a checkpoint");
  mesh->add_option("--checkpoint", ckpt_path)->required()->check(CLI::ExistingFile);
  mesh->add_option("--out", mesh_out)->required();
  mesh->add_option("--resolution", mesh_res, "0 = leaf/2")->capture_default_str();
  mesh->add_option("--truncation", mesh_trunc)->capture_default_str();

  std::string pred_path, gt_path, est_poses, gt_poses, eval_json;
  double tau = 0.1;
  std::size_t eval_samples = 100000;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "compare a mesh or point cloud with ground truth");
  eval->add_option("--pred", pred_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--tau", tau, "F-score threshold (m)")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--samples", eval_samples)->capture_default_str();
  eval->add_option("--seed", eval_seed)->capture_default_str();
  eval->add_option("--est-poses", est_poses)->check(CLI::ExistingFile);
  eval->add_option("--gt-poses", gt_poses)->check(CLI::ExistingFile);
  eval->add_option("--json", eval_json, "also write the JSON record here");

  std::string rp_ckpt, rp_scan, rp_poses;
  int rp_frame = 0;
  PoseRefineConfig rp_config;
  auto* refine = app.add_subcommand("refine-pose", "align one scan to a trained field");
  refine->add_option("--checkpoint", rp_ckpt)->required()->check(CLI::ExistingFile);
  refine->add_option("--scan", rp_scan)->required()->check(CLI::ExistingFile);
  refine->add_option("--poses", rp_poses, "initial pose file")->required()->check(CLI::ExistingFile);
  refine->add_option("--frame", rp_frame, "line of the pose file to start from")->capture_default_str();
  refine->add_option("--iterations", rp_config.iterations)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(synth_out, synth_scene, synth_frames, synth_seed, g);

    if (*map) {
      config.deterministic = g.deterministic;
      const auto data =
          load_dataset(scans_dir, poses_path, tracks_path.empty() ? std::nullopt : std::optional<fs::path>(tracks_path));
      auto result = run_map(data.scans, data.tracks, config, [&](const std::string& l) { log_line(g, l); });
      fs::create_directories(map_out);
      write_mesh_ply(result.mesh, fs::path(map_out) / "mesh.ply");
      save_checkpoint(result.field, fs::path(map_out) / "field.ckpt");
      std::ofstream(fs::path(map_out) / "training.jsonl") << training_records_jsonl(result.reports);
      return 0;
    }

    if (*mesh) {
      const auto field = load_checkpoint(ckpt_path);
      PipelineConfig c;
      c.field.octree.leaf_size = field.octree().leaf_size();
      c.extraction_resolution = mesh_res;
      c.trainer.sampler.truncation = mesh_trunc;
      const auto m = extract_mesh(field, c);
      write_mesh_ply(m, mesh_out);
      log_line(g, nlohmann::json{{"event", "mesh"}, {"vertices", m.vertices.size()},
                                 {"triangles", m.triangles.size()}}
                      .dump());
      return 0;
    }

    if (*eval) {
      const auto pred = read_mesh_ply(pred_path);
      const auto gt = read_points_ply(gt_path);
      std::vector<RigidTransform> ep, gp;
      const bool with_poses = !est_poses.empty() && !gt_poses.empty();
      if (with_poses) {
        ep = read_poses(est_poses);
        gp = read_poses(gt_poses);
      }
      const auto report =
          run_eval(pred, gt, tau, eval_samples, eval_seed, with_poses ? &ep : nullptr, with_poses ? &gp : nullptr);
      std::cout << report.table();
      if (!g.quiet) std::cerr << report.json() << '\n';
      if (!eval_json.empty()) std::ofstream(eval_json) << report.json() << '\n';
      return 0;
    }

    if (*refine) {
      const auto field = load_checkpoint(rp_ckpt);
      const auto poses = read_poses(rp_poses);
      if (rp_frame < 0 || static_cast<std::size_t>(rp_frame) >= poses.size()) {
        std::cerr << "frame " << rp_frame << " not in pose file\n";
        return 2;
      }
      Scan scan;
      scan.frame_id = rp_frame;
      scan.points = read_scan_bin(rp_scan);
      const auto r = refine_pose(scan, field, poses[rp_frame], rp_config);
      write_poses("/dev/stdout", std::span<const RigidTransform>(&r.pose, 1));
      log_line(g, nlohmann::json{{"event", "refine_pose"}, {"initial", r.initial_objective},
                                 {"final", r.final_objective}, {"refused", r.refused}, {"steps", r.accepted_steps}}
                      .dump());
      return r.refused ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
