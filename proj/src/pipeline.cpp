#include "dynsdf/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "dynsdf/mesher.hpp"

namespace dynsdf {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void PipelineConfig::validate() const {
  const auto& oc = field.octree;
  if (!(oc.leaf_size > 0.0)) throw ValidationError("leaf_size must be positive");
  if (oc.max_depth < 1) throw ValidationError("max_depth must be positive");
  if (oc.feature_levels < 1 || oc.feature_levels > oc.max_depth) {
    throw ValidationError("feature_levels must be in [1, max_depth]");
  }
  if (oc.feature_dim < 1) throw ValidationError("feature_dim must be positive");
  if (field.fourier_k < 0) throw ValidationError("fourier_k must be nonnegative");
  if (field.use_fourier && field.fourier_k > 0 && !(field.sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
  if (!(trainer.sampler.truncation > 0.0)) throw ValidationError("truncation must be positive");
  if (trainer.sampler.budget == 0) throw ValidationError("ray budget must be positive");
  if (trainer.iterations < 0) throw ValidationError("iterations must be nonnegative");
  trainer.weights.validate();
  if (!(infill_radius > 0.0)) throw ValidationError("infill_radius must be positive");
  if (!(infill_density >= 0.0)) throw ValidationError("infill_density must be nonnegative");
  if (mask_axis < 0 || mask_axis > 2) throw ValidationError("mask_axis must be 0, 1 or 2");
  if (extraction_resolution < 0.0) throw ValidationError("extraction_resolution must be positive");
  if (tau < 0.0) throw ValidationError("tau must be positive");
}

double PipelineConfig::resolution() const {
  return extraction_resolution > 0.0 ? extraction_resolution : 0.5 * field.octree.leaf_size;
}

double PipelineConfig::f_score_tau() const { return tau > 0.0 ? tau : 2.0 * field.octree.leaf_size; }

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void emit(const LogSink& log, const ordered_json& j) {
  if (log) log(j.dump());
}

std::vector<Vec3> with_neighbors(std::span<const Vec3> pts, double half) {
  std::vector<Vec3> out;
  out.reserve(pts.size() * 27);
  for (const auto& p : pts) {
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) out.push_back(p + half * Vec3(dx, dy, dz));
      }
    }
  }
  return out;
}

}  // namespace

Mesh extract_mesh(const NeuralField& field, const PipelineConfig& config) {
  const double sentinel = config.sentinel_factor * config.trainer.sampler.truncation;
  return marching_cubes(sample_grid(field, config.resolution(), sentinel), 0.0);
}

MapResult run_map(const std::vector<Scan>& scans, const std::vector<Box3D>& tracks, const PipelineConfig& config,
                  const LogSink& log) {
  config.validate();
  MapResult result{NeuralField(config.field), {}, {}, {}, {}, {}, 0};
  NeuralField& field = result.field;
  FieldOptimizer optimizer(config.trainer.decoder_adam, config.trainer.embedding_adam);
  DynamicList list(config.mask_axis);

  std::map<int, std::vector<Box3D>> boxes_by_frame;
  for (const auto& b : tracks) boxes_by_frame[b.frame_id].push_back(b);

  const double half_leaf = 0.5 * config.field.octree.leaf_size;
  for (const auto& scan : scans) {
    FrameSummary summary;
    summary.frame_id = scan.frame_id;
    summary.points = scan.points.size();
    try {
      if (config.masking) {
        const auto it = boxes_by_frame.find(scan.frame_id);
        const std::vector<Box3D> none;
        const auto& boxes = it == boxes_by_frame.end() ? none : it->second;
        for (const auto& b : boxes) result.all_masks.push_back(box_to_mask(b, scan.pose));
        list.update(boxes, scan.pose);
      }
      summary.active_masks = list.size();

      const auto world = scan.world_points();
      std::vector<bool> ground;
      try {
        ground = classify_ground_points(world, config.ground);
      } catch (const NoGroundPlaneError& e) {
        ground.assign(world.size(), false);
        emit(log, {{"event", "no_ground"}, {"frame", scan.frame_id}, {"detail", e.what()}});
      }
      const auto labels = label_points(scan, list, ground);

      std::vector<Vec3> ground_pts, kept;
      for (std::size_t i = 0; i < world.size(); ++i) {
        if (labels[i] == PointLabel::Ground) ground_pts.push_back(world[i]);
        if (labels[i] != PointLabel::DynamicForeground) kept.push_back(world[i]);
        else ++summary.dynamic;
      }
      summary.ground = ground_pts.size();

      std::vector<Vec3> synthesized;
      FrameTrainingData data;
      std::size_t m = 0;
      for (const auto& mask : list.masks()) {
        const auto n = default_infill_count(mask, config.infill_density);
        const auto infill = infill_ground(mask, ground_pts, config.infill_radius, n,
                                          mix(config.seed, mix(static_cast<std::uint64_t>(scan.frame_id), m++)));
        if (infill.insufficient_support) continue;
        result.ground_heights.push_back(infill.mean_height);
        synthesized.insert(synthesized.end(), infill.points.begin(), infill.points.end());
        if (config.region_mode == DynamicRegionMode::MaskVolume) {
          data.dynamic_regions.push_back(mask_volume_region(mask, infill.mean_height, config.region_lattice));
        } else {
          data.dynamic_regions.push_back(radius_ball_region(mask.center, config.region_radius, config.region_lattice));
        }
      }
      summary.synthesized = synthesized.size();

      kept.insert(kept.end(), synthesized.begin(), synthesized.end());
      if (config.allocate_neighbors) {
        field.octree().allocate(with_neighbors(kept, half_leaf));
      } else {
        field.octree().allocate(kept);
      }

      data.rays = sample_rays(scan, labels, synthesized, config.trainer.sampler,
                              mix(config.seed, static_cast<std::uint64_t>(scan.frame_id)));
      summary.rays = data.rays.size();

      TrainerConfig tc = config.trainer;
      tc.seed = mix(config.seed ^ 0x7a11ULL, static_cast<std::uint64_t>(scan.frame_id));
      auto report = optimize_frame(field, optimizer, data, tc);
      report.frame_id = scan.frame_id;
      if (report.diverged) {
        summary.failed = true;
        summary.error = report.diagnostic;
      }
      ordered_json j{{"event", "frame"},         {"frame", scan.frame_id},          {"points", summary.points},
                     {"ground", summary.ground}, {"dynamic", summary.dynamic},      {"synthesized", summary.synthesized},
                     {"masks", summary.active_masks}, {"rays", summary.rays},      {"leaves", field.octree().leaf_count()}};
      if (!report.records.empty()) {
        j["loss_first"] = report.records.front().total;
        j["loss_last"] = report.records.back().total;
      }
      if (report.diverged) j["error"] = report.diagnostic;
      emit(log, j);
      result.reports.push_back(std::move(report));
    } catch (const Error& e) {
      summary.failed = true;
      summary.error = e.what();
      emit(log, {{"event", "frame_failed"}, {"frame", scan.frame_id}, {"error", e.what()}});
    }
    if (summary.failed) ++result.failed_frames;
    result.frames.push_back(std::move(summary));
  }

  if (!scans.empty() && 2 * result.failed_frames > scans.size()) {
    throw Error(std::to_string(result.failed_frames) + " of " + std::to_string(scans.size()) + " frames failed");
  }
  result.mesh = extract_mesh(field, config);
  emit(log, {{"event", "mesh"},
             {"vertices", result.mesh.vertices.size()},
             {"triangles", result.mesh.triangles.size()},
             {"resolution", config.resolution()}});
  return result;
}

Dataset load_dataset(const fs::path& scans_dir, const fs::path& poses, const std::optional<fs::path>& tracks) {
  if (!fs::is_directory(scans_dir)) throw FormatError("scan directory not found: " + scans_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scans_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const auto pose_list = read_poses(poses);
  if (pose_list.size() != files.size()) {
    throw ValidationError(std::to_string(files.size()) + " scans but " + std::to_string(pose_list.size()) + " poses");
  }
  Dataset d;
  for (std::size_t i = 0; i < files.size(); ++i) {
    Scan s;
    s.frame_id = static_cast<int>(i);
    s.points = read_scan_bin(files[i]);
    s.pose = pose_list[i];
    d.scans.push_back(std::move(s));
  }
  if (tracks && fs::exists(*tracks)) d.tracks = read_box_tracks(*tracks);
  return d;
}

void write_dataset(const SyntheticScene& scene, const fs::path& dir) {
  fs::create_directories(dir / "scans");
  for (const auto& s : scene.scans) {
    char name[32];
    std::snprintf(name, sizeof name, "%06d.bin", s.frame_id);
    write_scan_bin(dir / "scans" / name, s.points);
  }
  write_poses(dir / "poses.txt", scene.poses);
  write_box_tracks(dir / "tracks.csv", scene.tracks);
  write_points_ply(dir / "gt_points.ply", scene.gt_points);
}

std::vector<Vec3> read_points_ply(const fs::path& path) { return read_mesh_ply(path).vertices; }

MetricsReport run_eval(const Mesh& pred, const std::vector<Vec3>& gt, double tau, std::size_t samples,
                       std::uint64_t seed, const std::vector<RigidTransform>* est_poses,
                       const std::vector<RigidTransform>* gt_poses) {
  const auto pts = pred.triangles.empty() ? pred.vertices : sample_mesh_surface(pred, samples, seed);
  auto report = evaluate_points(pts, gt, tau);
  if (est_poses && gt_poses) report.ate_rmse_m = ate_rmse(*est_poses, *gt_poses);
  return report;
}

std::string training_records_jsonl(const std::vector<TrainingReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    for (const auto& rec : r.records) {
      ordered_json j{{"frame", r.frame_id}, {"iteration", rec.iteration}, {"L_s", rec.parts.sdf},
                     {"L_f", rec.parts.free_space}, {"L_e", rec.parts.eikonal}, {"L_d", rec.parts.dynamic},
                     {"total", rec.total}};
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace dynsdf
