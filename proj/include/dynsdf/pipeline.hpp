#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynsdf/dynamic_mask.hpp"
#include "dynsdf/io.hpp"
#include "dynsdf/metrics.hpp"
#include "dynsdf/neural_field.hpp"
#include "dynsdf/synth.hpp"
#include "dynsdf/trainer.hpp"

namespace dynsdf {

struct PipelineConfig {
  FieldConfig field;
  TrainerConfig trainer;
  GroundParams ground;
  bool masking = true;
  int mask_axis = 1;
  double infill_radius = 0.3;
  double infill_density = 100.0;  ///< synthesized ground points per m²
  DynamicRegionMode region_mode = DynamicRegionMode::MaskVolume;
  int region_lattice = 4;
  double region_radius = 0.3;
  /// Each kept point also allocates the leaves at ±leaf/2 around it.
  bool allocate_neighbors = true;
  double extraction_resolution = 0.0;  ///< 0 means leaf / 2
  double sentinel_factor = 10.0;       ///< uncovered corners read sentinel_factor · truncation
  double tau = 0.0;                    ///< F-score threshold; 0 means 2 · leaf
  std::size_t eval_samples = 100000;
  bool deterministic = false;
  std::uint64_t seed = 1;

  void validate() const;
  double resolution() const;
  double f_score_tau() const;
};

/// Receives one JSON record per line. Null means silent.
using LogSink = std::function<void(const std::string&)>;

struct FrameSummary {
  int frame_id = 0;
  std::size_t points = 0;
  std::size_t ground = 0;
  std::size_t dynamic = 0;
  std::size_t synthesized = 0;
  std::size_t active_masks = 0;
  std::size_t rays = 0;
  bool failed = false;
  std::string error;
};

struct MapResult {
  NeuralField field;
  Mesh mesh;
  std::vector<TrainingReport> reports;
  std::vector<FrameSummary> frames;
  std::vector<DynamicMask> all_masks;  ///< every mask ever created
  std::vector<double> ground_heights;  ///< infill mean heights, one per successful infill
  std::size_t failed_frames = 0;
};

/// Runs the whole mapping loop over `scans` (in order) and extracts the mesh.
/// Throws Error when more than half of the frames fail.
MapResult run_map(const std::vector<Scan>& scans, const std::vector<Box3D>& tracks, const PipelineConfig& config,
                  const LogSink& log = nullptr);

Mesh extract_mesh(const NeuralField& field, const PipelineConfig& config);

struct Dataset {
  std::vector<Scan> scans;
  std::vector<Box3D> tracks;
};

/// Scans are the *.bin files of `scans_dir` in name order, paired with the
/// pose lines. A missing tracks file means a static scene.
Dataset load_dataset(const std::filesystem::path& scans_dir, const std::filesystem::path& poses,
                     const std::optional<std::filesystem::path>& tracks);

/// Writes scans/NNNNNN.bin, poses.txt, tracks.csv and gt_points.ply.
void write_dataset(const SyntheticScene& scene, const std::filesystem::path& dir);

/// Reads the vertices of a PLY file (mesh or point cloud).
std::vector<Vec3> read_points_ply(const std::filesystem::path& path);

/// Metrics of `pred` against gt points. A mesh with faces is sampled on its
/// surface; a face-less one is used as a point set.
MetricsReport run_eval(const Mesh& pred, const std::vector<Vec3>& gt, double tau, std::size_t samples,
                       std::uint64_t seed, const std::vector<RigidTransform>* est_poses = nullptr,
                       const std::vector<RigidTransform>* gt_poses = nullptr);

/// Per-iteration training records as JSON lines.
std::string training_records_jsonl(const std::vector<TrainingReport>& reports);

}  // namespace dynsdf
