#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dynsdf/dynamic_mask.hpp"
#include "dynsdf/io.hpp"
#include "dynsdf/neural_field.hpp"

namespace dynsdf {

enum class SampleKind : std::uint8_t { NearSurface, FreeSpace };

/// One training ray from the sensor toward a measured (or synthesized) point.
struct RaySample {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  double hit_range = 0.0;
  std::vector<double> sample_depths;  ///< ascending
  std::vector<SampleKind> kinds;
  std::vector<double> targets;  ///< target SDF for NearSurface samples, 0 for FreeSpace

  Vec3 point_at(double depth) const { return origin + depth * direction; }
};

struct SamplerConfig {
  double truncation = 0.3;
  int n_near = 6;
  int n_free = 4;
  std::size_t budget = 8192;  ///< rays per frame
};

/// No point of the frame is eligible for supervision.
class EmptyFrameError : public Error {
 public:
  using Error::Error;
};

/// Draws rays toward Ground, StaticNonGround and synthesized points; never
/// toward DynamicForeground points. Throws EmptyFrameError if nothing is
/// eligible.
std::vector<RaySample> sample_rays(const Scan& scan, std::span<const PointLabel> labels,
                                   std::span<const Vec3> synthesized, const SamplerConfig& config,
                                   std::uint64_t seed);

struct LossValue {
  double value = 0.0;
  bool empty = false;  ///< no samples contributed; value is 0
};

LossValue loss_sdf(std::span<const double> predictions, std::span<const double> targets);
LossValue loss_free_space(std::span<const double> predictions, double truncation);

struct EikonalValue {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;  ///< points whose stencil left the allocated octree
};

/// Mean of (|∇Ψ| − 1)² with ∇Ψ from central differences of step `eps`.
EikonalValue loss_eikonal(std::span<const Vec3> points, const ScalarField& field, double eps);

/// Population variance of the values.
double region_variance(std::span<const double> values);

/// Mean over non-empty regions of the variance of Ψ inside each region.
/// Points where `field` throws NotAllocatedError are dropped.
LossValue loss_dynamic(const std::vector<std::vector<Vec3>>& regions, const ScalarField& field);

struct LossParts {
  double sdf = 0.0;
  double free_space = 0.0;
  double eikonal = 0.0;
  double dynamic = 0.0;
};

struct LossWeights {
  double sdf = 1.0;
  double free_space = 0.5;
  double eikonal = 0.1;
  double dynamic = 50.0;

  void validate() const;
};

struct TotalLoss {
  double total = 0.0;
  LossParts weighted;  ///< each part times its weight
};

TotalLoss total_loss(const LossParts& parts, const LossWeights& weights);

enum class DynamicRegionMode { MaskVolume, RadiusBall };

/// Regular n³ lattice of cell centers filling the mask rectangle between
/// `ground_z` and `ground_z + mask.height`.
std::vector<Vec3> mask_volume_region(const DynamicMask& mask, double ground_z, int n = 4);
/// Lattice points of spacing radius/n inside the ball of `radius` around `center`.
std::vector<Vec3> radius_ball_region(const Vec3& center, double radius, int n = 2);

struct TrainerConfig {
  SamplerConfig sampler;
  LossWeights weights;
  int iterations = 10;
  AdamConfig decoder_adam{1e-3, 0.9, 0.99, 1e-8};
  AdamConfig embedding_adam{1e-3, 0.9, 0.99, 1e-8};
  double grad_clip = 10.0;
  double eikonal_eps = 0.005;
  std::size_t eikonal_points = 256;  ///< per frame, drawn from near-surface samples
  std::uint64_t seed = 1;
};

struct FrameTrainingData {
  std::vector<RaySample> rays;
  std::vector<std::vector<Vec3>> dynamic_regions;
};

struct IterationRecord {
  int iteration = 0;
  LossParts parts;
  double total = 0.0;
};

struct TrainingReport {
  int frame_id = 0;
  std::vector<IterationRecord> records;
  std::size_t near_samples = 0;
  std::size_t free_samples = 0;
  std::size_t eikonal_points = 0;
  std::size_t eikonal_skipped = 0;
  std::size_t dynamic_points = 0;
  bool diverged = false;
  std::string diagnostic;
};

/// Adam state for the decoder and every embedding table.
class FieldOptimizer {
 public:
  FieldOptimizer(const AdamConfig& decoder, const AdamConfig& embeddings)
      : decoder_cfg_(decoder), embedding_cfg_(embeddings), decoder_(decoder) {}
  void step(NeuralField& field, const FieldGradients& grads);

 private:
  AdamConfig decoder_cfg_;
  AdamConfig embedding_cfg_;
  Adam decoder_;
  std::vector<Adam> embeddings_;
};

/// Loss value and full parameter gradient of the weighted objective on a
/// fixed set of training points.
class FrameObjective {
 public:
  FrameObjective(const NeuralField& field, const FrameTrainingData& data, const TrainerConfig& config);

  /// Evaluates the losses; when `grads` is non-null also accumulates the gradient.
  IterationRecord evaluate(const NeuralField& field, FieldGradients* grads) const;

  std::size_t near_count() const { return near_targets_.size(); }
  std::size_t free_count() const { return free_count_; }
  std::size_t eikonal_count() const { return eikonal_count_; }
  std::size_t eikonal_skipped() const { return eikonal_skipped_; }
  std::size_t dynamic_count() const { return dynamic_count_; }

 private:
  const TrainerConfig& config_;
  PreparedPoints points_;  // [near | free | eikonal (6 per point) | dynamic]
  std::vector<double> near_targets_;
  std::size_t free_count_ = 0;
  std::size_t eikonal_count_ = 0;
  std::size_t eikonal_skipped_ = 0;
  std::size_t dynamic_count_ = 0;
  std::vector<std::size_t> region_sizes_;
};

/// Runs `config.iterations` Adam steps on the frame's objective. Stops early
/// and marks the report diverged if a loss or gradient becomes non-finite.
TrainingReport optimize_frame(NeuralField& field, FieldOptimizer& optimizer, const FrameTrainingData& data,
                              const TrainerConfig& config);

struct PoseRefineConfig {
  int iterations = 20;
  double max_uncovered_fraction = 0.5;
  std::size_t max_points = 2000;
  double damping = 1e-4;
  /// Residuals are capped at this magnitude; uncovered points count as capped.
  double residual_cap = 0.3;
};

struct PoseRefineResult {
  RigidTransform pose;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  bool refused = false;
  int accepted_steps = 0;
};

/// Levenberg–Marquardt on a left 6-DoF perturbation minimizing the mean of
/// min(Ψ(pose · p)², cap²) over the scan points. Never returns a worse pose
/// than `init`.
PoseRefineResult refine_pose(const Scan& scan, const NeuralField& field, const RigidTransform& init,
                             const PoseRefineConfig& config = {});

}  // namespace dynsdf
