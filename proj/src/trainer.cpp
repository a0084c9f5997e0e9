#include "dynsdf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace dynsdf {

std::vector<RaySample> sample_rays(const Scan& scan, std::span<const PointLabel> labels,
                                   std::span<const Vec3> synthesized, const SamplerConfig& config,
                                   std::uint64_t seed) {
  if (config.budget == 0) throw ValidationError("ray budget must be positive");
  if (labels.size() != scan.points.size()) throw ValidationError("label count does not match point count");

  std::vector<Vec3> targets;
  targets.reserve(scan.points.size() + synthesized.size());
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    if (labels[i] != PointLabel::DynamicForeground) targets.push_back(scan.pose.apply(scan.points[i]));
  }
  targets.insert(targets.end(), synthesized.begin(), synthesized.end());
  if (targets.empty()) throw EmptyFrameError("frame " + std::to_string(scan.frame_id) + " has no eligible points");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen(targets.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (chosen.size() > config.budget) {
    for (std::size_t i = 0; i < config.budget; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, chosen.size() - 1);
      std::swap(chosen[i], chosen[pick(rng)]);
    }
    chosen.resize(config.budget);
    std::sort(chosen.begin(), chosen.end());
  }

  const double trunc = config.truncation;
  const Vec3 origin = scan.pose.T;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RaySample> rays;
  rays.reserve(chosen.size());
  std::vector<std::pair<double, SampleKind>> samples;
  for (auto idx : chosen) {
    const Vec3 offset = targets[idx] - origin;
    const double range = offset.norm();
    if (range < 1e-6) continue;
    RaySample ray;
    ray.origin = origin;
    ray.direction = offset / range;
    ray.hit_range = range;
    samples.clear();
    for (int s = 0; s < config.n_near; ++s) {
      samples.emplace_back(range - trunc + 2.0 * trunc * unit(rng), SampleKind::NearSurface);
    }
    const double free_end = range - trunc;
    for (int s = 0; s < config.n_free; ++s) {
      const double d = free_end * unit(rng);
      if (free_end > 0.0 && d > 0.0) samples.emplace_back(d, SampleKind::FreeSpace);
    }
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [depth, kind] : samples) {
      ray.sample_depths.push_back(depth);
      ray.kinds.push_back(kind);
      ray.targets.push_back(kind == SampleKind::NearSurface ? range - depth : 0.0);
    }
    rays.push_back(std::move(ray));
  }
  return rays;
}

LossValue loss_sdf(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw ValidationError("prediction/target size mismatch");
  if (predictions.empty()) return {0.0, true};
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    s += d * d;
  }
  return {s / static_cast<double>(predictions.size()), false};
}

LossValue loss_free_space(std::span<const double> predictions, double truncation) {
  if (predictions.empty()) return {0.0, true};
  double s = 0.0;
  for (double p : predictions) s += (p - truncation) * (p - truncation);
  return {s / static_cast<double>(predictions.size()), false};
}

EikonalValue loss_eikonal(std::span<const Vec3> points, const ScalarField& field, double eps) {
  EikonalValue out;
  double s = 0.0;
  for (const auto& p : points) {
    try {
      const double n = numeric_spatial_gradient(field, p, eps).norm();
      s += (n - 1.0) * (n - 1.0);
      ++out.used;
    } catch (const NotAllocatedError&) {
      ++out.skipped;
    }
  }
  out.value = out.used ? s / static_cast<double>(out.used) : 0.0;
  return out;
}

double region_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  // Shifted by the first value so a constant region gives exactly zero.
  const double n = static_cast<double>(values.size());
  const double v0 = values.front();
  double mean = 0.0;
  for (double v : values) mean += v - v0;
  mean /= n;
  double s = 0.0;
  for (double v : values) s += (v - v0 - mean) * (v - v0 - mean);
  return s / n;
}

LossValue loss_dynamic(const std::vector<std::vector<Vec3>>& regions, const ScalarField& field) {
  double s = 0.0;
  std::size_t used = 0;
  std::vector<double> values;
  for (const auto& region : regions) {
    values.clear();
    for (const auto& p : region) {
      try {
        values.push_back(field(p));
      } catch (const NotAllocatedError&) {
      }
    }
    if (values.empty()) continue;
    s += region_variance(values);
    ++used;
  }
  if (used == 0) return {0.0, true};
  return {s / static_cast<double>(used), false};
}

void LossWeights::validate() const {
  if (!(sdf >= 0.0 && free_space >= 0.0 && eikonal >= 0.0 && dynamic >= 0.0)) {
    throw ValidationError("loss weights must be nonnegative");
  }
}

TotalLoss total_loss(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  TotalLoss out;
  out.weighted = {weights.sdf * parts.sdf, weights.free_space * parts.free_space, weights.eikonal * parts.eikonal,
                  weights.dynamic * parts.dynamic};
  out.total = out.weighted.sdf + out.weighted.free_space + out.weighted.eikonal + out.weighted.dynamic;
  return out;
}

std::vector<Vec3> mask_volume_region(const DynamicMask& mask, double ground_z, int n) {
  std::vector<Vec3> pts;
  if (n < 1) return pts;
  pts.reserve(static_cast<std::size_t>(n) * n * n);
  const Vec2 extent = mask.p_r - mask.p_l;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        pts.emplace_back(mask.p_l.x() + (i + 0.5) / n * extent.x(), mask.p_l.y() + (j + 0.5) / n * extent.y(),
                         ground_z + (k + 0.5) / n * mask.height);
      }
    }
  }
  return pts;
}

std::vector<Vec3> radius_ball_region(const Vec3& center, double radius, int n) {
  std::vector<Vec3> pts;
  const double step = radius / n;
  for (int k = -n; k <= n; ++k) {
    for (int j = -n; j <= n; ++j) {
      for (int i = -n; i <= n; ++i) {
        const Vec3 off(i * step, j * step, k * step);
        if (off.norm() <= radius) pts.push_back(center + off);
      }
    }
  }
  return pts;
}

void FieldOptimizer::step(NeuralField& field, const FieldGradients& grads) {
  decoder_.step(field.decoder().params(), grads.decoder);
  auto& octree = field.octree();
  if (embeddings_.size() < static_cast<std::size_t>(octree.feature_levels())) {
    embeddings_.resize(static_cast<std::size_t>(octree.feature_levels()), Adam(embedding_cfg_));
  }
  for (int l = 0; l < octree.feature_levels(); ++l) embeddings_[l].step(octree.embeddings(l), grads.embeddings[l]);
}

FrameObjective::FrameObjective(const NeuralField& field, const FrameTrainingData& data, const TrainerConfig& config)
    : config_(config) {
  std::vector<Vec3> near, free;
  std::vector<double> near_targets;
  for (const auto& ray : data.rays) {
    for (std::size_t s = 0; s < ray.sample_depths.size(); ++s) {
      const Vec3 p = ray.point_at(ray.sample_depths[s]);
      if (ray.kinds[s] == SampleKind::NearSurface) {
        near.push_back(p);
        near_targets.push_back(ray.targets[s]);
      } else {
        free.push_back(p);
      }
    }
  }

  std::vector<std::size_t> kept;
  std::vector<Vec3> all;
  field.prepare(near, &kept);
  std::vector<Vec3> near_kept;
  for (auto i : kept) {
    near_kept.push_back(near[i]);
    near_targets_.push_back(near_targets[i]);
  }
  all.insert(all.end(), near_kept.begin(), near_kept.end());

  field.prepare(free, &kept);
  for (auto i : kept) all.push_back(free[i]);
  free_count_ = kept.size();

  // Eikonal probes: a seeded subset of covered near-surface samples whose six
  // finite-difference neighbors are also covered.
  std::vector<std::size_t> order(near_kept.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0xe1c0ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const double eps = config.eikonal_eps;
  for (auto idx : order) {
    if (eikonal_count_ >= config.eikonal_points) break;
    std::array<Vec3, 6> probes;
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a) {
      probes[2 * a] = near_kept[idx] + eps * Vec3::Unit(a);
      probes[2 * a + 1] = near_kept[idx] - eps * Vec3::Unit(a);
      ok = field.octree().covered_all(probes[2 * a]) && field.octree().covered_all(probes[2 * a + 1]);
    }
    if (!ok) {
      ++eikonal_skipped_;
      continue;
    }
    all.insert(all.end(), probes.begin(), probes.end());
    ++eikonal_count_;
  }

  for (const auto& region : data.dynamic_regions) {
    field.prepare(region, &kept);
    if (kept.empty()) continue;
    for (auto i : kept) all.push_back(region[i]);
    region_sizes_.push_back(kept.size());
    dynamic_count_ += kept.size();
  }

  points_ = field.prepare(all);
}

IterationRecord FrameObjective::evaluate(const NeuralField& field, FieldGradients* grads) const {
  IterationRecord rec;
  if (points_.size() == 0) return rec;
  SdfDecoder::Cache cache;
  const Eigen::RowVectorXd y = field.forward(points_, grads ? &cache : nullptr);
  Eigen::RowVectorXd upstream = Eigen::RowVectorXd::Zero(y.size());
  const auto& w = config_.weights;
  const double trunc = config_.sampler.truncation;

  Eigen::Index offset = 0;
  const auto n_near = static_cast<Eigen::Index>(near_targets_.size());
  if (n_near > 0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n_near; ++i) {
      const double d = y(offset + i) - near_targets_[i];
      s += d * d;
      upstream(offset + i) = w.sdf * 2.0 * d / static_cast<double>(n_near);
    }
    rec.parts.sdf = s / static_cast<double>(n_near);
  }
  offset += n_near;

  const auto n_free = static_cast<Eigen::Index>(free_count_);
  if (n_free > 0) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n_free; ++i) {
      const double d = y(offset + i) - trunc;
      s += d * d;
      upstream(offset + i) = w.free_space * 2.0 * d / static_cast<double>(n_free);
    }
    rec.parts.free_space = s / static_cast<double>(n_free);
  }
  offset += n_free;

  const auto n_eik = static_cast<Eigen::Index>(eikonal_count_);
  if (n_eik > 0) {
    const double eps = config_.eikonal_eps;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n_eik; ++i) {
      const Eigen::Index base = offset + 6 * i;
      Vec3 g;
      for (int a = 0; a < 3; ++a) g[a] = (y(base + 2 * a) - y(base + 2 * a + 1)) / (2.0 * eps);
      const double n = g.norm();
      s += (n - 1.0) * (n - 1.0);
      if (n > 0.0) {
        const double coeff = w.eikonal * 2.0 * (n - 1.0) / static_cast<double>(n_eik) / n / (2.0 * eps);
        for (int a = 0; a < 3; ++a) {
          upstream(base + 2 * a) = coeff * g[a];
          upstream(base + 2 * a + 1) = -coeff * g[a];
        }
      }
    }
    rec.parts.eikonal = s / static_cast<double>(n_eik);
  }
  offset += 6 * n_eik;

  if (!region_sizes_.empty()) {
    const double R = static_cast<double>(region_sizes_.size());
    double s = 0.0;
    for (auto size : region_sizes_) {
      const auto n = static_cast<Eigen::Index>(size);
      const double mean = y.segment(offset, n).mean();
      double var = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = y(offset + j) - mean;
        var += d * d;
        upstream(offset + j) = w.dynamic * 2.0 * d / static_cast<double>(n) / R;
      }
      s += var / static_cast<double>(n);
      offset += n;
    }
    rec.parts.dynamic = s / R;
  }

  rec.total = total_loss(rec.parts, w).total;
  if (grads) field.backward(points_, cache, upstream, *grads);
  return rec;
}

TrainingReport optimize_frame(NeuralField& field, FieldOptimizer& optimizer, const FrameTrainingData& data,
                              const TrainerConfig& config) {
  config.weights.validate();
  TrainingReport report;
  const FrameObjective objective(field, data, config);
  report.near_samples = objective.near_count();
  report.free_samples = objective.free_count();
  report.eikonal_points = objective.eikonal_count();
  report.eikonal_skipped = objective.eikonal_skipped();
  report.dynamic_points = objective.dynamic_count();

  FieldGradients grads;
  for (int it = 0; it < config.iterations; ++it) {
    grads.reset_like(field);
    IterationRecord rec;
    try {
      rec = objective.evaluate(field, &grads);
    } catch (const NumericError& e) {
      report.diverged = true;
      report.diagnostic = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    rec.iteration = it;
    const double norm2 = grads.squared_norm();
    if (!std::isfinite(rec.total) || !std::isfinite(norm2)) {
      report.diverged = true;
      report.diagnostic = "iteration " + std::to_string(it) + ": non-finite loss or gradient";
      break;
    }
    report.records.push_back(rec);
    const double norm = std::sqrt(norm2);
    if (norm > config.grad_clip) grads.scale(config.grad_clip / norm);
    optimizer.step(field, grads);
  }
  return report;
}

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 K;
  K << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return K;
}

// Mean of min(Ψ², c²) over all points, uncovered points counting c². Without
// the fixed penalty a step could lower the mean by pushing points off the map.
double pose_objective(const NeuralField& field, std::span<const Vec3> pts, const RigidTransform& pose, double c,
                      std::size_t* covered = nullptr) {
  std::vector<Vec3> world;
  world.reserve(pts.size());
  for (const auto& p : pts) world.push_back(pose.apply(p));
  const auto values = field.evaluate(world, std::numeric_limits<double>::quiet_NaN());
  double s = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (std::isnan(v)) {
      s += c * c;
      continue;
    }
    s += std::min(v * v, c * c);
    ++n;
  }
  if (covered) *covered = n;
  return values.empty() ? std::numeric_limits<double>::infinity() : s / static_cast<double>(values.size());
}

}  // namespace

PoseRefineResult refine_pose(const Scan& scan, const NeuralField& field, const RigidTransform& init,
                             const PoseRefineConfig& config) {
  PoseRefineResult result;
  result.pose = init;

  std::vector<Vec3> pts;
  const std::size_t stride = std::max<std::size_t>(1, scan.points.size() / std::max<std::size_t>(1, config.max_points));
  for (std::size_t i = 0; i < scan.points.size(); i += stride) pts.push_back(scan.points[i]);

  std::size_t covered = 0;
  const double c = config.residual_cap;
  result.initial_objective = pose_objective(field, pts, init, c, &covered);
  result.final_objective = result.initial_objective;
  const double uncovered = pts.empty() ? 1.0 : 1.0 - static_cast<double>(covered) / static_cast<double>(pts.size());
  if (uncovered > config.max_uncovered_fraction) {
    result.refused = true;
    return result;
  }

  double lambda = config.damping;
  for (int it = 0; it < config.iterations; ++it) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    std::size_t n = 0;
    for (const auto& ps : pts) {
      const Vec3 p = result.pose.apply(ps);
      const auto psi = field.try_sdf(p);
      if (!psi || std::abs(*psi) >= c) continue;
      const Vec3 g = field.spatial_gradient(p);
      Eigen::Matrix<double, 1, 6> J;
      J.head<3>() = g.transpose() * (-skew(p));
      J.tail<3>() = g.transpose();
      H += J.transpose() * J;
      b += J.transpose() * *psi;
      ++n;
    }
    if (n == 0) break;
    bool accepted = false;
    for (int tries = 0; tries < 8 && !accepted; ++tries) {
      Eigen::Matrix<double, 6, 6> A = H;
      A.diagonal() += lambda * (H.diagonal().array() + 1e-9).matrix();
      const Eigen::Matrix<double, 6, 1> delta = -A.ldlt().solve(b);
      if (!delta.allFinite()) break;
      const Mat3 dR = so3_exp(delta.head<3>());
      RigidTransform candidate{dR * result.pose.R, dR * result.pose.T + delta.tail<3>()};
      const double obj = pose_objective(field, pts, candidate, c);
      if (obj < result.final_objective) {
        result.pose = candidate;
        result.final_objective = obj;
        lambda = std::max(lambda * 0.3, 1e-9);
        accepted = true;
        ++result.accepted_steps;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }
  return result;
}

}  // namespace dynsdf
