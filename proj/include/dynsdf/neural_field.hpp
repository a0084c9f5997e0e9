#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dynsdf/octree_field.hpp"
#include "dynsdf/sdf_decoder.hpp"

namespace dynsdf {

struct FieldConfig {
  OctreeConfig octree;
  bool use_fourier = true;
  int fourier_k = 32;
  double sigma2 = 50.0;
  /// World coordinates are divided by this length before the Fourier encoding.
  double encoding_scale = 25.6;
  std::vector<int> hidden = {64, 64};
  double softplus_beta = 10.0;
  std::uint64_t seed = 1;
};

/// Query points resolved against the octree once, so repeated evaluation
/// only re-gathers embeddings.
struct PreparedPoints {
  std::vector<Vec3> positions;
  std::vector<FeatureStencil> stencils;
  Eigen::MatrixXd encodings;  ///< 2k × N
  std::size_t size() const { return positions.size(); }
};

/// Gradients of a scalar loss with respect to every trainable parameter.
struct FieldGradients {
  ParamVector decoder;
  std::vector<std::vector<double>> embeddings;  ///< one table per feature level

  void reset_like(const class NeuralField& field);
  double squared_norm() const;
  void scale(double s);
};

/// Octree features + Fourier encoding + MLP decoder: the neural SDF Ψ.
class NeuralField {
 public:
  explicit NeuralField(const FieldConfig& config = {});

  FeatureOctree& octree() { return octree_; }
  const FeatureOctree& octree() const { return octree_; }
  const FourierEncoder& encoder() const { return encoder_; }
  SdfDecoder& decoder() { return decoder_; }
  const SdfDecoder& decoder() const { return decoder_; }
  const FieldConfig& config() const { return config_; }

  Vec3 encoding_input(const Vec3& p) const { return p / config_.encoding_scale; }

  /// Throws NotAllocatedError when p is outside the allocated octree.
  double sdf(const Vec3& p) const;
  std::optional<double> try_sdf(const Vec3& p) const;
  /// Analytic ∇Ψ through both the encoding and the trilinear weights.
  Vec3 spatial_gradient(const Vec3& p) const;
  ScalarField closure() const;

  /// Resolves the covered subset of `points`; `kept` (optional) receives the
  /// source index of every prepared point.
  PreparedPoints prepare(std::span<const Vec3> points, std::vector<std::size_t>* kept = nullptr) const;
  Eigen::MatrixXd build_input(const PreparedPoints& pts) const;
  Eigen::RowVectorXd forward(const PreparedPoints& pts, SdfDecoder::Cache* cache = nullptr) const;
  /// Accumulates gradients of Σ upstream_i · Ψ(p_i) into `grads`.
  void backward(const PreparedPoints& pts, const SdfDecoder::Cache& cache, const Eigen::RowVectorXd& upstream,
                FieldGradients& grads) const;

  /// Ψ at each point, `sentinel` where uncovered.
  std::vector<double> evaluate(std::span<const Vec3> points, double sentinel) const;

  // Checkpoint support.
  void set_encoder(FourierEncoder encoder) { encoder_ = std::move(encoder); }
  void set_decoder(SdfDecoder decoder) { decoder_ = std::move(decoder); }

 private:
  FieldConfig config_;
  FeatureOctree octree_;
  FourierEncoder encoder_;
  SdfDecoder decoder_;
};

}  // namespace dynsdf
