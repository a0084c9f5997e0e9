#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dynsdf/types.hpp"

namespace dynsdf {

/// Decoder weights and their gradients. Aligned so that Eigen's product
/// kernels take the same path on every allocation; with unaligned storage the
/// summation order (and so the last bits of the result) depends on the address.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Fixed random Fourier features: p ↦ [sin(2π B_i·p), cos(2π B_i·p)]_{i=1..k}
/// with every entry of B drawn from N(0, σ²). k = 0 disables the encoding.
class FourierEncoder {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  FourierEncoder() = default;
  FourierEncoder(int k, double sigma2, std::uint64_t seed);
  explicit FourierEncoder(Matrix B, double sigma2 = 0.0);

  int k() const { return static_cast<int>(B_.rows()); }
  int output_dim() const { return 2 * k(); }
  double sigma2() const { return sigma2_; }
  const Matrix& B() const { return B_; }

  Eigen::VectorXd encode(const Vec3& p) const;
  void encode_into(const Vec3& p, double* out) const;
  /// ∂γ/∂p, shape (2k × 3).
  Eigen::MatrixXd jacobian(const Vec3& p) const;

 private:
  Matrix B_ = Matrix(0, 3);
  double sigma2_ = 0.0;
};

/// Fully connected SDF head with softplus hidden activations and a scalar
/// linear output. Parameters live in one flat vector, layer by layer, each
/// layer as a column-major weight matrix followed by its bias.
class SdfDecoder {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> pre;   // per hidden layer, before activation
    std::vector<Eigen::MatrixXd> post;  // layer inputs; post[0] is the batch input
  };

  SdfDecoder() = default;
  SdfDecoder(int input_dim, std::vector<int> hidden, double softplus_beta, std::uint64_t seed);

  int input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  const std::vector<int>& dims() const { return dims_; }
  double softplus_beta() const { return beta_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Batched forward pass; each column of `x` is one input. Throws
  /// NumericError naming the layer if a non-finite value appears.
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  /// Accumulates ∂L/∂θ into `param_grad` for upstream ∂L/∂y and returns ∂L/∂x.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::RowVectorXd& upstream,
                           std::span<double> param_grad) const;

  /// Sets every weight to zero and the output bias to `bias`.
  void make_constant(double bias);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<int> dims_;
  std::vector<std::size_t> offsets_;
  ParamVector params_;
  double beta_ = 10.0;
};

Eigen::VectorXd concat_input(const FourierEncoder& encoder, const Vec3& p, const Eigen::VectorXd& feature);

/// Ψ(p) = f(γ(p), feature).
double predict_sdf(const FourierEncoder& encoder, const SdfDecoder& decoder, const Vec3& p,
                   const Eigen::VectorXd& feature);

struct DecoderGradients {
  ParamVector params;
  Eigen::VectorXd feature;
  Vec3 position = Vec3::Zero();  ///< through the Fourier encoding only
};

/// Reverse-mode gradients of upstream · Ψ(p, feature).
DecoderGradients backward(const FourierEncoder& encoder, const SdfDecoder& decoder, const Vec3& p,
                          const Eigen::VectorXd& feature, double upstream);

using ScalarField = std::function<double(const Vec3&)>;

/// Central differences (Ψ(p + ε e_a) − Ψ(p − ε e_a)) / 2ε along each axis.
Vec3 numeric_spatial_gradient(const ScalarField& field, const Vec3& p, double eps);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam over one flat parameter group; moments grow with the group.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void step(std::span<double> params, std::span<const double> grads);
  long steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace dynsdf
