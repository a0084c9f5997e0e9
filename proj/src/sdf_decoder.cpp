#include "dynsdf/sdf_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace dynsdf {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

double softplus(double z, double beta) {
  const double bz = beta * z;
  if (bz > 30.0) return z;
  return std::log1p(std::exp(bz)) / beta;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

FourierEncoder::FourierEncoder(int k, double sigma2, std::uint64_t seed) : sigma2_(sigma2) {
  if (k < 0) throw ValidationError("Fourier feature count must be nonnegative");
  if (k > 0 && !(sigma2 > 0.0)) throw ValidationError("Fourier variance must be positive");
  B_.resize(k, 3);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
  for (int i = 0; i < k; ++i) {
    for (int a = 0; a < 3; ++a) B_(i, a) = normal(rng);
  }
}

FourierEncoder::FourierEncoder(Matrix B, double sigma2) : B_(std::move(B)), sigma2_(sigma2) {}

void FourierEncoder::encode_into(const Vec3& p, double* out) const {
  for (int i = 0; i < k(); ++i) {
    const double phase = kTwoPi * B_.row(i).dot(p);
    out[2 * i] = std::sin(phase);
    out[2 * i + 1] = std::cos(phase);
  }
}

Eigen::VectorXd FourierEncoder::encode(const Vec3& p) const {
  Eigen::VectorXd out(output_dim());
  encode_into(p, out.data());
  return out;
}

Eigen::MatrixXd FourierEncoder::jacobian(const Vec3& p) const {
  Eigen::MatrixXd J(output_dim(), 3);
  for (int i = 0; i < k(); ++i) {
    const double phase = kTwoPi * B_.row(i).dot(p);
    J.row(2 * i) = kTwoPi * std::cos(phase) * B_.row(i);
    J.row(2 * i + 1) = -kTwoPi * std::sin(phase) * B_.row(i);
  }
  return J;
}

SdfDecoder::SdfDecoder(int input_dim, std::vector<int> hidden, double softplus_beta, std::uint64_t seed)
    : beta_(softplus_beta) {
  if (input_dim < 1) throw ValidationError("decoder input dimension must be positive");
  dims_.push_back(input_dim);
  for (int h : hidden) {
    if (h < 1) throw ValidationError("hidden width must be positive");
    dims_.push_back(h);
  }
  dims_.push_back(1);

  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]) * (dims_[l] + 1);
  }
  params_.resize(total);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::uniform_real_distribution<double> uni(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(dims_[l + 1]) * (dims_[l] + 1);
    for (std::size_t i = 0; i < n; ++i) params_[offsets_[l] + i] = uni(rng);
  }
}

void SdfDecoder::make_constant(double bias) {
  std::fill(params_.begin(), params_.end(), 0.0);
  params_.back() = bias;
}

Eigen::RowVectorXd SdfDecoder::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) {
    throw ValidationError("decoder expects " + std::to_string(input_dim()) + " inputs, got " +
                          std::to_string(x.rows()));
  }
  const std::size_t layers = dims_.size() - 1;
  if (cache) {
    cache->pre.resize(layers - 1);
    cache->post.resize(layers);
    cache->post[0] = x;
  }
  Eigen::MatrixXd act = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = dims_[l], out = dims_[l + 1];
    ConstMatMap W(params_.data() + offsets_[l], out, in);
    ConstVecMap b(params_.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    Eigen::MatrixXd z = W * act;
    z.colwise() += b;
    if (!z.allFinite()) throw NumericError("non-finite activation in decoder layer " + std::to_string(l));
    if (l + 1 == layers) return z;
    act = z.unaryExpr([this](double v) { return softplus(v, beta_); });
    if (cache) {
      cache->pre[l] = std::move(z);
      cache->post[l + 1] = act;
    }
  }
  return {};
}

Eigen::MatrixXd SdfDecoder::backward(const Cache& cache, const Eigen::RowVectorXd& upstream,
                                     std::span<double> param_grad) const {
  if (param_grad.size() != params_.size()) throw ValidationError("gradient buffer has the wrong size");
  const std::size_t layers = dims_.size() - 1;
  Eigen::MatrixXd delta = upstream;  // ∂L/∂z of the current layer, out × N
  for (std::size_t l = layers; l-- > 0;) {
    const int in = dims_[l], out = dims_[l + 1];
    const Eigen::MatrixXd& input = cache.post[l];
    MatMap gW(param_grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(param_grad.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    gW.noalias() += delta * input.transpose();
    gb += delta.rowwise().sum();
    ConstMatMap W(params_.data() + offsets_[l], out, in);
    Eigen::MatrixXd dinput = W.transpose() * delta;
    if (l == 0) return dinput;
    const Eigen::MatrixXd& z = cache.pre[l - 1];
    delta = dinput.cwiseProduct(z.unaryExpr([this](double v) { return sigmoid(beta_ * v); }));
  }
  return {};
}

Eigen::VectorXd concat_input(const FourierEncoder& encoder, const Vec3& p, const Eigen::VectorXd& feature) {
  Eigen::VectorXd x(encoder.output_dim() + feature.size());
  encoder.encode_into(p, x.data());
  x.tail(feature.size()) = feature;
  return x;
}

double predict_sdf(const FourierEncoder& encoder, const SdfDecoder& decoder, const Vec3& p,
                   const Eigen::VectorXd& feature) {
  if (!feature.allFinite()) throw NumericError("non-finite feature vector");
  return decoder.forward(concat_input(encoder, p, feature))(0);
}

DecoderGradients backward(const FourierEncoder& encoder, const SdfDecoder& decoder, const Vec3& p,
                          const Eigen::VectorXd& feature, double upstream) {
  SdfDecoder::Cache cache;
  decoder.forward(concat_input(encoder, p, feature), &cache);
  DecoderGradients g;
  g.params.assign(decoder.num_params(), 0.0);
  const Eigen::MatrixXd dx = decoder.backward(cache, Eigen::RowVectorXd::Constant(1, upstream), g.params);
  const int enc = encoder.output_dim();
  g.feature = dx.col(0).tail(feature.size());
  if (enc > 0) {
    g.position = encoder.jacobian(p).transpose() * dx.col(0).head(enc);
  }
  return g;
}

Vec3 numeric_spatial_gradient(const ScalarField& field, const Vec3& p, double eps) {
  if (!(eps > 0.0)) throw ValidationError("finite-difference step must be positive");
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 hi = p, lo = p;
    hi[a] += eps;
    lo[a] -= eps;
    g[a] = (field(hi) - field(lo)) / (2.0 * eps);
  }
  return g;
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw ValidationError("parameter/gradient size mismatch");
  if (m_.size() < params.size()) {
    m_.resize(params.size(), 0.0);
    v_.resize(params.size(), 0.0);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double step = config_.lr * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) + config_.eps * std::sqrt(c2));
  }
}

}  // namespace dynsdf
