#include "dynsdf/neural_field.hpp"

#include <algorithm>

namespace dynsdf {

void FieldGradients::reset_like(const NeuralField& field) {
  decoder.assign(field.decoder().num_params(), 0.0);
  const auto& octree = field.octree();
  embeddings.resize(static_cast<std::size_t>(octree.feature_levels()));
  for (int l = 0; l < octree.feature_levels(); ++l) {
    embeddings[l].assign(octree.embeddings(l).size(), 0.0);
  }
}

double FieldGradients::squared_norm() const {
  double s = 0.0;
  for (double g : decoder) s += g * g;
  for (const auto& table : embeddings) {
    for (double g : table) s += g * g;
  }
  return s;
}

void FieldGradients::scale(double s) {
  for (double& g : decoder) g *= s;
  for (auto& table : embeddings) {
    for (double& g : table) g *= s;
  }
}

NeuralField::NeuralField(const FieldConfig& config)
    : config_(config),
      octree_(config.octree),
      encoder_(config.use_fourier ? FourierEncoder(config.fourier_k, config.sigma2, config.seed ^ 0xf0f0ULL)
                                  : FourierEncoder()),
      decoder_(encoder_.output_dim() + config.octree.feature_dim, config.hidden, config.softplus_beta,
               config.seed) {
  if (!(config.encoding_scale > 0.0)) throw ValidationError("encoding scale must be positive");
}

double NeuralField::sdf(const Vec3& p) const {
  const auto stencil = octree_.feature_gradient_weights(p);
  Eigen::VectorXd feature(octree_.feature_dim());
  octree_.gather(stencil, feature.data());
  return predict_sdf(encoder_, decoder_, encoding_input(p), feature);
}

std::optional<double> NeuralField::try_sdf(const Vec3& p) const {
  FeatureStencil stencil;
  if (!octree_.try_stencil(p, stencil)) return std::nullopt;
  Eigen::VectorXd feature(octree_.feature_dim());
  octree_.gather(stencil, feature.data());
  return predict_sdf(encoder_, decoder_, encoding_input(p), feature);
}

Vec3 NeuralField::spatial_gradient(const Vec3& p) const {
  const auto stencil = octree_.feature_gradient_weights(p);
  Eigen::VectorXd feature(octree_.feature_dim());
  octree_.gather(stencil, feature.data());
  const auto g = dynsdf::backward(encoder_, decoder_, encoding_input(p), feature, 1.0);
  return g.position / config_.encoding_scale + octree_.feature_jacobian(stencil).transpose() * g.feature;
}

ScalarField NeuralField::closure() const {
  return [this](const Vec3& p) { return sdf(p); };
}

PreparedPoints NeuralField::prepare(std::span<const Vec3> points, std::vector<std::size_t>* kept) const {
  PreparedPoints out;
  out.positions.reserve(points.size());
  out.stencils.reserve(points.size());
  if (kept) kept->clear();
  FeatureStencil stencil;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!octree_.try_stencil(points[i], stencil)) continue;
    out.positions.push_back(points[i]);
    out.stencils.push_back(stencil);
    if (kept) kept->push_back(i);
  }
  out.encodings.resize(encoder_.output_dim(), static_cast<Eigen::Index>(out.positions.size()));
  for (std::size_t i = 0; i < out.positions.size(); ++i) {
    encoder_.encode_into(encoding_input(out.positions[i]), out.encodings.col(static_cast<Eigen::Index>(i)).data());
  }
  return out;
}

Eigen::MatrixXd NeuralField::build_input(const PreparedPoints& pts) const {
  const int enc = encoder_.output_dim();
  const int F = octree_.feature_dim();
  Eigen::MatrixXd x(enc + F, static_cast<Eigen::Index>(pts.size()));
  if (enc > 0) x.topRows(enc) = pts.encodings;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    octree_.gather(pts.stencils[i], x.col(static_cast<Eigen::Index>(i)).data() + enc);
  }
  return x;
}

Eigen::RowVectorXd NeuralField::forward(const PreparedPoints& pts, SdfDecoder::Cache* cache) const {
  if (pts.size() == 0) return {};
  return decoder_.forward(build_input(pts), cache);
}

void NeuralField::backward(const PreparedPoints& pts, const SdfDecoder::Cache& cache,
                           const Eigen::RowVectorXd& upstream, FieldGradients& grads) const {
  if (pts.size() == 0) return;
  const Eigen::MatrixXd dx = decoder_.backward(cache, upstream, grads.decoder);
  const int enc = encoder_.output_dim();
  const int F = octree_.feature_dim();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double* dfeat = dx.col(static_cast<Eigen::Index>(i)).data() + enc;
    for (const auto& s : pts.stencils[i]) {
      double* table = grads.embeddings[s.level].data();
      for (int v = 0; v < 8; ++v) {
        const double w = s.weights[v];
        if (w == 0.0) continue;
        double* g = table + static_cast<std::size_t>(s.rows[v]) * F;
        for (int c = 0; c < F; ++c) g[c] += w * dfeat[c];
      }
    }
  }
}

std::vector<double> NeuralField::evaluate(std::span<const Vec3> points, double sentinel) const {
  std::vector<double> out(points.size(), sentinel);
  constexpr std::size_t kChunk = 8192;
  std::vector<std::size_t> kept;
  for (std::size_t start = 0; start < points.size(); start += kChunk) {
    const auto chunk = points.subspan(start, std::min(kChunk, points.size() - start));
    const auto prepared = prepare(chunk, &kept);
    if (prepared.size() == 0) continue;
    const auto values = forward(prepared);
    for (std::size_t i = 0; i < kept.size(); ++i) out[start + kept[i]] = values(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace dynsdf
