#include "dynsdf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace dynsdf {

namespace {

constexpr std::uint32_t kLeafSize = 8;

void require_nonempty(std::span<const Vec3> a, const char* what) {
  if (a.empty()) throw ValidationError(std::string(what) + " point set is empty");
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[begin], hi = points_[begin];
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[i]);
    hi = hi.cwiseMax(points_[i]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                   [axis](const Vec3& a, const Vec3& b) { return a[axis] < b[axis]; });
  const double split = points_[mid][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, double& best2) const {
  const Node& n = nodes_[id];
  if (n.axis < 0) {
    for (auto i = n.begin; i < n.end; ++i) best2 = std::min(best2, (points_[i] - q).squaredNorm());
    return;
  }
  const double d = q[n.axis] - n.split;
  const auto near = d < 0 ? n.left : n.right;
  const auto far = d < 0 ? n.right : n.left;
  search(near, q, best2);
  if (d * d < best2) search(far, q, best2);
}

double KdTree::nearest_distance(const Vec3& q) const {
  if (points_.empty()) throw ValidationError("nearest-neighbor query on an empty set");
  double best2 = std::numeric_limits<double>::infinity();
  search(0, q, best2);
  return std::sqrt(best2);
}

std::vector<Vec3> sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  validate_mesh(mesh);
  std::vector<double> cumulative;
  cumulative.reserve(mesh.triangles.size());
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    total += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
    cumulative.push_back(total);
  }
  std::vector<Vec3> out;
  if (n == 0 || !(total > 0.0)) return out;
  out.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 0; s < n; ++s) {
    const double r = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    if (it == cumulative.end()) --it;
    const auto& t = mesh.triangles[static_cast<std::size_t>(it - cumulative.begin())];
    double u = unit(rng), v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3& a = mesh.vertices[t[0]];
    out.push_back(a + u * (mesh.vertices[t[1]] - a) + v * (mesh.vertices[t[2]] - a));
  }
  return out;
}

std::vector<double> nearest_distances(std::span<const Vec3> query, std::span<const Vec3> reference) {
  const KdTree tree(reference);
  std::vector<double> d(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) d[i] = tree.nearest_distance(query[i]);
  return d;
}

double accuracy(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  require_nonempty(pred, "predicted");
  require_nonempty(gt, "ground-truth");
  const auto d = nearest_distances(pred, gt);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

double completion(std::span<const Vec3> pred, std::span<const Vec3> gt) { return accuracy(gt, pred); }

double chamfer_l1(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  return 0.5 * (accuracy(pred, gt) + completion(pred, gt));
}

double f_score(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau) {
  require_nonempty(pred, "predicted");
  require_nonempty(gt, "ground-truth");
  if (!(tau > 0.0)) throw ValidationError("F-score threshold must be positive");
  auto fraction_within = [tau](const std::vector<double>& d) {
    const auto n = std::count_if(d.begin(), d.end(), [tau](double x) { return x < tau; });
    return static_cast<double>(n) / static_cast<double>(d.size());
  };
  const double p = fraction_within(nearest_distances(pred, gt));
  const double r = fraction_within(nearest_distances(gt, pred));
  if (p + r == 0.0) return 0.0;
  return 200.0 * p * r / (p + r);
}

RigidTransform kabsch(std::span<const Vec3> from, std::span<const Vec3> to) {
  if (from.size() != to.size() || from.empty()) throw ValidationError("alignment needs equal nonempty point sets");
  const double n = static_cast<double>(from.size());
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    ca += from[i];
    cb += to[i];
  }
  ca /= n;
  cb /= n;
  Mat3 H = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) H += (from[i] - ca) * (to[i] - cb).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) D(2, 2) = -1.0;
  const Mat3 R = svd.matrixV() * D * svd.matrixU().transpose();
  return {R, cb - R * ca};
}

double ate_rmse(std::span<const RigidTransform> est, std::span<const RigidTransform> gt) {
  if (est.size() != gt.size()) throw ValidationError("trajectories differ in length");
  if (est.size() < 2) throw ValidationError("ATE needs at least two poses");
  std::vector<Vec3> a, b;
  for (std::size_t i = 0; i < est.size(); ++i) {
    a.push_back(est[i].T);
    b.push_back(gt[i].T);
  }
  const auto align = kabsch(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (align.apply(a[i]) - b[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(a.size()));
}

std::string MetricsReport::table() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%10s %10s %10s %12s", "Comp.[cm]", "Acc.[cm]", "C-l1[cm]", "F-score[%]");
  out += buf;
  if (ate_rmse_m) out += "    ATE[m]";
  out += '\n';
  std::snprintf(buf, sizeof buf, "%10.3f %10.3f %10.3f %12.2f", completion_cm, accuracy_cm, chamfer_l1_cm, f_score_pct);
  out += buf;
  if (ate_rmse_m) {
    std::snprintf(buf, sizeof buf, " %9.4f", *ate_rmse_m);
    out += buf;
  }
  out += '\n';
  return out;
}

std::string MetricsReport::json() const {
  nlohmann::ordered_json j;
  j["completion_cm"] = completion_cm;
  j["accuracy_cm"] = accuracy_cm;
  j["chamfer_l1_cm"] = chamfer_l1_cm;
  j["f_score_pct"] = f_score_pct;
  j["tau_m"] = tau_m;
  if (ate_rmse_m) j["ate_rmse_m"] = *ate_rmse_m;
  return j.dump();
}

MetricsReport evaluate_points(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau) {
  MetricsReport r;
  r.tau_m = tau;
  r.accuracy_cm = 100.0 * accuracy(pred, gt);
  r.completion_cm = 100.0 * completion(pred, gt);
  r.chamfer_l1_cm = 0.5 * (r.accuracy_cm + r.completion_cm);
  r.f_score_pct = f_score(pred, gt, tau);
  return r;
}

}  // namespace dynsdf
