#include "asmp/geometry.hpp"

#include "asmp/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace asmp {

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.rotation = rotation.transpose();
  inv.scale = 1.0 / scale;
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& first) const {
  SimilarityTransform out;
  out.rotation = rotation * first.rotation;
  out.scale = scale * first.scale;
  out.translation = scale * (rotation * first.translation) + translation;
  return out;
}

double frame_max_depth(const ArrayFile& depth) {
  double mx = 0.0;
  for (float v : depth.data) {
    if (!std::isfinite(v)) fail("non-finite depth value");
    mx = std::max(mx, static_cast<double>(v));
  }
  return mx;
}

PointCloud backproject(const ArrayFile& depth, const Box& box, int stride) {
  require(depth.rank() == 2, "depth frame must be rank 2");
  require(stride > 0, "stride must be positive");
  const int h = static_cast<int>(depth.shape[0]);
  const int w = static_cast<int>(depth.shape[1]);
  if (box.width() <= 0 || box.height() <= 0) fail("empty box");
  require(box.x0 >= 0 && box.y0 >= 0 && box.x1 <= w && box.y1 <= h, "box outside image");
  require(w > 1 && h > 1, "depth frame must be at least 2x2");

  const double max_depth = frame_max_depth(depth);
  const double inv = max_depth > 0.0 ? 1.0 / max_depth : 0.0;
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(
      ((box.height() + stride - 1) / stride) * ((box.width() + stride - 1) / stride)));
  for (int r = box.y0; r < box.y1; r += stride) {
    for (int c = box.x0; c < box.x1; c += stride) {
      const double z = std::max(0.0, static_cast<double>(depth.at(r, c))) * inv;
      cloud.points.emplace_back(static_cast<double>(c) / (w - 1),
                                static_cast<double>(r) / (h - 1), z);
    }
  }
  return cloud;
}

SimilarityTransform fit_similarity(std::span<const Point3> src, std::span<const Point3> dst) {
  require(src.size() == dst.size() && !src.empty(), "fit_similarity needs paired points");
  const double n = static_cast<double>(src.size());
  Vec3 mu_s = Vec3::Zero();
  Vec3 mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 ds = src[i] - mu_s;
    cov += (dst[i] - mu_d) * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov /= n;
  var_s /= n;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s(2, 2) = -1.0;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  t.scale = var_s > 0.0 ? (svd.singularValues().asDiagonal() * s).trace() / var_s : 1.0;
  t.translation = mu_d - t.scale * (t.rotation * mu_s);
  return t;
}

namespace {

std::size_t nearest_index(const Point3& p, const std::vector<Point3>& pool, double* dist2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const double d = (pool[j] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (dist2 != nullptr) *dist2 = best_d;
  return best;
}

bool is_rank_deficient(const std::vector<Point3>& pts) {
  Vec3 mu = Vec3::Zero();
  for (const auto& p : pts) mu += p;
  mu /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mu) * (p - mu).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
  const auto sv = svd.singularValues();
  return sv(0) <= 0.0 || sv(1) <= 1e-12 * sv(0);
}

}  // namespace

IcpResult icp_align(const PointCloud& src, const PointCloud& ref, int max_iters, double tol,
                    IcpInit init) {
  IcpResult result;
  if (src.size() < 3 || ref.size() < 3) {
    result.status = IcpStatus::kDegenerate;
    return result;
  }
  if (is_rank_deficient(src.points) || is_rank_deficient(ref.points)) {
    result.status = IcpStatus::kRankDeficient;
    return result;
  }

  SimilarityTransform current;
  if (init == IcpInit::kTrackedCorrespondences && src.size() == ref.size()) {
    current = fit_similarity(src.points, ref.points);
  }

  std::vector<Point3> paired(src.size());
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    double total = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      double d2 = 0.0;
      paired[i] = ref.points[nearest_index(current.apply(src.points[i]), ref.points, &d2)];
      total += std::sqrt(d2);
    }
    const double residual = total / static_cast<double>(src.size());
    result.iterations = it + 1;
    result.residual = residual;
    if (std::abs(previous - residual) < tol || residual == 0.0) break;
    previous = residual;
    current = fit_similarity(src.points, paired);
  }
  result.transform = current;
  return result;
}

PointCloud apply_transform(const SimilarityTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.source_box = cloud.source_box;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

namespace {

double directed_mean_nn(const PointCloud& from, const PointCloud& to) {
  double total = 0.0;
  for (const auto& p : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to.points) best = std::min(best, (p - q).squaredNorm());
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) fail("chamfer of an empty point cloud");
  return 0.5 * (directed_mean_nn(a, b) + directed_mean_nn(b, a));
}

DistanceMatrix pairwise_chamfer(std::span<const PointCloud> clouds) {
  require(clouds.size() >= 2, "pairwise_chamfer needs at least two clouds");
  for (const auto& c : clouds) {
    if (c.empty()) fail("pairwise_chamfer: empty point cloud");
  }
  const auto n = static_cast<Eigen::Index>(clouds.size());
  DistanceMatrix d{Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = chamfer(clouds[static_cast<std::size_t>(i)], clouds[static_cast<std::size_t>(j)]);
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  }
  const double mx = d.values.maxCoeff();
  if (mx > 0.0) d.values /= mx;
  return d;
}

double offdiagonal_percentile(const Eigen::MatrixXd& m, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) fail("percentile must be in (0, 100]");
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) vals.push_back(m(i, j));
  }
  if (vals.empty()) return 0.0;
  std::sort(vals.begin(), vals.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(vals.size())));
  return vals[std::clamp<std::size_t>(rank, 1, vals.size()) - 1];
}

double rbf_bandwidth(const DistanceMatrix& d, double percentile) {
  return offdiagonal_percentile(d.values, percentile);
}

AdjacencyMatrix rbf_adjacency(const DistanceMatrix& d, double percentile) {
  const double sigma = rbf_bandwidth(d, percentile);
  const Eigen::Index n = d.size();
  AdjacencyMatrix a{Eigen::MatrixXd::Identity(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dij = d.values(i, j);
      if (sigma > 0.0) {
        a.weights(i, j) = std::exp(-dij / (sigma * sigma));
      } else {
        a.weights(i, j) = dij > 0.0 ? 0.0 : 1.0;
      }
    }
  }
  return a;
}

std::pair<AdjacencyMatrix, AdjacencyMatrix> multiscale_adjacency(const DistanceMatrix& d) {
  const Eigen::Index n = d.size();
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) vals.push_back(d.values(i, j));
  }
  double median = 0.0;
  double mx = 0.0;
  if (!vals.empty()) {
    std::sort(vals.begin(), vals.end());
    const std::size_t k = vals.size();
    median = k % 2 == 1 ? vals[k / 2] : 0.5 * (vals[k / 2 - 1] + vals[k / 2]);
    mx = vals.back();
  }
  auto threshold = [&](double t) {
    AdjacencyMatrix a{Eigen::MatrixXd::Identity(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j && d.values(i, j) <= t) a.weights(i, j) = 1.0;
      }
    }
    return a;
  };
  return {threshold(median), threshold(mx)};
}

double sparsity(const AdjacencyMatrix& a, double eps) {
  const Eigen::Index n = a.size();
  if (n < 2) return 0.0;
  long long below = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && a.weights(i, j) < eps) ++below;
    }
  }
  return static_cast<double>(below) / static_cast<double>(n * (n - 1));
}

}  // namespace asmp
