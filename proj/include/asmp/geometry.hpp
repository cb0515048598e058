#pragma once

// Pseudo-3D point clouds, similarity registration, Chamfer distances and
// kernel adjacency.

#include "asmp/tensorio.hpp"
#include "asmp/types.hpp"

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace asmp {

/// (x, y) pixel-normalized to [0, 1], z = depth / frame max depth.
using Point3 = Vec3;

struct PointCloud {
  std::vector<Point3> points;
  int source_box = -1;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct SimilarityTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  static SimilarityTransform identity() { return {}; }

  Point3 apply(const Point3& p) const { return scale * (rotation * p) + translation; }
  SimilarityTransform inverse() const;
  /// (*this) after `first`: x -> this(first(x)).
  SimilarityTransform compose(const SimilarityTransform& first) const;
};

/// Depth frames are rank-2 [H, W] arrays.
PointCloud backproject(const ArrayFile& depth, const Box& box, int stride = 1);

/// Largest value in a depth frame; 0 for an all-zero frame.
double frame_max_depth(const ArrayFile& depth);

enum class IcpStatus { kOk, kDegenerate, kRankDeficient };

struct IcpResult {
  SimilarityTransform transform;
  IcpStatus status = IcpStatus::kOk;
  double residual = 0.0;  // mean paired distance at exit
  int iterations = 0;
};

enum class IcpInit {
  /// Closed-form fit on index-aligned points (tracked correspondences) when
  /// the clouds have equal size, identity otherwise.
  kTrackedCorrespondences,
  kIdentity,
};

/// Least-squares similarity mapping src[i] onto dst[i] (Umeyama).
SimilarityTransform fit_similarity(std::span<const Point3> src, std::span<const Point3> dst);

IcpResult icp_align(const PointCloud& src, const PointCloud& ref, int max_iters = 50,
                    double tol = 1e-12, IcpInit init = IcpInit::kTrackedCorrespondences);

PointCloud apply_transform(const SimilarityTransform& t, const PointCloud& cloud);

/// Symmetrized Chamfer distance: the average of the two directed mean
/// nearest-neighbour distances.
double chamfer(const PointCloud& a, const PointCloud& b);

/// Symmetric, zero diagonal, scaled so the largest entry is 1 (unless all 0).
struct DistanceMatrix {
  Eigen::MatrixXd values;
  Eigen::Index size() const { return values.rows(); }
};

/// Symmetric edge weights; unit diagonal.
struct AdjacencyMatrix {
  Eigen::MatrixXd weights;
  Eigen::Index size() const { return weights.rows(); }
};

DistanceMatrix pairwise_chamfer(std::span<const PointCloud> clouds);

/// Nearest-rank percentile (0 < p <= 100) of the strictly-upper-triangular entries.
double offdiagonal_percentile(const Eigen::MatrixXd& m, double percentile);

/// w_ij = exp(-D_ij / sigma^2), sigma = percentile of the off-diagonal distances.
AdjacencyMatrix rbf_adjacency(const DistanceMatrix& d, double percentile = 25.0);
double rbf_bandwidth(const DistanceMatrix& d, double percentile = 25.0);

/// Binary graphs thresholded at the median and at the max off-diagonal
/// distance (the latter is fully connected).
std::pair<AdjacencyMatrix, AdjacencyMatrix> multiscale_adjacency(const DistanceMatrix& d);

/// Fraction of off-diagonal weights strictly below eps.
double sparsity(const AdjacencyMatrix& a, double eps = 1e-5);

}  // namespace asmp
