#pragma once

#include <Eigen/Core>

#include <vector>

namespace asmp {

using Vec3 = Eigen::Vector3d;

/// Pixel rectangle, half-open: columns [x0, x1), rows [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long long area() const {
    return static_cast<long long>(width()) * static_cast<long long>(height());
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// One detector output: (class, box, feature, score).
struct Detection {
  int id = 0;
  int label = 0;
  Box box;
  std::vector<float> feature;
  double score = 0.0;
};

/// Ground-truth or pipeline displacement of one node over one window.
/// `node` is the detection id, or kBackgroundNode for the background.
struct DisplacementLabel {
  static constexpr int kBackgroundNode = -1;

  int node = 0;
  int window = 0;
  Vec3 vector = Vec3::Zero();
  int class10 = 0;
  int class28 = 0;
};

}  // namespace asmp
