#include "asmp/motion.hpp"

#include "asmp/error.hpp"

#include <algorithm>
#include <cmath>

namespace asmp {

std::vector<Vec3> lift_displacements(const ArrayFile& flow, const Box& box,
                                     const ArrayFile& depth_ref, const ArrayFile& depth_tgt,
                                     const SimilarityTransform& rectify) {
  require(flow.rank() == 3 && flow.shape[2] == 2, "flow must be [H, W, 2]");
  require(depth_ref.shape == depth_tgt.shape, "reference and target depth differ in shape");
  require(depth_ref.rank() == 2 && depth_ref.shape[0] == flow.shape[0] &&
              depth_ref.shape[1] == flow.shape[1],
          "flow and depth differ in shape");
  if (box.width() <= 0 || box.height() <= 0) fail("empty box");
  const int h = static_cast<int>(flow.shape[0]);
  const int w = static_cast<int>(flow.shape[1]);
  require(box.x0 >= 0 && box.y0 >= 0 && box.x1 <= w && box.y1 <= h, "box outside image");

  const double ref_max = frame_max_depth(depth_ref);
  const double tgt_max = frame_max_depth(depth_tgt);
  const double ref_inv = ref_max > 0.0 ? 1.0 / ref_max : 0.0;
  const double tgt_inv = tgt_max > 0.0 ? 1.0 / tgt_max : 0.0;
  const double sx = 1.0 / (w - 1);
  const double sy = 1.0 / (h - 1);

  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(box.area()));
  for (int r = box.y0; r < box.y1; ++r) {
    for (int c = box.x0; c < box.x1; ++c) {
      const double fx = flow.at(r, c, 0);
      const double fy = flow.at(r, c, 1);
      if (!std::isfinite(fx) || !std::isfinite(fy)) fail("non-finite flow");
      const double ex = std::clamp(c + fx, 0.0, static_cast<double>(w - 1));
      const double ey = std::clamp(r + fy, 0.0, static_cast<double>(h - 1));
      const auto ec = static_cast<std::size_t>(std::lround(ex));
      const auto er = static_cast<std::size_t>(std::lround(ey));
      const Vec3 from(c * sx, r * sy, depth_ref.at(r, c) * ref_inv);
      const Vec3 to = rectify.apply(Vec3(ex * sx, ey * sy, depth_tgt.at(er, ec) * tgt_inv));
      out.push_back(to - from);
    }
  }
  return out;
}

Vec3 median_displacement(std::span<const Vec3> vectors) {
  Vec3 out = Vec3::Zero();
  if (vectors.empty()) return out;
  std::vector<double> comp(vectors.size());
  const std::size_t n = comp.size();
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < n; ++i) comp[i] = vectors[i](k);
    const auto mid = comp.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(comp.begin(), mid, comp.end());
    double m = *mid;
    if (n % 2 == 0) m = 0.5 * (m + *std::max_element(comp.begin(), mid));
    out(k) = m;
  }
  return out;
}

const std::array<Vec3, 26>& direction_templates() {
  static const std::array<Vec3, 26> templates = [] {
    std::array<Vec3, 26> t;
    std::size_t next = 0;
    for (int nonzero = 1; nonzero <= 3; ++nonzero) {
      for (int x = -1; x <= 1; ++x) {
        for (int y = -1; y <= 1; ++y) {
          for (int z = -1; z <= 1; ++z) {
            if ((x != 0) + (y != 0) + (z != 0) != nonzero) continue;
            t[next++] = Vec3(x, y, z).normalized();
          }
        }
      }
    }
    return t;
  }();
  return templates;
}

int quantize10(const Vec3& d, double tau, bool is_background) {
  require(tau >= 0.0, "tau must be non-negative");
  if (is_background) return kOctantBackground;
  if (d.norm() < tau) return kOctantStatic;
  return (d.x() >= 0.0 ? 1 : 0) + (d.y() >= 0.0 ? 2 : 0) + (d.z() >= 0.0 ? 4 : 0);
}

int quantize28(const Vec3& d, double tau, bool is_background) {
  require(tau >= 0.0, "tau must be non-negative");
  if (is_background) return kCubeBackground;
  const double norm = d.norm();
  if (norm < tau || norm == 0.0) return kCubeStatic;
  const auto& templates = direction_templates();
  int best = 0;
  double best_cos = -2.0;
  for (int k = 0; k < 26; ++k) {
    const double cosine = templates[static_cast<std::size_t>(k)].dot(d) / norm;
    if (cosine > best_cos) {
      best_cos = cosine;
      best = k;
    }
  }
  return best;
}

DisplacementLabel make_label(int node, int window, const Vec3& d, double tau, bool is_background) {
  DisplacementLabel l;
  l.node = node;
  l.window = window;
  l.vector = d;
  l.class10 = quantize10(d, tau, is_background);
  l.class28 = quantize28(d, tau, is_background);
  return l;
}

SimilarityTransform window_rectification(const SceneBundle& bundle, int window) {
  if (bundle.tracks.empty()) return {};
  const ArrayFile& t = bundle.tracks.at(static_cast<std::size_t>(window));
  PointCloud ref;
  PointCloud tgt;
  for (std::uint32_t i = 0; i < t.shape[0]; ++i) {
    ref.points.emplace_back(t.at(i, 0), t.at(i, 1), t.at(i, 2));
    tgt.points.emplace_back(t.at(i, 3), t.at(i, 4), t.at(i, 5));
  }
  const IcpResult fit = icp_align(tgt, ref);
  if (fit.status != IcpStatus::kOk) return {};
  // A fit this close to identity is round-off; applying it would only flip
  // the octant bit of components that are exactly zero.
  const auto& f = fit.transform;
  const double off = (f.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() +
                     std::abs(f.scale - 1.0) + f.translation.cwiseAbs().maxCoeff();
  return off < kIdentitySnap ? SimilarityTransform{} : f;
}

std::vector<DisplacementLabel> label_window(const SceneBundle& bundle, int window,
                                            const SceneGraph& graph, double tau) {
  require(window >= 0 && window < bundle.windows(),
          "window " + std::to_string(window) + " out of range");
  if (static_cast<std::size_t>(window) >= bundle.flow.size()) {
    fail("missing flow for window " + std::to_string(window));
  }
  const auto& flow = bundle.flow[static_cast<std::size_t>(window)];
  const auto& ref = bundle.depth.at(static_cast<std::size_t>(bundle.reference_frame(window)));
  const auto& tgt = bundle.depth.at(static_cast<std::size_t>(bundle.target_frame(window)));
  const SimilarityTransform rectify = window_rectification(bundle, window);

  std::vector<DisplacementLabel> out;
  for (int idx : graph.auditory_index) {
    const auto& node = graph.nodes.at(static_cast<std::size_t>(idx));
    const auto vectors = lift_displacements(flow, node.detection.box, ref, tgt, rectify);
    out.push_back(make_label(node.detection.id, window, median_displacement(vectors), tau, false));
  }
  const auto& bg = graph.nodes.at(static_cast<std::size_t>(graph.background_index));
  const auto vectors = lift_displacements(flow, bg.detection.box, ref, tgt, rectify);
  out.push_back(make_label(DisplacementLabel::kBackgroundNode, window,
                           median_displacement(vectors), tau, true));
  return out;
}

std::vector<DisplacementLabel> window_labels(const SceneBundle& bundle,
                                             std::span<const SceneGraph> graphs, double tau) {
  require(static_cast<int>(graphs.size()) == bundle.windows(),
          "expected one graph per window");
  std::vector<DisplacementLabel> out;
  for (int w = 0; w < bundle.windows(); ++w) {
    auto labels = label_window(bundle, w, graphs[static_cast<std::size_t>(w)], tau);
    out.insert(out.end(), labels.begin(), labels.end());
  }
  return out;
}

}  // namespace asmp
