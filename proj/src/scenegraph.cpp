#include "asmp/scenegraph.hpp"

#include "asmp/error.hpp"
#include "asmp/random.hpp"

#include <algorithm>
#include <array>

namespace asmp {

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kAuditory:
      return "auditory";
    case NodeKind::kContext:
      return "context";
    case NodeKind::kBackground:
      return "background";
  }
  return "?";
}

double iou(const Box& a, const Box& b) {
  if (a.area() <= 0 || b.area() <= 0) fail("iou of a zero-area rectangle");
  const long long iw = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const long long ih = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const long long inter = iw * ih;
  return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

namespace {

// Higher score first; ties by lower class id, then lower box x, then id.
bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.label != b.label) return a.label < b.label;
  if (a.box.x0 != b.box.x0) return a.box.x0 < b.box.x0;
  return a.id < b.id;
}

bool overlaps_any(const Box& crop, const std::vector<Detection>& detections) {
  return std::any_of(detections.begin(), detections.end(),
                     [&](const Detection& d) { return iou(crop, d.box) > 0.0; });
}

}  // namespace

std::vector<Detection> select_context(const Detection& auditory,
                                      const std::vector<Detection>& candidates, double gamma) {
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0, 1]");
  std::vector<Detection> out;
  for (const auto& c : candidates) {
    if (iou(auditory.box, c.box) > gamma) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), ranks_before);
  if (out.size() > GraphConfig::kMaxContext) out.resize(GraphConfig::kMaxContext);
  return out;
}

Box background_crop(int width, int height, const std::vector<Detection>& detections,
                    std::uint64_t seed, bool* fallback) {
  const int cw = std::max(1, width / 2);
  const int ch = std::max(1, height / 2);
  Rng rng(seed);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - cw + 1)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - ch + 1)));
    const Box crop{x0, y0, x0 + cw, y0 + ch};
    if (!overlaps_any(crop, detections)) {
      if (fallback != nullptr) *fallback = false;
      return crop;
    }
  }
  if (fallback != nullptr) *fallback = true;

  // Shrink a crop anchored at each corner until it is box-free; keep the largest.
  Box best{0, 0, 1, 1};
  long long best_area = 0;
  for (int corner = 0; corner < 4; ++corner) {
    for (int w = cw, h = ch; w >= 1 && h >= 1; w = w / 2, h = h / 2) {
      const int x0 = (corner & 1) ? width - w : 0;
      const int y0 = (corner & 2) ? height - h : 0;
      const Box crop{x0, y0, x0 + w, y0 + h};
      if (!overlaps_any(crop, detections)) {
        if (crop.area() > best_area) {
          best = crop;
          best_area = crop.area();
        }
        break;
      }
      if (w == 1 && h == 1) break;
    }
  }
  return best;
}

SceneGraph build_graph(const std::vector<Detection>& detections,
                       const std::set<int>& auditory_catalog, const ArrayFile& depth_frame,
                       const std::vector<float>& background_feature, const GraphConfig& config) {
  require(depth_frame.rank() == 2, "depth frame must be rank 2");
  std::vector<Detection> auditory;
  std::vector<Detection> others;
  for (const auto& d : detections) {
    (auditory_catalog.count(d.label) ? auditory : others).push_back(d);
  }
  if (auditory.empty()) fail("no auditory object");
  std::sort(auditory.begin(), auditory.end(), ranks_before);
  if (auditory.size() > GraphConfig::kMaxAuditory) auditory.resize(GraphConfig::kMaxAuditory);

  SceneGraph g;
  for (const auto& a : auditory) {
    g.auditory_index.push_back(static_cast<int>(g.nodes.size()));
    g.nodes.push_back({a, NodeKind::kAuditory, {}});
  }
  std::set<int> seen;
  for (const auto& a : auditory) {
    for (const auto& c : select_context(a, others, config.gamma)) {
      if (seen.insert(c.id).second) g.nodes.push_back({c, NodeKind::kContext, {}});
    }
  }

  const int width = static_cast<int>(depth_frame.shape[1]);
  const int height = static_cast<int>(depth_frame.shape[0]);
  GraphNode background;
  background.kind = NodeKind::kBackground;
  background.detection.id = DisplacementLabel::kBackgroundNode;
  background.detection.label = -1;
  background.detection.score = 1.0;
  background.detection.feature = background_feature;
  background.detection.box =
      background_crop(width, height, detections, config.seed, &g.background_fallback);
  g.background_index = static_cast<int>(g.nodes.size());
  g.nodes.push_back(std::move(background));

  std::vector<PointCloud> clouds;
  clouds.reserve(g.nodes.size());
  for (auto& node : g.nodes) {
    node.cloud = backproject(depth_frame, node.detection.box, config.stride);
    node.cloud.source_box = node.detection.id;
    clouds.push_back(node.cloud);
  }
  g.distances = pairwise_chamfer(clouds);
  g.sigma = rbf_bandwidth(g.distances, config.percentile);
  g.adjacency = rbf_adjacency(g.distances, config.percentile);
  return g;
}

nlohmann::json graph_to_json(const SceneGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto& n = graph.nodes[i];
    const auto& b = n.detection.box;
    nodes.push_back({{"index", i},
                     {"kind", to_string(n.kind)},
                     {"detection", n.detection.id},
                     {"label", n.detection.label},
                     {"score", n.detection.score},
                     {"box", {b.x0, b.y0, b.x1, b.y1}},
                     {"points", n.cloud.size()}});
  }
  return {{"nodes", nodes},
          {"auditory", graph.auditory_index},
          {"background", graph.background_index},
          {"background_fallback", graph.background_fallback},
          {"sigma", graph.sigma}};
}

}  // namespace asmp
