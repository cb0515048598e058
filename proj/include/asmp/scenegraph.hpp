#pragma once

#include "asmp/geometry.hpp"
#include "asmp/tensorio.hpp"
#include "asmp/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <set>
#include <vector>

namespace asmp {

enum class NodeKind { kAuditory, kContext, kBackground };

const char* to_string(NodeKind kind);

struct GraphNode {
  Detection detection;  // background: id == kBackgroundNode, box == crop
  NodeKind kind = NodeKind::kAuditory;
  PointCloud cloud;
};

struct SceneGraph {
  std::vector<GraphNode> nodes;
  AdjacencyMatrix adjacency;
  DistanceMatrix distances;
  double sigma = 0.0;  // RBF bandwidth used for `adjacency`
  std::vector<int> auditory_index;  // node ids of the auditory objects
  int background_index = -1;
  bool background_fallback = false;  // crop came from the corner search

  std::size_t size() const { return nodes.size(); }
};

struct GraphConfig {
  static constexpr int kMaxAuditory = 2;
  static constexpr int kMaxContext = 20;

  double gamma = 0.1;
  double percentile = 25.0;
  int stride = 1;
  std::uint64_t seed = 0;
};

double iou(const Box& a, const Box& b);

/// Candidates with IoU > gamma against the auditory box, highest score first,
/// at most kMaxContext. Callers pass non-auditory detections only.
std::vector<Detection> select_context(const Detection& auditory,
                                      const std::vector<Detection>& candidates,
                                      double gamma);

/// Quarter-area crop overlapping no box; seeded random search, then a corner
/// fallback. Sets *fallback when the random search failed.
Box background_crop(int width, int height, const std::vector<Detection>& detections,
                    std::uint64_t seed, bool* fallback = nullptr);

SceneGraph build_graph(const std::vector<Detection>& detections,
                       const std::set<int>& auditory_catalog, const ArrayFile& depth_frame,
                       const std::vector<float>& background_feature,
                       const GraphConfig& config = {});

nlohmann::json graph_to_json(const SceneGraph& graph);

}  // namespace asmp
