#pragma once

// Forward-only, seeded toy-scale networks: graph attention, edge convolution,
// graph pooling, GRU rollout, U-Net mask decoder and the two classifiers.
// Nothing here is trained; the passes exist to exercise shapes, invariants
// and pipeline plumbing.

#include "asmp/audio.hpp"
#include "asmp/geometry.hpp"
#include "asmp/losses.hpp"
#include "asmp/scenegraph.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace asmp::nn {

inline constexpr int kFeatureDim = 512;
inline constexpr int kHeads = 4;
inline constexpr int kHeadDim = kFeatureDim / kHeads;
inline constexpr int kEmbeddingDim = 512;
inline constexpr int kPooledDim = 2 * kFeatureDim;
inline constexpr double kLeakySlope = 0.2;
/// Edges lighter than this are dropped from message passing.
inline constexpr double kEdgeEps = 1e-5;

struct NetConfig {
  int audio_classes = 3;  // K: auditory catalog size + 1 background class
  std::vector<int> encoder_channels = {8, 16, 32, 64, 128, 256, 512};
  std::vector<int> classifier_channels = {8, 16, 32, 64};
  int direction_hidden = 128;
};

/// Named weights, Glorot-uniform from a 64-bit seed (biases start at zero).
/// Convolution kernels are stored as [out, in * 4 * 4].
class NetParams {
 public:
  NetParams() = default;
  NetParams(std::uint64_t seed, NetConfig config);

  const Eigen::MatrixXd& get(const std::string& name) const;
  const NetConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  const std::map<std::string, Eigen::MatrixXd>& tensors() const { return tensors_; }

  /// One ArrayFile per tensor plus params.json.
  void save(const std::filesystem::path& dir) const;

 private:
  void add(const std::string& name, int rows, int cols, int fan_in, int fan_out, bool bias);

  std::uint64_t seed_ = 0;
  NetConfig config_;
  std::map<std::string, Eigen::MatrixXd> tensors_;
};

/// Rows are nodes.
using NodeFeatures = Eigen::MatrixXd;

NodeFeatures node_features(const SceneGraph& graph);

NodeFeatures gat_forward(const NodeFeatures& x, const AdjacencyMatrix& adjacency,
                         const NetParams& params);
NodeFeatures gat_forward(const SceneGraph& graph, const NetParams& params);

NodeFeatures edgeconv_forward(const NodeFeatures& x, const AdjacencyMatrix& adjacency,
                              const NetParams& params);

/// concat(max over nodes, mean over nodes).
Eigen::VectorXd pool(const NodeFeatures& x);

/// N + 1 unit-norm hidden states.
EmbeddingSet gru_rollout(const Eigen::VectorXd& zeta, int sources, const NetParams& params);

/// Channel-major feature map.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
};

/// 4x4 kernel, stride 2, padding 1: halves each spatial dimension.
FeatureMap conv_down(const FeatureMap& in, const Eigen::MatrixXd& weight, const Eigen::MatrixXd& bias);
/// 4x4 transposed kernel, stride 2, padding 1: doubles each spatial dimension.
FeatureMap conv_up(const FeatureMap& in, const Eigen::MatrixXd& weight, const Eigen::MatrixXd& bias);

/// 256x256 magnitude spectrogram and one embedding -> 256x256 mask in [0, 1].
Mask mask_decoder_forward(const MagnitudeSpectrogram& x, const Eigen::VectorXd& embedding,
                          const NetParams& params);

/// Softmax over the K audio classes.
Eigen::RowVectorXd audio_classifier_forward(const MagnitudeSpectrogram& separated,
                                            const NetParams& params);

/// Softmax over 10 or 28 direction classes for one time slice.
Eigen::RowVectorXd direction_classifier_forward(const MagnitudeSpectrogram& slice,
                                                const Eigen::VectorXd& embedding,
                                                const NetParams& params, int classes);

/// (first frame, frame count) per window: equal widths floor(T / W), the
/// remainder frames joining the last slice.
std::vector<std::pair<int, int>> window_slices(int frames, int windows);

struct NetworkOutput {
  Eigen::VectorXd zeta;
  EmbeddingSet embeddings;                // N + 1
  std::vector<Mask> masks;                // N + 1, 256 x T
  ProbTable audio_probs;                  // (N + 1) x K
  std::vector<ProbTable> direction_probs; // per window, (N + 1) x classes
};

/// Graph -> zeta -> GRU -> masks -> classifiers for one video.
NetworkOutput run_network(const SceneGraph& graph, const MagnitudeSpectrogram& mixture,
                          const NetParams& params, int windows, int classes);

}  // namespace asmp::nn
