#include "asmp/neural.hpp"

#include "asmp/error.hpp"
#include "asmp/random.hpp"
#include "asmp/tensorio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace asmp::nn {

namespace {

constexpr int kKernel = 4;
constexpr int kTaps = kKernel * kKernel;

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double leaky(double v) { return v > 0.0 ? v : kLeakySlope * v; }
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

template <typename Derived>
void leaky_inplace(Eigen::MatrixBase<Derived>& m) {
  m = m.unaryExpr([](double v) { return leaky(v); });
}

void leaky_inplace(FeatureMap& f) {
  for (double& v : f.data) v = leaky(v);
}

Eigen::RowVectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::RowVectorXd p = (logits.array() - mx).exp().matrix().transpose();
  return p / p.sum();
}

FeatureMap from_matrix(const Eigen::MatrixXd& m) {
  FeatureMap f(1, static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) f.at(0, y, x) = std::log1p(std::max(0.0, m(y, x)));
  }
  return f;
}

FeatureMap concat(const FeatureMap& a, const FeatureMap& b) {
  require(a.height == b.height && a.width == b.width, "feature map concat: spatial mismatch");
  FeatureMap out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

Eigen::VectorXd global_average(const FeatureMap& f) {
  Eigen::VectorXd v(f.channels);
  const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
  for (int c = 0; c < f.channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += f.data[c * plane + i];
    v(c) = s / static_cast<double>(plane);
  }
  return v;
}

FeatureMap conv_stack(FeatureMap f, const NetParams& params, const std::string& prefix,
                      std::size_t stages) {
  for (std::size_t k = 0; k < stages; ++k) {
    const std::string name = prefix + std::to_string(k);
    f = conv_down(f, params.get(name + ".w"), params.get(name + ".b"));
    leaky_inplace(f);
  }
  return f;
}

void check_features(const NodeFeatures& x, const AdjacencyMatrix& a) {
  require(x.cols() == kFeatureDim, "node features must be " + std::to_string(kFeatureDim) +
                                       "-dimensional, got " + std::to_string(x.cols()));
  require(x.rows() >= 1, "graph has no nodes");
  require(a.size() == x.rows(), "adjacency dimension does not match node count");
}

}  // namespace

NetParams::NetParams(std::uint64_t seed, NetConfig config) : seed_(seed), config_(std::move(config)) {
  require(config_.audio_classes >= 1, "audio classifier needs at least one class");
  for (int h = 0; h < kHeads; ++h) {
    const std::string p = "gat.head" + std::to_string(h);
    add(p + ".w", kHeadDim, kFeatureDim, kFeatureDim, kHeadDim, false);
    add(p + ".a_src", 1, kHeadDim, kHeadDim, 1, false);
    add(p + ".a_dst", 1, kHeadDim, kHeadDim, 1, false);
  }
  add("edge.w", kFeatureDim, 2 * kFeatureDim, 2 * kFeatureDim, kFeatureDim, false);
  add("edge.b", kFeatureDim, 1, 0, 0, true);

  add("gru.proj.w", kEmbeddingDim, kPooledDim, kPooledDim, kEmbeddingDim, false);
  add("gru.proj.b", kEmbeddingDim, 1, 0, 0, true);
  for (const char* gate : {"r", "z", "n"}) {
    const std::string g(gate);
    add("gru.w_i" + g, kEmbeddingDim, kEmbeddingDim, kEmbeddingDim, kEmbeddingDim, false);
    add("gru.w_h" + g, kEmbeddingDim, kEmbeddingDim, kEmbeddingDim, kEmbeddingDim, false);
    add("gru.b_i" + g, kEmbeddingDim, 1, 0, 0, true);
    add("gru.b_h" + g, kEmbeddingDim, 1, 0, 0, true);
  }

  const auto& enc = config_.encoder_channels;
  require(enc.size() == 7 && enc.back() == kEmbeddingDim,
          "mask decoder needs 7 encoder stages ending at 512 channels");
  int in = 1;
  for (std::size_t k = 0; k < enc.size(); ++k) {
    const std::string p = "enc" + std::to_string(k);
    add(p + ".w", enc[k], in * kTaps, in * kTaps, enc[k] * kTaps, false);
    add(p + ".b", enc[k], 1, 0, 0, true);
    in = enc[k];
  }
  // Decoder: bottleneck (encoder + tiled embedding), then 6 stages with
  // skips and a final single-channel stage.
  in = enc.back() + kEmbeddingDim;
  for (std::size_t k = 0; k < enc.size(); ++k) {
    const bool last = k + 1 == enc.size();
    const int out = last ? 1 : enc[enc.size() - 2 - k];
    const std::string p = "dec" + std::to_string(k);
    add(p + ".w", out, in * kTaps, in * kTaps, out * kTaps, false);
    add(p + ".b", out, 1, 0, 0, true);
    in = last ? 0 : 2 * out;
  }

  in = 1;
  for (std::size_t k = 0; k < config_.classifier_channels.size(); ++k) {
    const int out = config_.classifier_channels[k];
    for (const char* prefix : {"cls.conv", "dir.conv"}) {
      const std::string p = prefix + std::to_string(k);
      add(p + ".w", out, in * kTaps, in * kTaps, out * kTaps, false);
      add(p + ".b", out, 1, 0, 0, true);
    }
    in = out;
  }
  const int embed = config_.classifier_channels.back();
  add("cls.out.w", config_.audio_classes, embed, embed, config_.audio_classes, false);
  add("cls.out.b", config_.audio_classes, 1, 0, 0, true);
  const int hidden = config_.direction_hidden;
  add("dir.hidden.w", hidden, embed + kEmbeddingDim, embed + kEmbeddingDim, hidden, false);
  add("dir.hidden.b", hidden, 1, 0, 0, true);
  for (int classes : {10, 28}) {
    const std::string p = "dir" + std::to_string(classes) + ".out";
    add(p + ".w", classes, hidden, hidden, classes, false);
    add(p + ".b", classes, 1, 0, 0, true);
  }
}

void NetParams::add(const std::string& name, int rows, int cols, int fan_in, int fan_out,
                    bool bias) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  if (!bias) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(derive_seed(seed_, name_hash(name)));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
    }
  }
  tensors_.emplace(name, std::move(m));
}

const Eigen::MatrixXd& NetParams::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) fail("unknown parameter " + name);
  return it->second;
}

void NetParams::save(const std::filesystem::path& dir) const {
  nlohmann::json index;
  index["seed"] = seed_;
  index["audio_classes"] = config_.audio_classes;
  index["encoder_channels"] = config_.encoder_channels;
  index["classifier_channels"] = config_.classifier_channels;
  index["direction_hidden"] = config_.direction_hidden;
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [name, m] : tensors_) {
    const std::string file = name + ".a3mp";
    write_array(matrix_to_array(m), dir / file);
    files[name] = {{"file", file}, {"shape", {m.rows(), m.cols()}}};
  }
  index["tensors"] = files;
  write_json(index, dir / "params.json");
}

NodeFeatures node_features(const SceneGraph& graph) {
  NodeFeatures x(static_cast<Eigen::Index>(graph.size()), kFeatureDim);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& f = graph.nodes[i].detection.feature;
    if (f.size() != static_cast<std::size_t>(kFeatureDim)) {
      fail("node " + std::to_string(i) + " feature has dimension " + std::to_string(f.size()) +
           ", expected " + std::to_string(kFeatureDim));
    }
    for (int k = 0; k < kFeatureDim; ++k) x(static_cast<Eigen::Index>(i), k) = f[static_cast<std::size_t>(k)];
  }
  return x;
}

NodeFeatures gat_forward(const NodeFeatures& x, const AdjacencyMatrix& adjacency,
                         const NetParams& params) {
  check_features(x, adjacency);
  const Eigen::Index n = x.rows();
  NodeFeatures out(n, kFeatureDim);
  for (int h = 0; h < kHeads; ++h) {
    const std::string p = "gat.head" + std::to_string(h);
    const Eigen::MatrixXd z = x * params.get(p + ".w").transpose();  // n x 128
    const Eigen::VectorXd src = z * params.get(p + ".a_src").transpose();
    const Eigen::VectorXd dst = z * params.get(p + ".a_dst").transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd logits = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = adjacency.weights(i, j);
        if (w > 0.0) logits(j) = leaky(src(i) + dst(j)) + std::log(w);
      }
      const double mx = logits.maxCoeff();
      Eigen::VectorXd alpha = (logits.array() - mx).exp();
      alpha /= alpha.sum();
      Eigen::RowVectorXd msg = alpha.transpose() * z;
      leaky_inplace(msg);
      out.block(i, h * kHeadDim, 1, kHeadDim) = msg;
    }
  }
  return out;
}

NodeFeatures gat_forward(const SceneGraph& graph, const NetParams& params) {
  return gat_forward(node_features(graph), graph.adjacency, params);
}

NodeFeatures edgeconv_forward(const NodeFeatures& x, const AdjacencyMatrix& adjacency,
                              const NetParams& params) {
  check_features(x, adjacency);
  const Eigen::MatrixXd& w = params.get("edge.w");
  const Eigen::VectorXd b = params.get("edge.b").col(0);
  const Eigen::MatrixXd w_self = w.leftCols(kFeatureDim);
  const Eigen::MatrixXd w_diff = w.rightCols(kFeatureDim);
  const Eigen::Index n = x.rows();
  // [x_i ; x_j - x_i] through the dense layer splits into a per-node term and
  // a per-neighbour term.
  const Eigen::MatrixXd self_term = x * (w_self - w_diff).transpose();
  const Eigen::MatrixXd nbr_term = x * w_diff.transpose();
  NodeFeatures out(n, kFeatureDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd best = Eigen::RowVectorXd::Constant(kFeatureDim, -std::numeric_limits<double>::infinity());
    bool any = false;
    auto visit = [&](Eigen::Index j) {
      Eigen::RowVectorXd h = self_term.row(i) + nbr_term.row(j) + b.transpose();
      leaky_inplace(h);
      best = best.cwiseMax(h);
      any = true;
    };
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && adjacency.weights(i, j) >= kEdgeEps) visit(j);
    }
    if (!any) visit(i);
    out.row(i) = best;
  }
  return out;
}

Eigen::VectorXd pool(const NodeFeatures& x) {
  if (x.rows() == 0) fail("pool of an empty graph");
  Eigen::VectorXd z(2 * x.cols());
  z.head(x.cols()) = x.colwise().maxCoeff().transpose();
  z.tail(x.cols()) = x.colwise().mean().transpose();
  return z;
}

EmbeddingSet gru_rollout(const Eigen::VectorXd& zeta, int sources, const NetParams& params) {
  require(sources >= 1, "gru_rollout needs N >= 1");
  require(zeta.size() == kPooledDim, "graph embedding must be " + std::to_string(kPooledDim) + "-dimensional");
  const Eigen::VectorXd input =
      params.get("gru.proj.w") * zeta + params.get("gru.proj.b").col(0);
  auto gate = [&](const char* g) {
    return params.get(std::string("gru.w_i") + g) * input + params.get(std::string("gru.b_i") + g).col(0);
  };
  const Eigen::VectorXd in_r = gate("r");
  const Eigen::VectorXd in_z = gate("z");
  const Eigen::VectorXd in_n = gate("n");

  Eigen::VectorXd h = Eigen::VectorXd::Zero(kEmbeddingDim);
  EmbeddingSet out;
  for (int step = 0; step <= sources; ++step) {
    const Eigen::VectorXd hr = params.get("gru.w_hr") * h + params.get("gru.b_hr").col(0);
    const Eigen::VectorXd hz = params.get("gru.w_hz") * h + params.get("gru.b_hz").col(0);
    const Eigen::VectorXd hn = params.get("gru.w_hn") * h + params.get("gru.b_hn").col(0);
    const Eigen::VectorXd r = (in_r + hr).unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::VectorXd z = (in_z + hz).unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::VectorXd cand = (in_n + r.cwiseProduct(hn)).array().tanh().matrix();
    h = (Eigen::VectorXd::Ones(kEmbeddingDim) - z).cwiseProduct(cand) + z.cwiseProduct(h);
    const double norm = h.norm();
    if (!(norm > 0.0)) fail("GRU produced a zero hidden state");
    out.push_back(h / norm);
  }
  return out;
}

FeatureMap conv_down(const FeatureMap& in, const Eigen::MatrixXd& weight, const Eigen::MatrixXd& bias) {
  require(weight.cols() == in.channels * kTaps, "conv_down: weight/input channel mismatch");
  const int oh = in.height / 2;
  const int ow = in.width / 2;
  require(oh >= 1 && ow >= 1, "conv_down: input too small");
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(in.channels * kTaps, oh * ow);
  for (int c = 0; c < in.channels; ++c) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const Eigen::Index row = c * kTaps + ky * kKernel + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = 2 * oy - 1 + ky;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = 2 * ox - 1 + kx;
            if (ix < 0 || ix >= in.width) continue;
            cols(row, oy * ow + ox) = in.at(c, iy, ix);
          }
        }
      }
    }
  }
  const Eigen::MatrixXd y = weight * cols;  // out x (oh * ow)
  FeatureMap out(static_cast<int>(weight.rows()), oh, ow);
  for (int c = 0; c < out.channels; ++c) {
    for (int i = 0; i < oh * ow; ++i) out.data[static_cast<std::size_t>(c) * oh * ow + i] = y(c, i) + bias(c, 0);
  }
  return out;
}

FeatureMap conv_up(const FeatureMap& in, const Eigen::MatrixXd& weight, const Eigen::MatrixXd& bias) {
  require(weight.cols() == in.channels * kTaps, "conv_up: weight/input channel mismatch");
  const auto out_channels = static_cast<int>(weight.rows());
  // Rows (co, tap), columns ci.
  Eigen::MatrixXd wt(out_channels * kTaps, in.channels);
  for (int co = 0; co < out_channels; ++co) {
    for (int ci = 0; ci < in.channels; ++ci) {
      for (int k = 0; k < kTaps; ++k) wt(co * kTaps + k, ci) = weight(co, ci * kTaps + k);
    }
  }
  const int plane = in.height * in.width;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      in.data.data(), in.channels, plane);
  const Eigen::MatrixXd contrib = wt * x;  // (co, tap) x (y, x)
  FeatureMap out(out_channels, 2 * in.height, 2 * in.width);
  for (int co = 0; co < out_channels; ++co) {
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const Eigen::Index row = co * kTaps + ky * kKernel + kx;
        for (int y = 0; y < in.height; ++y) {
          const int oy = 2 * y - 1 + ky;
          if (oy < 0 || oy >= out.height) continue;
          for (int xi = 0; xi < in.width; ++xi) {
            const int ox = 2 * xi - 1 + kx;
            if (ox < 0 || ox >= out.width) continue;
            out.at(co, oy, ox) += contrib(row, y * in.width + xi);
          }
        }
      }
    }
    const std::size_t n = static_cast<std::size_t>(out.height) * out.width;
    for (std::size_t i = 0; i < n; ++i) out.data[co * n + i] += bias(co, 0);
  }
  return out;
}

Mask mask_decoder_forward(const MagnitudeSpectrogram& x, const Eigen::VectorXd& embedding,
                          const NetParams& params) {
  if (x.rows() != 256 || x.cols() != 256) {
    fail("mask decoder expects a 256x256 spectrogram, got " + std::to_string(x.rows()) + "x" +
         std::to_string(x.cols()));
  }
  require(embedding.size() == kEmbeddingDim, "mask decoder embedding must be 512-dimensional");
  const std::size_t stages = params.config().encoder_channels.size();

  std::vector<FeatureMap> skips;
  FeatureMap f = from_matrix(x);
  for (std::size_t k = 0; k < stages; ++k) {
    const std::string p = "enc" + std::to_string(k);
    f = conv_down(f, params.get(p + ".w"), params.get(p + ".b"));
    leaky_inplace(f);
    skips.push_back(f);
  }
  FeatureMap tiled(kEmbeddingDim, f.height, f.width);
  for (int c = 0; c < kEmbeddingDim; ++c) {
    for (int y = 0; y < f.height; ++y) {
      for (int xx = 0; xx < f.width; ++xx) tiled.at(c, y, xx) = embedding(c);
    }
  }
  f = concat(f, tiled);
  for (std::size_t k = 0; k < stages; ++k) {
    const std::string p = "dec" + std::to_string(k);
    f = conv_up(f, params.get(p + ".w"), params.get(p + ".b"));
    if (k + 1 == stages) break;
    leaky_inplace(f);
    f = concat(f, skips[stages - 2 - k]);
  }
  Mask mask(256, 256);
  for (int y = 0; y < 256; ++y) {
    for (int xx = 0; xx < 256; ++xx) mask(y, xx) = sigmoid(f.at(0, y, xx));
  }
  return mask;
}

Eigen::RowVectorXd audio_classifier_forward(const MagnitudeSpectrogram& separated,
                                            const NetParams& params) {
  if (separated.rows() != 256 || separated.cols() != 256) fail("audio classifier expects 256x256 input");
  const FeatureMap f = conv_stack(from_matrix(separated), params, "cls.conv",
                                  params.config().classifier_channels.size());
  const Eigen::VectorXd logits =
      params.get("cls.out.w") * global_average(f) + params.get("cls.out.b").col(0);
  return softmax(logits);
}

Eigen::RowVectorXd direction_classifier_forward(const MagnitudeSpectrogram& slice,
                                                const Eigen::VectorXd& embedding,
                                                const NetParams& params, int classes) {
  if (classes != 10 && classes != 28) fail("direction classes must be 10 or 28");
  const std::size_t stages = params.config().classifier_channels.size();
  const int min_width = 1 << stages;
  require(slice.rows() == 256, "direction slice must have 256 frequency rows");
  require(slice.cols() >= min_width, "direction slice narrower than " + std::to_string(min_width) + " frames");
  require(embedding.size() == kEmbeddingDim, "direction classifier embedding must be 512-dimensional");
  const FeatureMap f = conv_stack(from_matrix(slice), params, "dir.conv", stages);
  const Eigen::VectorXd pooled = global_average(f);
  Eigen::VectorXd joint(pooled.size() + embedding.size());
  joint << pooled, embedding;
  Eigen::VectorXd hidden = params.get("dir.hidden.w") * joint + params.get("dir.hidden.b").col(0);
  leaky_inplace(hidden);
  const std::string p = "dir" + std::to_string(classes) + ".out";
  return softmax(params.get(p + ".w") * hidden + params.get(p + ".b").col(0));
}

std::vector<std::pair<int, int>> window_slices(int frames, int windows) {
  require(windows >= 1, "need at least one window");
  const int width = frames / windows;
  require(width >= 1, "fewer frames than windows");
  std::vector<std::pair<int, int>> out;
  for (int w = 0; w < windows; ++w) {
    const int start = w * width;
    const int len = w + 1 == windows ? frames - start : width;
    out.emplace_back(start, len);
  }
  return out;
}

NetworkOutput run_network(const SceneGraph& graph, const MagnitudeSpectrogram& mixture,
                          const NetParams& params, int windows, int classes) {
  NetworkOutput out;
  const NodeFeatures x = node_features(graph);
  const NodeFeatures attended = gat_forward(x, graph.adjacency, params);
  const NodeFeatures edges = edgeconv_forward(attended, graph.adjacency, params);
  out.zeta = pool(edges);
  out.embeddings = gru_rollout(out.zeta, static_cast<int>(graph.auditory_index.size()), params);

  const auto slices = window_slices(static_cast<int>(mixture.cols()), windows);
  const auto sources = static_cast<Eigen::Index>(out.embeddings.size());
  out.audio_probs.resize(sources, params.config().audio_classes);
  out.direction_probs.assign(slices.size(), ProbTable(sources, classes));
  for (Eigen::Index i = 0; i < sources; ++i) {
    const auto& y = out.embeddings[static_cast<std::size_t>(i)];
    out.masks.push_back(mask_decoder_forward(mixture, y, params));
    const MagnitudeSpectrogram separated = apply_mask(out.masks.back(), mixture);
    out.audio_probs.row(i) = audio_classifier_forward(separated, params);
    for (std::size_t w = 0; w < slices.size(); ++w) {
      const auto [start, len] = slices[w];
      out.direction_probs[w].row(i) =
          direction_classifier_forward(separated.middleCols(start, len), y, params, classes);
    }
  }
  return out;
}

}  // namespace asmp::nn
