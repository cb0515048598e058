#pragma once

#include "asmp/types.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace asmp {

/// Dense float32 array persisted in the A3MP binary format:
///   8-byte magic "A3MP\0\0\0\1", u32 rank, rank x u32 dims,
///   then product(dims) float32 values, row-major, little-endian.
struct ArrayFile {
  static constexpr std::size_t kMaxRank = 4;
  static constexpr std::array<char, 8> kMagic = {'A', '3', 'M', 'P',
                                                 '\0', '\0', '\0', '\1'};

  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  ArrayFile() = default;
  ArrayFile(std::vector<std::uint32_t> dims, std::vector<float> values);

  std::size_t size() const;
  std::size_t rank() const { return shape.size(); }

  /// Row-major element access for rank-2 and rank-3 arrays.
  float at(std::size_t r, std::size_t c) const {
    return data[r * shape[1] + c];
  }
  float at(std::size_t r, std::size_t c, std::size_t k) const {
    return data[(r * shape[1] + c) * shape[2] + k];
  }

  friend bool operator==(const ArrayFile&, const ArrayFile&) = default;
};

std::vector<std::uint8_t> encode_array(const ArrayFile& array);
ArrayFile decode_array(const std::vector<std::uint8_t>& bytes,
                       const std::string& origin = "<memory>");

ArrayFile read_array(const std::filesystem::path& path);
void write_array(const ArrayFile& array, const std::filesystem::path& path);

ArrayFile matrix_to_array(const Eigen::MatrixXd& m);
Eigen::MatrixXd array_to_matrix(const ArrayFile& a);

struct AudioClip {
  static constexpr int kDefaultRate = 11025;

  std::vector<double> samples;
  int rate = kDefaultRate;
};

/// 16-bit PCM mono only. Samples are value / 32768.
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

struct WindowDetections {
  int window = 0;
  int frame = 0;
  std::vector<Detection> detections;
};

struct AudioSource {
  int object = 0;
  AudioClip clip;
};

/// One video on disk, fully loaded and validated. See docs/bundle-format.md.
struct SceneBundle {
  static constexpr int kDefaultWindowFrames = 8;

  std::filesystem::path root;
  std::string video_id;
  int frames = 0;
  double fps = 0.0;
  int window_frames = kDefaultWindowFrames;
  int width = 0;
  int height = 0;
  std::vector<int> auditory_catalog;

  std::vector<ArrayFile> depth;   // per frame, [H, W]
  std::vector<ArrayFile> flow;    // per window, [H, W, 2]
  std::vector<ArrayFile> tracks;  // per window, [K, 6]; may be empty
  std::vector<WindowDetections> detections;  // per window
  std::vector<float> background_feature;

  bool has_audio = false;
  AudioClip mixture;
  std::vector<AudioSource> sources;

  std::vector<DisplacementLabel> truth;

  int windows() const { return frames / window_frames; }
  int reference_frame(int window) const { return window * window_frames; }
  int target_frame(int window) const {
    return window * window_frames + window_frames - 1;
  }
};

SceneBundle load_bundle(const std::filesystem::path& dir);
void write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir);

/// labels.json / displacement.json rows: {node, window, vector, class10, class28}.
nlohmann::json labels_to_json(const std::vector<DisplacementLabel>& labels);
std::vector<DisplacementLabel> labels_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

/// Writes bytes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace asmp
