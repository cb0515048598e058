#pragma once

// Deterministic synthetic scenes: rectangles over a far background plane,
// analytic flow, exact detections, tonal audio and closed-form labels.

#include "asmp/tensorio.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace asmp {

struct SynthObject {
  int id = 0;
  int label = 0;
  int width = 8;
  int height = 8;
  double x = 0.0;  // top-left, pixels
  double y = 0.0;
  double depth = 5.0;
  /// Per-window (dx, dy) pixels/frame and dz depth units/frame; the last
  /// entry repeats for later windows.
  std::vector<Vec3> velocity = {Vec3::Zero()};
  double tone_hz = 0.0;  // 0: silent
  double amplitude = 0.5;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  std::string video_id = "synth";
  int width = 64;
  int height = 48;
  int frames = 48;
  double fps = 8.0;
  int window_frames = SceneBundle::kDefaultWindowFrames;
  double background_depth = 10.0;
  std::vector<int> auditory_catalog = {1, 2};
  int sample_rate = AudioClip::kDefaultRate;
  std::size_t clip_samples = 66302;
  double background_noise = 0.0;
  double chirp_hz_per_s = 20.0;
  double fade_seconds = 0.02;
  int tracks_per_window = 24;
  double tau = 0.02;
  std::vector<SynthObject> objects;

  static SynthSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SynthAudio {
  std::vector<AudioSource> sources;
  AudioClip mixture;
};

/// Top-left position of an object at a frame.
Vec3 object_state(const SynthObject& o, int frame, int window_frames, int windows);

SceneBundle gen_scene(const SynthSpec& spec);
SynthAudio gen_audio(const SynthSpec& spec);

}  // namespace asmp
