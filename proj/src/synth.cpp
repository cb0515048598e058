#include "asmp/synth.hpp"

#include "asmp/error.hpp"
#include "asmp/motion.hpp"
#include "asmp/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace asmp {

using nlohmann::json;

namespace {

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) fail("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const Vec3& window_velocity(const SynthObject& o, int window) {
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(window), o.velocity.size() - 1);
  return o.velocity[idx];
}

Box rendered_box(const SynthObject& o, const Vec3& state) {
  const int x0 = static_cast<int>(std::lround(state.x()));
  const int y0 = static_cast<int>(std::lround(state.y()));
  return {x0, y0, x0 + o.width, y0 + o.height};
}

std::vector<float> seeded_feature(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> f(512);
  for (auto& v : f) v = static_cast<float>(rng.normal() / std::sqrt(512.0));
  return f;
}

bool is_auditory(const SynthSpec& spec, const SynthObject& o) {
  return std::find(spec.auditory_catalog.begin(), spec.auditory_catalog.end(), o.label) !=
         spec.auditory_catalog.end();
}

void validate(const SynthSpec& spec) {
  require(spec.width > 1 && spec.height > 1, "image must be at least 2x2");
  require(spec.frames > 0 && spec.window_frames > 0, "frames and window_frames must be positive");
  require(spec.frames / spec.window_frames >= 1, "fewer frames than one window");
  require(spec.fps > 0.0 && spec.sample_rate > 0, "fps and sample_rate must be positive");
  require(spec.background_depth > 0.0, "background depth must be positive");
  std::set<int> ids;
  for (const auto& o : spec.objects) {
    require(ids.insert(o.id).second, "duplicate object id " + std::to_string(o.id));
    require(o.id >= 0, "object ids must be non-negative");
    require(o.width > 0 && o.height > 0, "object " + std::to_string(o.id) + " has empty size");
    require(!o.velocity.empty(), "object " + std::to_string(o.id) + " has no velocity");
    if (o.tone_hz * 1.0 >= spec.sample_rate / 2.0 ||
        o.tone_hz + spec.chirp_hz_per_s * spec.window_frames / spec.fps >= spec.sample_rate / 2.0) {
      fail("object " + std::to_string(o.id) + " tone at or above Nyquist (" +
           std::to_string(spec.sample_rate / 2.0) + " Hz)");
    }
    require(o.tone_hz >= 0.0, "tone frequency must be non-negative");
  }
}

}  // namespace

SynthSpec SynthSpec::from_json(const json& j) {
  SynthSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    s.video_id = j.value("video_id", s.video_id);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.frames = j.value("frames", s.frames);
    s.fps = j.value("fps", s.fps);
    s.window_frames = j.value("window_frames", s.window_frames);
    s.background_depth = j.value("background_depth", s.background_depth);
    s.auditory_catalog = j.value("auditory_catalog", s.auditory_catalog);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
    s.clip_samples = j.value("clip_samples", s.clip_samples);
    s.background_noise = j.value("background_noise", s.background_noise);
    s.chirp_hz_per_s = j.value("chirp_hz_per_s", s.chirp_hz_per_s);
    s.fade_seconds = j.value("fade_seconds", s.fade_seconds);
    s.tracks_per_window = j.value("tracks_per_window", s.tracks_per_window);
    s.tau = j.value("tau", s.tau);
    for (const auto& jo : j.at("objects")) {
      SynthObject o;
      o.id = jo.at("id").get<int>();
      o.label = jo.at("class").get<int>();
      const auto size = jo.at("size");
      o.width = size.at(0).get<int>();
      o.height = size.at(1).get<int>();
      const auto pos = jo.at("position");
      o.x = pos.at(0).get<double>();
      o.y = pos.at(1).get<double>();
      o.depth = jo.value("depth", o.depth);
      if (jo.contains("velocities")) {
        o.velocity.clear();
        for (const auto& v : jo.at("velocities")) o.velocity.push_back(vec3_from_json(v));
      } else if (jo.contains("velocity")) {
        o.velocity = {vec3_from_json(jo.at("velocity"))};
      }
      o.tone_hz = jo.value("tone_hz", o.tone_hz);
      o.amplitude = jo.value("amplitude", o.amplitude);
      s.objects.push_back(std::move(o));
    }
  } catch (const json::exception& e) {
    fail(std::string("invalid synth spec: ") + e.what());
  }
  return s;
}

json SynthSpec::to_json() const {
  json objs = json::array();
  for (const auto& o : objects) {
    json vel = json::array();
    for (const auto& v : o.velocity) vel.push_back({v.x(), v.y(), v.z()});
    objs.push_back({{"id", o.id},
                    {"class", o.label},
                    {"size", {o.width, o.height}},
                    {"position", {o.x, o.y}},
                    {"depth", o.depth},
                    {"velocities", vel},
                    {"tone_hz", o.tone_hz},
                    {"amplitude", o.amplitude}});
  }
  return {{"seed", seed},
          {"video_id", video_id},
          {"width", width},
          {"height", height},
          {"frames", frames},
          {"fps", fps},
          {"window_frames", window_frames},
          {"background_depth", background_depth},
          {"auditory_catalog", auditory_catalog},
          {"sample_rate", sample_rate},
          {"clip_samples", clip_samples},
          {"background_noise", background_noise},
          {"chirp_hz_per_s", chirp_hz_per_s},
          {"fade_seconds", fade_seconds},
          {"tracks_per_window", tracks_per_window},
          {"tau", tau},
          {"objects", objs}};
}

Vec3 object_state(const SynthObject& o, int frame, int window_frames, int windows) {
  Vec3 s(o.x, o.y, o.depth);
  for (int g = 0; g < frame; ++g) {
    s += window_velocity(o, std::min(g / window_frames, windows - 1));
  }
  return s;
}

SceneBundle gen_scene(const SynthSpec& spec) {
  validate(spec);
  SceneBundle b;
  b.video_id = spec.video_id;
  b.frames = spec.frames;
  b.fps = spec.fps;
  b.window_frames = spec.window_frames;
  b.width = spec.width;
  b.height = spec.height;
  b.auditory_catalog = spec.auditory_catalog;
  const int windows = b.windows();
  const auto w = static_cast<std::uint32_t>(spec.width);
  const auto h = static_cast<std::uint32_t>(spec.height);

  // Per frame: object states, rendered boxes, and a per-pixel owner map
  // (index into spec.objects, -1 for background).
  std::vector<std::vector<int>> owner(static_cast<std::size_t>(spec.frames));
  std::vector<std::vector<Vec3>> states(static_cast<std::size_t>(spec.frames));
  for (int f = 0; f < spec.frames; ++f) {
    auto& st = states[static_cast<std::size_t>(f)];
    auto& own = owner[static_cast<std::size_t>(f)];
    own.assign(static_cast<std::size_t>(w) * h, -1);
    std::vector<float> depth(static_cast<std::size_t>(w) * h, static_cast<float>(spec.background_depth));
    for (const auto& o : spec.objects) st.push_back(object_state(o, f, spec.window_frames, windows));

    std::vector<std::size_t> order(spec.objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Far to near, so nearer objects overwrite.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return st[a].z() > st[c].z(); });
    for (std::size_t i : order) {
      const auto& o = spec.objects[i];
      const Box box = rendered_box(o, st[i]);
      if (box.x0 < 0 || box.y0 < 0 || box.x1 > spec.width || box.y1 > spec.height) {
        fail("object " + std::to_string(o.id) + " leaves the frame at frame " + std::to_string(f));
      }
      if (!(st[i].z() > 0.0 && st[i].z() < spec.background_depth)) {
        fail("object " + std::to_string(o.id) + " depth leaves (0, background) at frame " +
             std::to_string(f));
      }
      for (int r = box.y0; r < box.y1; ++r) {
        for (int c = box.x0; c < box.x1; ++c) {
          const std::size_t px = static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c);
          depth[px] = static_cast<float>(st[i].z());
          own[px] = static_cast<int>(i);
        }
      }
    }
    b.depth.emplace_back(std::vector<std::uint32_t>{h, w}, std::move(depth));
  }

  Rng track_rng(derive_seed(spec.seed, 0x7472));
  for (int win = 0; win < windows; ++win) {
    const int fr = b.reference_frame(win);
    const int ft = b.target_frame(win);
    const auto& own = owner[static_cast<std::size_t>(fr)];
    std::vector<float> flow(static_cast<std::size_t>(w) * h * 2, 0.0f);
    for (std::size_t px = 0; px < own.size(); ++px) {
      if (own[px] < 0) continue;
      const auto i = static_cast<std::size_t>(own[px]);
      const Vec3 shift = states[static_cast<std::size_t>(ft)][i] - states[static_cast<std::size_t>(fr)][i];
      flow[2 * px] = static_cast<float>(shift.x());
      flow[2 * px + 1] = static_cast<float>(shift.y());
    }
    b.flow.emplace_back(std::vector<std::uint32_t>{h, w, 2}, std::move(flow));

    // Static background pixels visible in both frames, as tracked 3D points.
    const auto& own_t = owner[static_cast<std::size_t>(ft)];
    const auto& dref = b.depth[static_cast<std::size_t>(fr)];
    const auto& dtgt = b.depth[static_cast<std::size_t>(ft)];
    const double ref_max = *std::max_element(dref.data.begin(), dref.data.end());
    const double tgt_max = *std::max_element(dtgt.data.begin(), dtgt.data.end());
    std::vector<float> tracks;
    int found = 0;
    for (int attempt = 0; attempt < 64 * spec.tracks_per_window && found < spec.tracks_per_window; ++attempt) {
      const auto r = static_cast<std::uint32_t>(track_rng.below(h));
      const auto c = static_cast<std::uint32_t>(track_rng.below(w));
      const std::size_t px = static_cast<std::size_t>(r) * w + c;
      if (own[px] >= 0 || own_t[px] >= 0) continue;
      const float x = static_cast<float>(static_cast<double>(c) / (w - 1));
      const float y = static_cast<float>(static_cast<double>(r) / (h - 1));
      tracks.insert(tracks.end(), {x, y, static_cast<float>(dref.at(r, c) / ref_max), x, y,
                                   static_cast<float>(dtgt.at(r, c) / tgt_max)});
      ++found;
    }
    if (found > 0) {
      b.tracks.emplace_back(std::vector<std::uint32_t>{static_cast<std::uint32_t>(found), 6}, std::move(tracks));
    }

    WindowDetections wd;
    wd.window = win;
    wd.frame = fr;
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto& o = spec.objects[i];
      Detection d;
      d.id = o.id;
      d.label = o.label;
      d.box = rendered_box(o, states[static_cast<std::size_t>(fr)][i]);
      d.score = 0.99;
      d.feature = seeded_feature(derive_seed(spec.seed, 0x1000 + static_cast<std::uint64_t>(o.id)));
      wd.detections.push_back(std::move(d));
    }
    b.detections.push_back(std::move(wd));

    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      const auto& o = spec.objects[i];
      if (!is_auditory(spec, o)) continue;
      const Vec3 shift = states[static_cast<std::size_t>(ft)][i] - states[static_cast<std::size_t>(fr)][i];
      const Vec3 d(shift.x() / (spec.width - 1), shift.y() / (spec.height - 1),
                   shift.z() / spec.background_depth);
      b.truth.push_back(make_label(o.id, win, d, spec.tau, false));
    }
    b.truth.push_back(make_label(DisplacementLabel::kBackgroundNode, win, Vec3::Zero(), spec.tau, true));
  }
  // Windows with no visible background get no tracks; keep tracks all-or-nothing.
  if (static_cast<int>(b.tracks.size()) != windows) b.tracks.clear();

  b.background_feature = seeded_feature(derive_seed(spec.seed, 0xB6));

  const bool any_tone = std::any_of(spec.objects.begin(), spec.objects.end(), [&](const SynthObject& o) {
    return is_auditory(spec, o) && o.tone_hz > 0.0;
  });
  if (any_tone) {
    SynthAudio audio = gen_audio(spec);
    b.has_audio = true;
    b.mixture = std::move(audio.mixture);
    b.sources = std::move(audio.sources);
  }
  return b;
}

SynthAudio gen_audio(const SynthSpec& spec) {
  validate(spec);
  const int windows = std::max(1, spec.frames / spec.window_frames);
  const double window_seconds = spec.window_frames / spec.fps;
  const double rate = spec.sample_rate;
  const std::size_t n = spec.clip_samples;
  const auto fade = static_cast<std::size_t>(spec.fade_seconds * rate);

  SynthAudio out;
  out.mixture.rate = spec.sample_rate;
  out.mixture.samples.assign(n, 0.0);
  for (const auto& o : spec.objects) {
    if (!is_auditory(spec, o) || o.tone_hz <= 0.0) continue;
    AudioClip clip;
    clip.rate = spec.sample_rate;
    clip.samples.resize(n);
    double phase = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double sec = static_cast<double>(t) / rate;
      const int win = std::min(static_cast<int>(sec / window_seconds), windows - 1);
      const double dz = window_velocity(o, win).z();
      // Approaching (dz < 0) rises in pitch within the window, receding falls.
      const double direction = dz < 0.0 ? 1.0 : (dz > 0.0 ? -1.0 : 0.0);
      const double freq = o.tone_hz + direction * spec.chirp_hz_per_s * (sec - win * window_seconds);
      double gain = o.amplitude;
      if (fade > 0) {
        const std::size_t edge = std::min(t, n - 1 - t);
        if (edge < fade) gain *= 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(edge) / fade);
      }
      clip.samples[t] = gain * std::sin(phase);
      phase += 2.0 * std::numbers::pi * freq / rate;
    }
    for (std::size_t t = 0; t < n; ++t) out.mixture.samples[t] += clip.samples[t];
    out.sources.push_back({o.id, std::move(clip)});
  }
  if (out.sources.empty()) fail("synth audio needs at least one auditory object with a tone");
  if (spec.background_noise > 0.0) {
    Rng rng(derive_seed(spec.seed, 0xA0D1));
    for (double& s : out.mixture.samples) s += spec.background_noise * rng.normal();
  }
  return out;
}

}  // namespace asmp
