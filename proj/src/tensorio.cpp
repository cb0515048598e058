#include "asmp/tensorio.hpp"

#include "asmp/error.hpp"

#include <algorithm>
#include <cstdio>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace asmp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_missing("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes_atomic(const fs::path& path, const void* data, std::size_t n) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) fail("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path resolve(const fs::path& root, const std::string& rel) {
  return root / fs::path(rel);
}

ArrayFile load_ref(const fs::path& root, const json& ref, const std::string& field) {
  if (!ref.is_string()) fail("manifest field '" + field + "' must be a path string");
  const fs::path path = resolve(root, ref.get<std::string>());
  if (!fs::exists(path)) fail_missing("missing file " + path.string());
  return read_array(path);
}

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) fail("box must be [x0, y0, x1, y1]");
  Box b{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (b.width() <= 0 || b.height() <= 0) fail("box has non-positive area");
  return b;
}

}  // namespace

ArrayFile::ArrayFile(std::vector<std::uint32_t> dims, std::vector<float> values)
    : shape(std::move(dims)), data(std::move(values)) {
  if (shape.empty() || shape.size() > kMaxRank) fail("array rank must be in [1, 4]");
  if (data.size() != size()) fail("array payload does not match shape");
}

std::size_t ArrayFile::size() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_array(const ArrayFile& array) {
  require(!array.shape.empty() && array.rank() <= ArrayFile::kMaxRank,
          "array rank must be in [1, 4]");
  require(array.data.size() == array.size(), "array payload does not match shape");
  std::vector<std::uint8_t> out(ArrayFile::kMagic.begin(), ArrayFile::kMagic.end());
  out.reserve(8 + 4 * (1 + array.rank() + array.data.size()));
  put_u32(out, static_cast<std::uint32_t>(array.rank()));
  for (auto d : array.shape) put_u32(out, d);
  for (float v : array.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

ArrayFile decode_array(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < 12 ||
      !std::equal(ArrayFile::kMagic.begin(), ArrayFile::kMagic.end(), bytes.begin())) {
    fail("bad magic in " + origin);
  }
  const std::uint32_t rank = get_u32(bytes.data() + 8);
  if (rank == 0 || rank > ArrayFile::kMaxRank) {
    fail("rank " + std::to_string(rank) + " out of range in " + origin);
  }
  const std::size_t header = 12 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) fail("truncated header in " + origin);
  ArrayFile a;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    a.shape.push_back(get_u32(bytes.data() + 12 + 4 * i));
    count *= a.shape.back();
  }
  if (bytes.size() - header < count * 4) fail("truncated payload in " + origin);
  if (bytes.size() - header > count * 4) fail("trailing bytes in " + origin);
  a.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    a.data[i] = std::bit_cast<float>(get_u32(bytes.data() + header + 4 * i));
  }
  return a;
}

ArrayFile read_array(const fs::path& path) {
  return decode_array(slurp(path), path.string());
}

void write_array(const ArrayFile& array, const fs::path& path) {
  const auto bytes = encode_array(array);
  write_bytes_atomic(path, bytes.data(), bytes.size());
}

ArrayFile matrix_to_array(const Eigen::MatrixXd& m) {
  ArrayFile a;
  a.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  a.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      a.data[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
    }
  }
  return a;
}

Eigen::MatrixXd array_to_matrix(const ArrayFile& a) {
  require(a.rank() == 2, "expected a rank-2 array");
  Eigen::MatrixXd m(a.shape[0], a.shape[1]);
  for (std::uint32_t r = 0; r < a.shape[0]; ++r) {
    for (std::uint32_t c = 0; c < a.shape[1]; ++c) m(r, c) = a.at(r, c);
  }
  return m;
}

// --- WAV -------------------------------------------------------------------

AudioClip read_wav(const fs::path& path) {
  const auto bytes = slurp(path);
  const std::string origin = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file: " + origin);
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  AudioClip clip;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = get_u32(bytes.data() + pos + 4);
    const std::uint8_t* body = bytes.data() + pos + 8;
    if (pos + 8 + size > bytes.size()) fail("truncated chunk in " + origin);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) fail("short fmt chunk in " + origin);
      const auto format = get_u16(body);
      const auto channels = get_u16(body + 2);
      const auto bits = get_u16(body + 14);
      if (format != 1) fail("unsupported WAV encoding (PCM only): " + origin);
      if (channels != 1) fail("non-mono WAV (" + std::to_string(channels) + " channels): " + origin);
      if (bits != 16) fail("unsupported bit depth " + std::to_string(bits) + ": " + origin);
      clip.rate = static_cast<int>(get_u32(body + 4));
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) fail("data chunk before fmt chunk in " + origin);
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(get_u16(body + 2 * i));
        clip.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return clip;
    }
    pos += 8 + size + (size & 1u);
  }
  fail("no data chunk in " + origin);
}

void write_wav(const AudioClip& clip, const fs::path& path) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.rate));
  put_u32(out, static_cast<std::uint32_t>(clip.rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    if (!std::isfinite(s)) fail("non-finite sample in " + path.string());
    const double q = std::clamp(std::nearbyint(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  write_bytes_atomic(path, out.data(), out.size());
}

// --- JSON helpers ------------------------------------------------------------

json read_json(const fs::path& path) {
  if (!fs::exists(path)) fail_missing("missing file " + path.string());
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  write_file_atomic(path, j.dump(2) + "\n");
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  write_bytes_atomic(path, contents.data(), contents.size());
}

json labels_to_json(const std::vector<DisplacementLabel>& labels) {
  json rows = json::array();
  for (const auto& l : labels) {
    rows.push_back({{"node", l.node},
                    {"window", l.window},
                    {"vector", {l.vector.x(), l.vector.y(), l.vector.z()}},
                    {"class10", l.class10},
                    {"class28", l.class28}});
  }
  return rows;
}

std::vector<DisplacementLabel> labels_from_json(const json& j) {
  if (!j.is_array()) fail("labels must be a JSON array");
  std::vector<DisplacementLabel> out;
  for (const auto& row : j) {
    DisplacementLabel l;
    l.node = row.at("node").get<int>();
    l.window = row.at("window").get<int>();
    const auto& v = row.at("vector");
    l.vector = Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    l.class10 = row.at("class10").get<int>();
    l.class28 = row.at("class28").get<int>();
    out.push_back(l);
  }
  return out;
}

// --- Bundle ------------------------------------------------------------------

SceneBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const json m = read_json(manifest_path);
  SceneBundle b;
  b.root = dir;
  try {
    b.video_id = m.at("video_id").get<std::string>();
    b.frames = m.at("frames").get<int>();
    b.fps = m.at("fps").get<double>();
    b.window_frames = m.value("window_frames", SceneBundle::kDefaultWindowFrames);
    b.width = m.at("width").get<int>();
    b.height = m.at("height").get<int>();
    b.auditory_catalog = m.at("auditory_catalog").get<std::vector<int>>();
  } catch (const json::exception& e) {
    fail("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  require(b.frames > 0 && b.window_frames > 0, "frames and window_frames must be positive");
  require(b.width > 1 && b.height > 1, "image must be at least 2x2");

  const json& depth = m.at("depth");
  if (!depth.is_array() || static_cast<int>(depth.size()) != b.frames) {
    fail("manifest lists " + std::to_string(depth.size()) + " depth frames, expected " +
         std::to_string(b.frames));
  }
  for (const auto& ref : depth) {
    b.depth.push_back(load_ref(dir, ref, "depth"));
    const auto& a = b.depth.back();
    if (a.rank() != 2 || a.shape[0] != static_cast<std::uint32_t>(b.height) ||
        a.shape[1] != static_cast<std::uint32_t>(b.width)) {
      fail("depth frame " + ref.get<std::string>() + " has wrong shape");
    }
  }

  const json& flow = m.at("flow");
  if (!flow.is_array() || static_cast<int>(flow.size()) != b.windows()) {
    fail("window-count mismatch: manifest lists " + std::to_string(flow.size()) +
         " flow fields, floor(frames / window_frames) = " + std::to_string(b.windows()));
  }
  for (const auto& ref : flow) {
    b.flow.push_back(load_ref(dir, ref, "flow"));
    const auto& a = b.flow.back();
    if (a.rank() != 3 || a.shape[0] != static_cast<std::uint32_t>(b.height) ||
        a.shape[1] != static_cast<std::uint32_t>(b.width) || a.shape[2] != 2) {
      fail("flow field " + ref.get<std::string>() + " has wrong shape");
    }
  }

  if (m.contains("tracks")) {
    const json& tracks = m.at("tracks");
    if (!tracks.is_array() || static_cast<int>(tracks.size()) != b.windows()) {
      fail("window-count mismatch in tracks");
    }
    for (const auto& ref : tracks) {
      b.tracks.push_back(load_ref(dir, ref, "tracks"));
      const auto& a = b.tracks.back();
      if (a.rank() != 2 || a.shape[1] != 6) fail("tracks must be [K, 6]");
    }
  }

  b.background_feature = load_ref(dir, m.at("background_feature"), "background_feature").data;

  const fs::path det_path = resolve(dir, m.at("detections").get<std::string>());
  const json dets = read_json(det_path);
  if (!dets.is_array() || static_cast<int>(dets.size()) != b.windows()) {
    fail("window-count mismatch in " + det_path.string());
  }
  for (const auto& w : dets) {
    WindowDetections wd;
    wd.window = w.at("window").get<int>();
    wd.frame = w.at("frame").get<int>();
    for (const auto& d : w.at("detections")) {
      Detection det;
      det.id = d.at("id").get<int>();
      det.label = d.at("label").get<int>();
      det.box = box_from_json(d.at("box"));
      det.score = d.at("score").get<double>();
      if (det.box.x0 < 0 || det.box.y0 < 0 || det.box.x1 > b.width || det.box.y1 > b.height) {
        fail("detection " + std::to_string(det.id) + " box outside image in " + det_path.string());
      }
      det.feature = load_ref(dir, d.at("feature"), "feature").data;
      for (float f : det.feature) {
        if (!std::isfinite(f)) fail("non-finite feature for detection " + std::to_string(det.id));
      }
      wd.detections.push_back(std::move(det));
    }
    b.detections.push_back(std::move(wd));
  }

  if (m.contains("audio")) {
    const json& audio = m.at("audio");
    const fs::path mix_path = resolve(dir, audio.at("mixture").get<std::string>());
    if (!fs::exists(mix_path)) fail_missing("missing audio file " + mix_path.string());
    b.mixture = read_wav(mix_path);
    for (const auto& s : audio.value("sources", json::array())) {
      const fs::path p = resolve(dir, s.at("path").get<std::string>());
      if (!fs::exists(p)) fail_missing("missing audio file " + p.string());
      b.sources.push_back({s.at("object").get<int>(), read_wav(p)});
    }
    b.has_audio = true;
  }

  if (m.contains("displacement")) {
    b.truth = labels_from_json(read_json(resolve(dir, m.at("displacement").get<std::string>())));
  }
  return b;
}

void write_bundle(const SceneBundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  auto numbered = [](const char* stem, int i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.a3mp", stem, i);
    return std::string(buf);
  };
  json m;
  m["format"] = "asmp-bundle/1";
  m["video_id"] = b.video_id;
  m["frames"] = b.frames;
  m["fps"] = b.fps;
  m["window_frames"] = b.window_frames;
  m["width"] = b.width;
  m["height"] = b.height;
  m["auditory_catalog"] = b.auditory_catalog;

  json depth = json::array();
  for (std::size_t f = 0; f < b.depth.size(); ++f) {
    const std::string rel = "depth/" + numbered("frame", static_cast<int>(f));
    write_array(b.depth[f], dir / rel);
    depth.push_back(rel);
  }
  m["depth"] = depth;
  json flow = json::array();
  for (std::size_t w = 0; w < b.flow.size(); ++w) {
    const std::string rel = "flow/" + numbered("window", static_cast<int>(w));
    write_array(b.flow[w], dir / rel);
    flow.push_back(rel);
  }
  m["flow"] = flow;
  if (!b.tracks.empty()) {
    json tracks = json::array();
    for (std::size_t w = 0; w < b.tracks.size(); ++w) {
      const std::string rel = "tracks/" + numbered("window", static_cast<int>(w));
      write_array(b.tracks[w], dir / rel);
      tracks.push_back(rel);
    }
    m["tracks"] = tracks;
  }

  const std::string bg_rel = "features/background.a3mp";
  write_array(ArrayFile({static_cast<std::uint32_t>(b.background_feature.size())}, b.background_feature),
              dir / bg_rel);
  m["background_feature"] = bg_rel;

  json dets = json::array();
  for (const auto& wd : b.detections) {
    json list = json::array();
    for (const auto& d : wd.detections) {
      const std::string rel = "features/window_" + std::to_string(wd.window) + "_det_" +
                              std::to_string(d.id) + ".a3mp";
      write_array(ArrayFile({static_cast<std::uint32_t>(d.feature.size())}, d.feature), dir / rel);
      list.push_back({{"id", d.id},
                      {"label", d.label},
                      {"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}},
                      {"score", d.score},
                      {"feature", rel}});
    }
    dets.push_back({{"window", wd.window}, {"frame", wd.frame}, {"detections", list}});
  }
  write_json(dets, dir / "detections.json");
  m["detections"] = "detections.json";

  if (b.has_audio) {
    write_wav(b.mixture, dir / "audio/mixture.wav");
    json sources = json::array();
    for (const auto& s : b.sources) {
      const std::string rel = "audio/source_" + std::to_string(s.object) + ".wav";
      write_wav(s.clip, dir / rel);
      sources.push_back({{"object", s.object}, {"path", rel}});
    }
    m["audio"] = {{"mixture", "audio/mixture.wav"}, {"sources", sources}};
  }
  if (!b.truth.empty()) {
    write_json(labels_to_json(b.truth), dir / "displacement.json");
    m["displacement"] = "displacement.json";
  }
  write_json(m, dir / "manifest.json");
}

}  // namespace asmp
