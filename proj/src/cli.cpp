#include "asmp/cli.hpp"

#include "asmp/audio.hpp"
#include "asmp/error.hpp"
#include "asmp/geometry.hpp"
#include "asmp/metrics.hpp"
#include "asmp/motion.hpp"
#include "asmp/neural.hpp"
#include "asmp/random.hpp"
#include "asmp/scenegraph.hpp"
#include "asmp/synth.hpp"
#include "asmp/tensorio.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace asmp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string numbered(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d%s", stem, i, ext);
  return buf;
}

// Runs fn(0..n-1) on up to `threads` workers. The first error wins.
template <typename Fn>
void parallel_for(int n, int threads, Fn fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::exception_ptr first;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int i = 0;
      {
        std::lock_guard lock(mu);
        if (first || next >= n) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// Re-throws with a window prefix, keeping the error kind.
template <typename Fn>
auto in_window(int w, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "window " + std::to_string(w) + ": " + e.what());
  }
}

std::set<int> catalog_set(const SceneBundle& b) {
  return {b.auditory_catalog.begin(), b.auditory_catalog.end()};
}

GraphConfig graph_config(const RunConfig& c, int window) {
  GraphConfig g;
  g.gamma = c.gamma;
  g.percentile = c.sigma_percentile;
  g.seed = derive_seed(c.seed, static_cast<std::uint64_t>(window));
  return g;
}

SceneGraph window_graph(const SceneBundle& b, int w, const RunConfig& c) {
  return in_window(w, [&] {
    const auto& dets = b.detections.at(static_cast<std::size_t>(w)).detections;
    return build_graph(dets, catalog_set(b), b.depth.at(static_cast<std::size_t>(b.reference_frame(w))),
                       b.background_feature, graph_config(c, w));
  });
}

void check_window_frames(const SceneBundle& b, const RunConfig& c) {
  if (c.window_frames_set && c.window_frames != b.window_frames) {
    fail("--window-frames " + std::to_string(c.window_frames) + " does not match the bundle's " +
         std::to_string(b.window_frames));
  }
}

// Class of a node for the audio classifier: catalog position, background last.
int audio_class(const std::vector<int>& catalog, const GraphNode& node) {
  if (node.kind == NodeKind::kBackground) return static_cast<int>(catalog.size());
  const auto it = std::find(catalog.begin(), catalog.end(), node.detection.label);
  require(it != catalog.end(), "auditory node label not in catalog");
  return static_cast<int>(it - catalog.begin());
}

std::vector<int> node_ids(const SceneGraph& g) {
  std::vector<int> ids;
  for (int i : g.auditory_index) ids.push_back(g.nodes[static_cast<std::size_t>(i)].detection.id);
  ids.push_back(DisplacementLabel::kBackgroundNode);
  return ids;
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

Signal samples_of(const AudioClip& c) { return c.samples; }

fs::path rel_or_self(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

int label_class(const DisplacementLabel& l, int classes) {
  return classes == kCubeClasses ? l.class28 : l.class10;
}

std::map<std::pair<int, int>, DisplacementLabel> index_labels(
    const std::vector<DisplacementLabel>& labels) {
  std::map<std::pair<int, int>, DisplacementLabel> out;
  for (const auto& l : labels) out[{l.window, l.node}] = l;
  return out;
}

void check_classes(int classes) {
  if (classes != kOctantClasses && classes != kCubeClasses) {
    fail("--classes must be 10 or 28, got " + std::to_string(classes));
  }
}

}  // namespace

// --- synth -----------------------------------------------------------------

void cmd_synth(const fs::path& spec_path, const fs::path& outdir, const RunConfig& config) {
  SynthSpec spec = SynthSpec::from_json(read_json(spec_path));
  if (config.seed_set) spec.seed = config.seed;
  if (config.tau_set) spec.tau = config.tau;
  if (config.window_frames_set) spec.window_frames = config.window_frames;
  write_bundle(gen_scene(spec), outdir);
  write_json(spec.to_json(), outdir / "synth_spec.json");
}

// --- graph -----------------------------------------------------------------

void cmd_graph(const fs::path& bundle_dir, const fs::path& outdir, const RunConfig& config) {
  const SceneBundle b = load_bundle(bundle_dir);
  check_window_frames(b, config);
  const int windows = b.windows();
  static constexpr double kSweep[] = {25.0, 50.0, 75.0};

  std::vector<SceneGraph> graphs(static_cast<std::size_t>(windows));
  std::vector<std::vector<DisplacementLabel>> labels(static_cast<std::size_t>(windows));
  std::vector<json> sparsity_rows(static_cast<std::size_t>(windows));
  fs::create_directories(outdir);

  parallel_for(windows, config.threads, [&](int w) {
    const auto sw = static_cast<std::size_t>(w);
    graphs[sw] = window_graph(b, w, config);
    const SceneGraph& g = graphs[sw];
    labels[sw] = in_window(w, [&] { return label_window(b, w, g, config.tau); });

    json graph = graph_to_json(g);
    graph["window"] = w;
    graph["frame"] = b.reference_frame(w);
    graph["percentile"] = config.sigma_percentile;
    graph["adjacency"] = "adjacency/" + numbered("window", w, ".a3mp");
    graph["distances"] = "distances/" + numbered("window", w, ".a3mp");
    write_array(matrix_to_array(g.adjacency.weights), outdir / graph["adjacency"].get<std::string>());
    write_array(matrix_to_array(g.distances.values), outdir / graph["distances"].get<std::string>());

    json row = {{"window", w}, {"nodes", g.size()}};
    for (double p : kSweep) {
      row["sparsity_" + std::to_string(static_cast<int>(p))] = sparsity(rbf_adjacency(g.distances, p));
    }
    sparsity_rows[sw] = row;

    if (config.multiscale) {
      const auto [fine, coarse] = multiscale_adjacency(g.distances);
      const std::string fine_rel = "multiscale/" + numbered("window", w, "_fine.a3mp");
      const std::string coarse_rel = "multiscale/" + numbered("window", w, "_coarse.a3mp");
      write_array(matrix_to_array(fine.weights), outdir / fine_rel);
      write_array(matrix_to_array(coarse.weights), outdir / coarse_rel);
      graph["multiscale"] = {{"fine", fine_rel},
                             {"coarse", coarse_rel},
                             {"fine_sparsity", sparsity(fine)},
                             {"coarse_sparsity", sparsity(coarse)}};
    }
    write_json(graph, outdir / "graphs" / numbered("window", w, ".json"));
  });

  std::vector<DisplacementLabel> all;
  for (const auto& l : labels) all.insert(all.end(), l.begin(), l.end());
  write_json(labels_to_json(all), outdir / "labels.json");

  json mean = json::object();
  bool monotone = true;
  for (const auto& row : sparsity_rows) {
    monotone = monotone && row["sparsity_50"].get<double>() <= row["sparsity_25"].get<double>() &&
               row["sparsity_75"].get<double>() <= row["sparsity_50"].get<double>();
  }
  for (double p : kSweep) {
    const std::string key = "sparsity_" + std::to_string(static_cast<int>(p));
    double s = 0.0;
    for (const auto& row : sparsity_rows) s += row[key].get<double>();
    mean[key] = windows > 0 ? s / windows : 0.0;
  }
  write_json({{"video_id", b.video_id},
              {"windows", windows},
              {"eps", 1e-5},
              {"percentiles", {25, 50, 75}},
              {"per_window", sparsity_rows},
              {"mean", mean},
              {"non_increasing", monotone}},
             outdir / "sparsity.json");
  write_json({{"video_id", b.video_id},
              {"bundle", fs::absolute(bundle_dir).string()},
              {"windows", windows},
              {"labels", all.size()},
              {"seed", config.seed},
              {"gamma", config.gamma},
              {"percentile", config.sigma_percentile},
              {"tau", config.tau},
              {"multiscale", config.multiscale}},
             outdir / "report.json");
}

// --- separate --------------------------------------------------------------

void cmd_separate(const fs::path& dir_a, const fs::path& dir_b, const fs::path& outdir,
                  const RunConfig& config) {
  check_classes(config.classes);
  const SceneBundle bundles[2] = {load_bundle(dir_a), load_bundle(dir_b)};
  const fs::path dirs[2] = {dir_a, dir_b};
  for (int v = 0; v < 2; ++v) {
    if (!bundles[v].has_audio) fail_missing("bundle has no audio: " + dirs[v].string());
    check_window_frames(bundles[v], config);
  }
  const int rate = bundles[0].mixture.rate;
  require(bundles[1].mixture.rate == rate, "sample rates differ between the two videos");

  AudioClip refs[2] = {fit_length(bundles[0].mixture), fit_length(bundles[1].mixture)};
  const AudioClip mixture = mix(std::span<const AudioClip>(refs, 2));
  const ComplexSpectrogram mix_spec = stft(mixture);
  const MagnitudeSpectrogram mix_mag = magnitude(mix_spec);
  const MagnitudeSpectrogram mags[2] = {magnitude(stft(refs[0])), magnitude(stft(refs[1]))};

  fs::create_directories(outdir);
  write_wav(mixture, outdir / "mixture.wav");
  json videos = json::array();

  if (config.mode == SeparationMode::kOracle) {
    for (int v = 0; v < 2; ++v) {
      const Mask m = ibm(mags[v], mags[1 - v]);
      const AudioClip est = reconstruct(apply_mask(m, mix_mag), mix_spec, rate);
      const std::string tag = std::to_string(v);
      write_wav(refs[v], outdir / ("references/video_" + tag + ".wav"));
      write_wav(est, outdir / ("estimates/video_" + tag + ".wav"));
      write_array(matrix_to_array(m), outdir / ("masks/ibm_" + tag + ".a3mp"));
      videos.push_back({{"video_id", bundles[v].video_id},
                        {"bundle", fs::absolute(dirs[v]).string()},
                        {"reference", "references/video_" + tag + ".wav"},
                        {"estimate", "estimates/video_" + tag + ".wav"},
                        {"ibm", "masks/ibm_" + tag + ".a3mp"},
                        {"masks", {"masks/ibm_" + tag + ".a3mp"}}});
    }
  } else {
    require(bundles[0].auditory_catalog == bundles[1].auditory_catalog,
            "the two videos use different auditory catalogs");
    const auto& catalog = bundles[0].auditory_catalog;
    nn::NetConfig net_config;
    net_config.audio_classes = static_cast<int>(catalog.size()) + 1;
    const nn::NetParams params(config.seed, net_config);
    const MagnitudeSpectrogram pooled_mix = pool_frequency(mix_mag);

    for (int v = 0; v < 2; ++v) {
      const SceneBundle& b = bundles[v];
      const SceneGraph g = window_graph(b, 0, config);
      const nn::NetworkOutput out = nn::run_network(g, pooled_mix, params, b.windows(), config.classes);
      const std::string tag = std::to_string(v);

      const Mask video_ibm = ibm(pool_frequency(mags[v]), pool_frequency(mags[1 - v]));
      write_array(matrix_to_array(video_ibm), outdir / ("masks/ibm_" + tag + ".a3mp"));
      Mask total = Mask::Zero(video_ibm.rows(), video_ibm.cols());
      json mask_paths = json::array();
      for (std::size_t i = 0; i < out.masks.size(); ++i) {
        const std::string rel = "masks/pred_" + tag + "_" + std::to_string(i) + ".a3mp";
        write_array(matrix_to_array(out.masks[i]), outdir / rel);
        mask_paths.push_back(rel);
        total += out.masks[i];
      }
      total = total.cwiseMin(1.0);
      const AudioClip est = separate(total, mix_spec, rate);
      write_wav(refs[v], outdir / ("references/video_" + tag + ".wav"));
      write_wav(est, outdir / ("estimates/video_" + tag + ".wav"));

      Eigen::MatrixXd emb(static_cast<Eigen::Index>(out.embeddings.size()), nn::kEmbeddingDim);
      for (std::size_t i = 0; i < out.embeddings.size(); ++i) {
        emb.row(static_cast<Eigen::Index>(i)) = out.embeddings[i].transpose();
      }
      write_array(matrix_to_array(emb), outdir / ("embeddings/video_" + tag + ".a3mp"));
      write_array(matrix_to_array(out.audio_probs), outdir / ("probs/audio_" + tag + ".a3mp"));
      json dir_paths = json::array();
      for (std::size_t w = 0; w < out.direction_probs.size(); ++w) {
        const std::string rel =
            "probs/direction_" + tag + "_" + numbered("window", static_cast<int>(w), ".a3mp");
        write_array(matrix_to_array(out.direction_probs[w]), outdir / rel);
        dir_paths.push_back(rel);
      }
      std::vector<int> audio_labels;
      for (int i : g.auditory_index) audio_labels.push_back(audio_class(catalog, g.nodes[static_cast<std::size_t>(i)]));
      audio_labels.push_back(audio_class(catalog, g.nodes[static_cast<std::size_t>(g.background_index)]));

      videos.push_back({{"video_id", b.video_id},
                        {"bundle", fs::absolute(dirs[v]).string()},
                        {"reference", "references/video_" + tag + ".wav"},
                        {"estimate", "estimates/video_" + tag + ".wav"},
                        {"ibm", "masks/ibm_" + tag + ".a3mp"},
                        {"masks", mask_paths},
                        {"nodes", node_ids(g)},
                        {"audio_labels", audio_labels},
                        {"embeddings", "embeddings/video_" + tag + ".a3mp"},
                        {"audio_probs", "probs/audio_" + tag + ".a3mp"},
                        {"direction_probs", dir_paths}});
    }
  }
  write_json({{"mode", config.mode == SeparationMode::kOracle ? "oracle" : "network"},
              {"seed", config.seed},
              {"classes", config.classes},
              {"rate", rate},
              {"samples", mixture.samples.size()},
              {"mixture", "mixture.wav"},
              {"videos", videos}},
             outdir / "separation.json");
}

// --- losses ----------------------------------------------------------------

void cmd_losses(const fs::path& sep_dir, const fs::path& outdir,
                const std::vector<fs::path>& label_files, const RunConfig& config) {
  const json sep = read_json(sep_dir / "separation.json");
  const auto& videos = sep.at("videos");
  const int classes = sep.value("classes", config.classes);
  check_classes(classes);
  if (!label_files.empty() && label_files.size() != videos.size()) {
    fail("expected " + std::to_string(videos.size()) + " --labels files, got " +
         std::to_string(label_files.size()));
  }

  std::vector<std::vector<Mask>> masks;
  std::vector<Mask> ibms;
  std::vector<EmbeddingSet> embeddings;
  std::vector<ProbTable> audio_probs;
  std::vector<std::vector<int>> audio_labels;
  std::vector<std::vector<ProbTable>> dir_probs;
  std::vector<std::vector<std::vector<int>>> dir_labels;

  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& jv = videos[v];
    ibms.push_back(array_to_matrix(read_array(rel_or_self(sep_dir, jv.at("ibm").get<std::string>()))));
    std::vector<Mask> ms;
    for (const auto& p : jv.at("masks")) {
      ms.push_back(array_to_matrix(read_array(rel_or_self(sep_dir, p.get<std::string>()))));
    }
    masks.push_back(std::move(ms));

    if (jv.contains("embeddings")) {
      const Eigen::MatrixXd e =
          array_to_matrix(read_array(rel_or_self(sep_dir, jv["embeddings"].get<std::string>())));
      EmbeddingSet set;
      for (Eigen::Index r = 0; r < e.rows(); ++r) set.push_back(e.row(r).transpose());
      embeddings.push_back(std::move(set));
    }
    if (jv.contains("audio_probs")) {
      audio_probs.push_back(
          array_to_matrix(read_array(rel_or_self(sep_dir, jv["audio_probs"].get<std::string>()))));
      audio_labels.push_back(jv.at("audio_labels").get<std::vector<int>>());
    }
    if (jv.contains("direction_probs") && !label_files.empty()) {
      const auto labels = index_labels(labels_from_json(read_json(label_files[v])));
      const auto nodes = jv.at("nodes").get<std::vector<int>>();
      std::vector<ProbTable> per_window;
      std::vector<std::vector<int>> per_window_labels;
      int w = 0;
      for (const auto& p : jv["direction_probs"]) {
        per_window.push_back(array_to_matrix(read_array(rel_or_self(sep_dir, p.get<std::string>()))));
        std::vector<int> row;
        for (int node : nodes) {
          const auto it = labels.find({w, node});
          if (it == labels.end()) {
            fail("no label for node " + std::to_string(node) + " in window " + std::to_string(w));
          }
          row.push_back(label_class(it->second, classes));
        }
        per_window_labels.push_back(std::move(row));
        ++w;
      }
      dir_probs.push_back(std::move(per_window));
      dir_labels.push_back(std::move(per_window_labels));
    }
  }

  LossComponents c;
  json out;
  out["cyc"] = c.cyc = cyclic_loss(masks, ibms);
  if (!embeddings.empty()) {
    for (const auto& e : embeddings) c.ortho += ortho_loss(e);
    out["ortho"] = c.ortho;
  } else {
    out["ortho"] = nullptr;
  }
  if (!audio_probs.empty()) {
    out["cons"] = c.cons = consistency_loss(audio_probs, audio_labels);
  } else {
    out["cons"] = nullptr;
  }
  if (!dir_probs.empty()) {
    out["dirpred"] = c.dirpred = dirpred_loss(dir_probs, dir_labels, classes);
  } else {
    out["dirpred"] = nullptr;
  }
  out["total"] = total_loss(c, config.weights);
  out["weights"] = {{"l1", config.weights.cons},
                    {"l2", config.weights.cyc},
                    {"l3", config.weights.ortho},
                    {"l4", config.weights.dirpred}};
  out["classes"] = classes;
  write_json(out, outdir / "losses.json");
  std::cout << out.dump() << "\n";
}

// --- eval ------------------------------------------------------------------

void cmd_eval(const fs::path& sep_dir, const fs::path& outdir, const std::vector<fs::path>& label_files,
              const RunConfig& config) {
  (void)config;
  const json sep = read_json(sep_dir / "separation.json");
  const auto& videos = sep.at("videos");
  if (videos.empty()) fail("no separated videos to evaluate");
  if (!label_files.empty() && label_files.size() != videos.size()) {
    fail("expected " + std::to_string(videos.size()) + " --labels files, got " +
         std::to_string(label_files.size()));
  }
  const std::string method = sep.value("mode", std::string("oracle"));

  std::vector<Signal> estimates;
  std::vector<Signal> references;
  std::vector<std::string> ids;
  for (const auto& jv : videos) {
    estimates.push_back(samples_of(read_wav(rel_or_self(sep_dir, jv.at("estimate").get<std::string>()))));
    references.push_back(samples_of(read_wav(rel_or_self(sep_dir, jv.at("reference").get<std::string>()))));
    ids.push_back(jv.value("video_id", std::string("video")));
  }
  const Signal mixture = samples_of(read_wav(rel_or_self(sep_dir, sep.value("mixture", std::string("mixture.wav")))));

  const BssAssignment best = best_permutation_bss(estimates, references);
  std::string pair;
  for (std::size_t i = 0; i < ids.size(); ++i) pair += (i ? "+" : "") + ids[i];

  std::ostringstream csv;
  csv << "pair,method,estimate,reference,sdr,sir,sar\n";
  json rows = json::array();
  for (std::size_t r = 0; r < references.size(); ++r) {
    const auto e = static_cast<std::size_t>(best.estimate_of_reference[r]);
    const BssResult& res = best.results[r];
    csv << pair << "," << method << "," << ids[e] << "," << ids[r] << "," << csv_number(res.sdr) << ","
        << csv_number(res.sir) << "," << csv_number(res.sar) << "\n";
    rows.push_back({{"method", method}, {"estimate", ids[e]}, {"reference", ids[r]},
                    {"sdr", res.sdr}, {"sir", res.sir}, {"sar", res.sar}});
  }
  for (std::size_t r = 0; r < references.size(); ++r) {
    const BssResult res = bss_ratios(bss_decompose(mixture, references, r));
    csv << pair << ",mixture,mixture," << ids[r] << "," << csv_number(res.sdr) << ","
        << csv_number(res.sir) << "," << csv_number(res.sar) << "\n";
    rows.push_back({{"method", "mixture"}, {"estimate", "mixture"}, {"reference", ids[r]},
                    {"sdr", res.sdr}, {"sir", res.sir}, {"sar", res.sar}});
  }
  fs::create_directories(outdir);
  write_text(outdir / "metrics.csv", csv.str());

  // Direction accuracy over auditory nodes; the background class is trivial.
  std::ostringstream dir_csv;
  dir_csv << "method,classes,accuracy,count\n";
  json dir_rows = json::array();
  auto emit = [&](const std::string& name, int classes, std::span<const int> pred, std::span<const int> truth) {
    const double acc = direction_accuracy(pred, truth);
    dir_csv << name << "," << classes << "," << csv_number(acc) << "," << truth.size() << "\n";
    dir_rows.push_back({{"method", name}, {"classes", classes}, {"accuracy", acc}, {"count", truth.size()}});
  };
  for (int classes : {kOctantClasses, kCubeClasses}) {
    std::vector<int> truth_all;
    std::vector<int> pipeline_pred;
    std::vector<int> pipeline_truth;
    std::vector<int> network_pred;
    std::vector<int> network_truth;
    for (std::size_t v = 0; v < videos.size(); ++v) {
      const auto& jv = videos[v];
      const fs::path bundle_dir = jv.at("bundle").get<std::string>();
      const json manifest = read_json(bundle_dir / "manifest.json");
      if (!manifest.contains("displacement")) continue;
      const auto truth_list =
          labels_from_json(read_json(bundle_dir / manifest["displacement"].get<std::string>()));
      const auto truth = index_labels(truth_list);
      for (const auto& l : truth_list) {
        if (l.node != DisplacementLabel::kBackgroundNode) truth_all.push_back(label_class(l, classes));
      }
      if (!label_files.empty()) {
        for (const auto& l : labels_from_json(read_json(label_files[v]))) {
          if (l.node == DisplacementLabel::kBackgroundNode) continue;
          const auto it = truth.find({l.window, l.node});
          if (it == truth.end()) continue;
          pipeline_pred.push_back(label_class(l, classes));
          pipeline_truth.push_back(label_class(it->second, classes));
        }
      }
      if (jv.contains("direction_probs") && sep.value("classes", 0) == classes) {
        const auto nodes = jv.at("nodes").get<std::vector<int>>();
        int w = 0;
        for (const auto& p : jv["direction_probs"]) {
          const Eigen::MatrixXd probs = array_to_matrix(read_array(rel_or_self(sep_dir, p.get<std::string>())));
          for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i] == DisplacementLabel::kBackgroundNode) continue;
            const auto it = truth.find({w, nodes[i]});
            if (it == truth.end()) continue;
            Eigen::Index arg = 0;
            probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
            network_pred.push_back(static_cast<int>(arg));
            network_truth.push_back(label_class(it->second, classes));
          }
          ++w;
        }
      }
    }
    if (truth_all.empty()) continue;
    const std::vector<int> majority(truth_all.size(), majority_label(truth_all));
    emit("majority_vote", classes, majority, truth_all);
    if (!pipeline_truth.empty()) emit("pipeline", classes, pipeline_pred, pipeline_truth);
    if (!network_truth.empty()) emit("network", classes, network_pred, network_truth);
  }
  write_text(outdir / "dir_acc.csv", dir_csv.str());
  write_json({{"pair", pair},
              {"mean_sdr", best.mean_sdr},
              {"separation", rows},
              {"direction", dir_rows},
              {"bss", "whole-signal"}},
             outdir / "metrics.json");
}

// --- entry point -----------------------------------------------------------

int run_cli(int argc, char** argv) {
  CLI::App app{"asmp: pseudo-3D scene graphs, mask separation and motion labels"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene bundle from spec.json");
  auto* graph = app.add_subcommand("graph", "Build per-window scene graphs and displacement labels");
  auto* sep = app.add_subcommand("separate", "Mix two bundles and separate them");
  auto* losses = app.add_subcommand("losses", "Evaluate the training losses on separation outputs");
  auto* eval = app.add_subcommand("eval", "SDR/SIR/SAR and direction accuracy reports");

  std::string spec_path, outdir, bundle_a, bundle_b, sep_dir, mode = "oracle";
  std::vector<std::string> labels;
  bool framewise = false;

  for (auto* sub : {synth, graph, sep, losses, eval}) {
    sub->add_option("--seed", cfg.seed, "64-bit seed")->each([&](const std::string&) { cfg.seed_set = true; });
  }
  synth->add_option("spec", spec_path, "spec.json")->required();
  synth->add_option("outdir", outdir, "bundle directory to write")->required();
  synth->add_option("--tau", cfg.tau, "no-motion threshold for ground-truth labels")
      ->each([&](const std::string&) { cfg.tau_set = true; });
  synth->add_option("--window-frames", cfg.window_frames, "frames per window")
      ->each([&](const std::string&) { cfg.window_frames_set = true; });

  graph->add_option("bundle", bundle_a, "bundle directory")->required();
  graph->add_option("outdir", outdir, "output directory")->required();
  graph->add_option("--gamma", cfg.gamma, "context IoU threshold");
  graph->add_option("--sigma", cfg.sigma_percentile, "RBF bandwidth percentile");
  graph->add_option("--tau", cfg.tau, "no-motion threshold");
  graph->add_option("--window-frames", cfg.window_frames, "frames per window (must match the bundle)")
      ->each([&](const std::string&) { cfg.window_frames_set = true; });
  graph->add_flag("--multiscale", cfg.multiscale, "also emit the two-threshold adjacency forest");

  sep->add_option("bundle_a", bundle_a)->required();
  sep->add_option("bundle_b", bundle_b)->required();
  sep->add_option("outdir", outdir)->required();
  sep->add_option("--mode", mode, "oracle or network")->check(CLI::IsMember({"oracle", "network"}));
  sep->add_option("--classes", cfg.classes, "direction classes (10 or 28)")->check(CLI::IsMember({10, 28}));
  sep->add_option("--gamma", cfg.gamma);
  sep->add_option("--sigma", cfg.sigma_percentile);
  sep->add_option("--window-frames", cfg.window_frames)->each([&](const std::string&) { cfg.window_frames_set = true; });

  losses->add_option("separation", sep_dir, "separate output directory")->required();
  losses->add_option("outdir", outdir)->required();
  losses->add_option("--labels", labels, "labels.json per video, in separation order");
  losses->add_option("--l1", cfg.weights.cons, "consistency weight");
  losses->add_option("--l2", cfg.weights.cyc, "cyclic weight");
  losses->add_option("--l3", cfg.weights.ortho, "orthogonality weight");
  losses->add_option("--l4", cfg.weights.dirpred, "direction weight");
  losses->add_option("--classes", cfg.classes)->check(CLI::IsMember({10, 28}));

  eval->add_option("separation", sep_dir, "separate output directory")->required();
  eval->add_option("outdir", outdir)->required();
  eval->add_option("--labels", labels, "labels.json per video, in separation order");
  eval->add_flag("--framewise", framewise, "framewise BSS-eval (not implemented)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kValidation);
  }

  try {
    if (const char* env = std::getenv("ASMP_THREADS"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      const long n = std::strtol(env, &end, 10);
      if (*end != '\0' || n < 1) fail(std::string("ASMP_THREADS must be a positive integer, got '") + env + "'");
      cfg.threads = static_cast<int>(std::min<long>(n, 256));
    }
    for (const double* w : {&cfg.weights.cons, &cfg.weights.cyc, &cfg.weights.ortho, &cfg.weights.dirpred}) {
      require(*w >= 0.0, "loss weights must be non-negative");
    }
    require(cfg.sigma_percentile >= 0.0 && cfg.sigma_percentile <= 100.0, "--sigma must be in [0, 100]");
    require(cfg.tau >= 0.0, "--tau must be non-negative");
    require(cfg.window_frames > 0, "--window-frames must be positive");
    cfg.mode = mode == "network" ? SeparationMode::kNetwork : SeparationMode::kOracle;
    const std::vector<fs::path> label_paths(labels.begin(), labels.end());

    if (*synth) {
      cmd_synth(spec_path, outdir, cfg);
    } else if (*graph) {
      cmd_graph(bundle_a, outdir, cfg);
    } else if (*sep) {
      cmd_separate(bundle_a, bundle_b, outdir, cfg);
    } else if (*losses) {
      cmd_losses(sep_dir, outdir, label_paths, cfg);
    } else if (*eval) {
      if (framewise) fail("--framewise BSS-eval is not implemented; whole-signal is the only mode");
      cmd_eval(sep_dir, outdir, label_paths, cfg);
    }
  } catch (const Error& e) {
    std::cerr << "asmp: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "asmp: invalid JSON: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kValidation);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "asmp: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kMissingInput);
  }
  return 0;
}

}  // namespace asmp
