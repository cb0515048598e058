// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "asmp/audio.hpp"
#include "asmp/error.hpp"
#include "asmp/geometry.hpp"
#include "asmp/losses.hpp"
#include "asmp/metrics.hpp"
#include "asmp/motion.hpp"
#include "asmp/neural.hpp"
#include "asmp/scenegraph.hpp"
#include "asmp/synth.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace asmp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

PointCloud random_cloud(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  for (int i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

EmbeddingSet random_unit(std::mt19937_64& rng, int count, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  EmbeddingSet y;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd v(dim);
    for (auto& c : v) c = g(rng);
    y.push_back(v.normalized());
  }
  return y;
}

ProbTable random_probs(std::mt19937_64& rng, int rows, int classes) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  ProbTable p(rows, classes);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < classes; ++c) p(i, c) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Signal gauss(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Signal s(n);
  for (auto& v : s) v = g(rng);
  return s;
}

std::vector<SceneGraph> graphs_for(const SceneBundle& b) {
  std::vector<SceneGraph> gs;
  const std::set<int> cat(b.auditory_catalog.begin(), b.auditory_catalog.end());
  for (int w = 0; w < b.windows(); ++w) {
    gs.push_back(build_graph(b.detections[static_cast<std::size_t>(w)].detections, cat,
                             b.depth[static_cast<std::size_t>(b.reference_frame(w))], b.background_feature));
  }
  return gs;
}

// Class mismatches between pipeline labels and analytic truth, matched by (window, node).
int label_mismatches(const std::vector<DisplacementLabel>& pipeline, const std::vector<DisplacementLabel>& truth,
                     int* compared) {
  int bad = 0;
  for (const auto& t : truth) {
    bool found = false;
    for (const auto& l : pipeline) {
      if (l.window != t.window || l.node != t.node) continue;
      found = true;
      ++*compared;
      bad += (l.class10 != t.class10) + (l.class28 != t.class28);
    }
    bad += !found;
  }
  return bad;
}

Outcome criterion1() {
  Outcome o;
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> size(5, 60);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const PointCloud a = random_cloud(rng, size(rng));
    const PointCloud b = random_cloud(rng, size(rng));
    worst = std::max(worst, std::abs(chamfer(a, b) - oracle::chamfer(a.points, b.points)));
  }
  o.require(worst <= 1e-12, "chamfer deviation " + fmt(worst));
  std::uniform_real_distribution<double> sc(0.5, 2.0);
  std::uniform_real_distribution<double> tr(-1.0, 1.0);
  double rot = 0.0;
  double scale = 0.0;
  for (int k = 0; k < 20; ++k) {
    const PointCloud src = random_cloud(rng, 40);
    SimilarityTransform t;
    t.rotation = oracle::random_rotation(rng);
    t.scale = sc(rng);
    t.translation = Vec3(tr(rng), tr(rng), tr(rng));
    const IcpResult r = icp_align(src, apply_transform(t, src));
    o.require(r.status == IcpStatus::kOk, "icp status not ok");
    rot = std::max(rot, oracle::rotation_angle(r.transform.rotation, t.rotation));
    scale = std::max(scale, std::abs(r.transform.scale - t.scale));
  }
  o.require(rot < 1e-6, "rotation error " + fmt(rot));
  o.require(scale < 1e-9, "scale error " + fmt(scale));
  if (o.pass) o.detail = "chamfer dev " + fmt(worst) + ", icp rot err " + fmt(rot) + " rad, scale err " + fmt(scale);
  return o;
}

Outcome criterion2() {
  Outcome o;
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double mean25 = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int n = 8 + t;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = u(rng);
    }
    d /= d.maxCoeff();
    const DistanceMatrix dm{d};
    const double s25 = sparsity(rbf_adjacency(dm, 25.0));
    const double s50 = sparsity(rbf_adjacency(dm, 50.0));
    const double s75 = sparsity(rbf_adjacency(dm, 75.0));
    mean25 += s25 / 10.0;
    o.require(s50 <= s25 && s75 <= s50, "sparsity increased at matrix " + std::to_string(t));
  }
  if (o.pass) o.detail = "10 matrices, mean sparsity at 25th percentile " + fmt(mean25);
  return o;
}

Outcome criterion3() {
  Outcome o;
  std::mt19937_64 rng(1003);
  for (int t = 0; t < 5; ++t) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(16, 4);
    for (auto& v : m.reshaped()) v = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ() * Eigen::MatrixXd::Identity(16, 4);
    EmbeddingSet y;
    for (int c = 0; c < 4; ++c) y.push_back(q.col(c));
    o.require(std::abs(ortho_loss(y)) <= 1e-9, "orthonormal ortho_loss " + fmt(ortho_loss(y)));
  }
  const Eigen::VectorXd u = random_unit(rng, 1, 8)[0];
  o.require(std::abs(ortho_loss({u, u}) - 2.0) <= 1e-12, "identical pair ortho_loss " + fmt(ortho_loss({u, u})));

  double worst_grad = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto y = random_unit(rng, 3, 6);
    Eigen::VectorXd x(18);
    for (int i = 0; i < 3; ++i) x.segment(6 * i, 6) = y[static_cast<std::size_t>(i)];
    const auto g = ortho_loss_grad(y);
    Eigen::VectorXd analytic(18);
    for (int i = 0; i < 3; ++i) analytic.segment(6 * i, 6) = g[static_cast<std::size_t>(i)];
    const auto numeric = numeric_grad(
        [](const Eigen::VectorXd& v) {
          EmbeddingSet z;
          for (int i = 0; i < 3; ++i) z.push_back(v.segment(6 * i, 6));
          return ortho_penalty(z);
        },
        x);
    worst_grad = std::max(worst_grad, (analytic - numeric).norm() / analytic.norm());
  }
  o.require(worst_grad <= 1e-5, "gradient relative error " + fmt(worst_grad));

  std::uniform_int_distribution<int> cls10(0, 9);
  std::uniform_int_distribution<int> cls28(0, 27);
  int exact_misses = 0;
  for (int rows = 1; rows <= 3; ++rows) {
    for (int t = 0; t < 10; ++t) {
      const std::vector<ProbTable> p = {random_probs(rng, rows, 10), random_probs(rng, rows, 10)};
      std::vector<std::vector<int>> labels(2);
      for (auto& l : labels) {
        for (int i = 0; i < rows; ++i) l.push_back(cls10(rng));
      }
      exact_misses += consistency_loss(p, labels) != oracle::permuted_ce(p[0], labels[0]) + oracle::permuted_ce(p[1], labels[1]);

      std::vector<std::vector<ProbTable>> q(2);
      std::vector<std::vector<std::vector<int>>> ql(2);
      double ref = 0.0;
      for (int v = 0; v < 2; ++v) {
        for (int w = 0; w < 3; ++w) {
          q[static_cast<std::size_t>(v)].push_back(random_probs(rng, rows, 28));
          std::vector<int> l;
          for (int i = 0; i < rows; ++i) l.push_back(cls28(rng));
          ref += oracle::permuted_ce(q[static_cast<std::size_t>(v)].back(), l);
          ql[static_cast<std::size_t>(v)].push_back(l);
        }
      }
      exact_misses += dirpred_loss(q, ql, 28) != ref;
    }
  }
  o.require(exact_misses == 0, std::to_string(exact_misses) + " permutation-loss mismatches");

  const AudioClip a = fit_length(gen_audio(scenes::tone_spec(1, 440, 1)).mixture);
  const AudioClip b = fit_length(gen_audio(scenes::tone_spec(2, 880, 2)).mixture);
  const auto ma = magnitude(stft(a));
  const auto mb = magnitude(stft(b));
  const std::vector<std::vector<Mask>> masks = {{ibm(ma, mb)}, {ibm(mb, ma)}};
  const std::vector<Mask> ibms = {ibm(ma, mb), ibm(mb, ma)};
  const double cyc = cyclic_loss(masks, ibms);
  o.require(cyc == 0.0, "cyclic loss of oracle masks " + fmt(cyc));
  if (o.pass) o.detail = "gradient rel err " + fmt(worst_grad) + ", 60 factorial-oracle cases exact, cyc 0";
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto& t = direction_templates();
  for (int k = 0; k < 26; ++k) o.require(quantize28(t[static_cast<std::size_t>(k)], 0.02, false) == k, "template " + std::to_string(k));
  std::mt19937_64 rng(1004);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.0, 50.0);
  int mismatches = 0;
  int scale_breaks = 0;
  int perturbed = 0;
  std::set<int> hit;
  const double tau = 0.02;
  for (int i = 0; i < 100000; ++i) {
    Vec3 d(g(rng), g(rng), g(rng));
    d.normalize();
    while (oracle::cube_margin(d) < 1e-9) {
      ++perturbed;
      d = (d + 1e-6 * Vec3(g(rng), g(rng), g(rng))).normalized();
    }
    const int q = quantize28(d, tau, false);
    hit.insert(q);
    mismatches += q != oracle::cube_class(d);
    const double c = tau + scale(rng);
    scale_breaks += quantize28(c * d, tau, false) != q;
    scale_breaks += quantize10(c * d, tau, false) != quantize10(d, tau, false);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " cosine-scan mismatches");
  o.require(scale_breaks == 0, std::to_string(scale_breaks) + " scale-invariance breaks");
  o.require(hit.size() == 26, "only " + std::to_string(hit.size()) + " classes hit");
  if (o.pass) o.detail = "1e5 directions, 0 mismatches, 26 classes hit, " + std::to_string(perturbed) + " ties perturbed";
  return o;
}

Outcome criterion5() {
  Outcome o;
  o.require(frame_count(kDefaultClipSamples) == 256, "T != 256");
  std::mt19937_64 rng(1005);
  AudioClip sine;
  AudioClip noise;
  sine.samples.resize(kDefaultClipSamples);
  noise.samples = gauss(rng, kDefaultClipSamples);
  for (std::size_t i = 0; i < sine.samples.size(); ++i) sine.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 11025.0);
  double worst = 0.0;
  for (const AudioClip* x : {&sine, &noise}) {
    const auto spec = stft(*x);
    o.require(spec.cols() == 256, "frame count " + std::to_string(spec.cols()));
    const AudioClip y = istft(spec);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 1022; i + 1022 < x->samples.size(); ++i) {
      num += std::pow(y.samples[i] - x->samples[i], 2);
      den += x->samples[i] * x->samples[i];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  o.require(worst <= 1e-3, "round-trip error " + fmt(worst));
  if (o.pass) o.detail = "T=256, worst interior relative error " + fmt(worst);
  return o;
}

Outcome criterion6() {
  Outcome o;
  const AudioClip a = fit_length(gen_audio(scenes::tone_spec(11, 440, 1)).mixture);
  const AudioClip b = fit_length(gen_audio(scenes::tone_spec(12, 880, 2)).mixture);
  const std::array<AudioClip, 2> both = {a, b};
  const AudioClip m = mix(both);
  const auto spec = stft(m);
  const auto ma = magnitude(stft(a));
  const auto mb = magnitude(stft(b));
  std::vector<Signal> est;
  for (const Mask& k : {ibm(ma, mb), ibm(mb, ma)}) {
    Signal e = reconstruct(apply_mask(k, magnitude(spec)), spec).samples;
    e.resize(a.samples.size(), 0.0);
    est.push_back(e);
  }
  const std::vector<Signal> refs = {a.samples, b.samples};
  const auto r = best_permutation_bss(est, refs);
  double min_sdr = 1e9;
  double min_sir = 1e9;
  double min_gain = 1e9;
  for (std::size_t i = 0; i < 2; ++i) {
    const double base = bss_ratios(bss_decompose(m.samples, refs, i)).sdr;
    min_sdr = std::min(min_sdr, r.results[i].sdr);
    min_sir = std::min(min_sir, r.results[i].sir);
    min_gain = std::min(min_gain, r.results[i].sdr - base);
  }
  o.require(min_sdr >= 20.0, "SDR " + fmt(min_sdr));
  o.require(min_sir >= 25.0, "SIR " + fmt(min_sir));
  o.require(min_gain >= 10.0, "gain over mixture " + fmt(min_gain));
  o.detail = "min SDR " + fmt(min_sdr) + " dB, min SIR " + fmt(min_sir) + " dB, gain over mixture " + fmt(min_gain) + " dB";
  return o;
}

Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(1007);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double identity = 0.0;
  double scale_dev = 0.0;
  int sir_below = 0;
  for (int t = 0; t < 100; ++t) {
    const std::vector<Signal> refs = {gauss(rng, 300), gauss(rng, 300)};
    Signal est = gauss(rng, 300);
    const double wa = 0.5 + u(rng);
    const double wb = u(rng);
    for (std::size_t i = 0; i < est.size(); ++i) est[i] = wa * refs[0][i] + wb * refs[1][i] + 0.3 * est[i];
    const auto d = bss_decompose(est, refs, 0);
    for (std::size_t i = 0; i < est.size(); ++i) {
      identity = std::max(identity, std::abs(d.target[i] + d.interference[i] + d.artifacts[i] - est[i]));
    }
    const auto r = bss_ratios(d);
    Signal scaled = est;
    const double alpha = 0.01 + 10.0 * u(rng);
    for (auto& v : scaled) v *= alpha;
    const auto s = bss_ratios(bss_decompose(scaled, refs, 0));
    scale_dev = std::max({scale_dev, std::abs(r.sdr - s.sdr), std::abs(r.sir - s.sir), std::abs(r.sar - s.sar)});
    sir_below += r.sir < r.sdr;
  }
  o.require(identity <= 1e-9, "identity deviation " + fmt(identity));
  o.require(scale_dev < 1e-9, "scale deviation " + fmt(scale_dev) + " dB");
  o.require(sir_below == 0, std::to_string(sir_below) + " cases with SIR < SDR");
  const std::vector<Signal> refs = {gauss(rng, 300), gauss(rng, 300)};
  const auto perfect = bss_ratios(bss_decompose(refs[1], refs, 1));
  o.require(perfect.sdr == kBssCapDb && perfect.sir == kBssCapDb && perfect.sar == kBssCapDb, "perfect estimate not capped");
  if (o.pass) o.detail = "identity dev " + fmt(identity) + ", scale dev " + fmt(scale_dev) + " dB, cap reached";
  return o;
}

Outcome criterion8() {
  Outcome o;
  int compared = 0;
  int bad = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SceneBundle b = gen_scene(scenes::random_motion_spec(seed));
    bad += label_mismatches(window_labels(b, graphs_for(b)), b.truth, &compared);
  }
  o.require(bad == 0, std::to_string(bad) + " class mismatches");
  o.require(compared == 10 * 6 * 3, "compared " + std::to_string(compared) + " labels");
  if (o.pass) o.detail = "10 scenes, " + std::to_string(compared) + " (window, node) labels, 0 mismatches in 10 and 28 classes";
  return o;
}

Outcome criterion9() {
  using namespace asmp::nn;
  Outcome o;
  const NetParams params(1009, NetConfig{});
  std::mt19937_64 rng(1009);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double equiv = 0.0;
  for (int t = 0; t < 3; ++t) {
    const int n = 4 + t;
    NodeFeatures x(n, kFeatureDim);
    for (auto& v : x.reshaped()) v = g(rng);
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) w(i, j) = w(j, i) = u(rng) < 0.25 ? 0.0 : u(rng);
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) p(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    const AdjacencyMatrix a{w};
    const AdjacencyMatrix pa{p * w * p.transpose()};
    const NodeFeatures ga = gat_forward(x, a, params);
    equiv = std::max(equiv, (gat_forward(p * x, pa, params) - p * ga).cwiseAbs().maxCoeff());
    const NodeFeatures ea = edgeconv_forward(ga, a, params);
    equiv = std::max(equiv, (edgeconv_forward(p * ga, pa, params) - p * ea).cwiseAbs().maxCoeff());
  }
  o.require(equiv < 1e-9, "equivariance deviation " + fmt(equiv));

  Eigen::VectorXd zeta(kPooledDim);
  for (auto& v : zeta) v = g(rng);
  for (int n = 1; n <= 3; ++n) {
    const auto ys = gru_rollout(zeta, n, params);
    o.require(ys.size() == static_cast<std::size_t>(n + 1), "rollout length");
    for (const auto& y : ys) o.require(std::abs(y.norm() - 1.0) < 1e-9, "embedding norm " + fmt(y.norm()));
  }

  const SceneBundle bundle = gen_scene(scenes::random_motion_spec(4));
  const SceneGraph graph = graphs_for(bundle)[0];
  const MagnitudeSpectrogram spec = pool_frequency(magnitude(stft(fit_length(bundle.mixture))));
  const NetworkOutput first = run_network(graph, spec, params, bundle.windows(), 28);
  const NetworkOutput second = run_network(graph, spec, params, bundle.windows(), 28);
  o.require(first.embeddings.size() == graph.auditory_index.size() + 1, "network embedding count");
  bool same = first.masks.size() == second.masks.size();
  for (std::size_t i = 0; i < first.masks.size(); ++i) {
    const Mask& m = first.masks[i];
    o.require(m.rows() == 256 && m.cols() == 256, "mask shape");
    o.require(m.minCoeff() >= 0.0 && m.maxCoeff() <= 1.0, "mask range");
    same = same && std::memcmp(m.data(), second.masks[i].data(), sizeof(double) * static_cast<std::size_t>(m.size())) == 0;
  }
  same = same && std::memcmp(first.audio_probs.data(), second.audio_probs.data(),
                             sizeof(double) * static_cast<std::size_t>(first.audio_probs.size())) == 0;
  for (std::size_t w = 0; w < first.direction_probs.size(); ++w) {
    same = same && first.direction_probs[w] == second.direction_probs[w];
  }
  o.require(same, "forward pass not byte-identical");
  if (o.pass) o.detail = "equivariance dev " + fmt(equiv) + ", " + std::to_string(first.masks.size()) + " masks 256x256, deterministic";
  return o;
}

struct Cli {
  fs::path dir;
  int failures = 0;

  int run(const std::string& args) {
    const std::string cmd = std::string(ASMP_CLI_PATH) + " " + args + " >>" + (dir / "cli.log").string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    failures += code != 0;
    return code;
  }
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

Outcome criterion10() {
  Outcome o;
  Cli cli{oracle::scratch("acceptance_e2e")};
  const fs::path data(ASMP_TEST_DATA);
  const auto& d = cli.dir;
  auto p = [&](const char* name) { return (d / name).string(); };
  cli.run("synth " + (data / "spec_a.json").string() + " " + p("a"));
  cli.run("synth " + (data / "spec_b.json").string() + " " + p("b"));
  cli.run("graph " + p("a") + " " + p("ga"));
  cli.run("graph " + p("b") + " " + p("gb"));
  cli.run("separate " + p("a") + " " + p("b") + " " + p("sep") + " --mode oracle");
  const std::string labels = " --labels " + (d / "ga" / "labels.json").string() + " " + (d / "gb" / "labels.json").string();
  cli.run("losses " + p("sep") + " " + p("loss") + labels);
  cli.run("eval " + p("sep") + " " + p("eval") + labels);
  o.require(cli.failures == 0, std::to_string(cli.failures) + " CLI steps exited nonzero (see " + (d / "cli.log").string() + ")");
  if (!o.pass) return o;

  // Criterion 6 from metrics.csv.
  const auto rows = read_csv(d / "eval" / "metrics.csv");
  o.require(!rows.empty() && rows[0].size() == 7 && rows[0][4] == "sdr", "metrics.csv header");
  std::map<std::string, double> oracle_sdr;
  std::map<std::string, double> oracle_sir;
  std::map<std::string, double> mixture_sdr;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 7) {
      o.require(false, "metrics.csv row " + std::to_string(i));
      continue;
    }
    if (rows[i][1] == "oracle") {
      oracle_sdr[rows[i][3]] = std::stod(rows[i][4]);
      oracle_sir[rows[i][3]] = std::stod(rows[i][5]);
    } else if (rows[i][1] == "mixture") {
      mixture_sdr[rows[i][3]] = std::stod(rows[i][4]);
    }
  }
  o.require(oracle_sdr.size() == 2 && mixture_sdr.size() == 2, "expected two oracle and two mixture rows");
  double min_sdr = 1e9;
  double min_sir = 1e9;
  double min_gain = 1e9;
  for (const auto& [ref, sdr] : oracle_sdr) {
    min_sdr = std::min(min_sdr, sdr);
    min_sir = std::min(min_sir, oracle_sir[ref]);
    min_gain = std::min(min_gain, sdr - mixture_sdr[ref]);
  }
  o.require(min_sdr >= 20.0 && min_sir >= 25.0 && min_gain >= 10.0,
            "separation from files: SDR " + fmt(min_sdr) + ", SIR " + fmt(min_sir) + ", gain " + fmt(min_gain));

  // Criterion 8 from files: labels.json against the bundle's displacement.json.
  int compared = 0;
  int bad = 0;
  for (const char* v : {"a", "b"}) {
    const auto pipeline = labels_from_json(read_json(d / (std::string("g") + v) / "labels.json"));
    const auto truth = labels_from_json(read_json(d / v / "displacement.json"));
    bad += label_mismatches(pipeline, truth, &compared);
  }
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::string s = std::to_string(seed);
    write_json(scenes::random_motion_spec(seed).to_json(), d / ("motion" + s + ".json"));
    cli.run("synth " + (d / ("motion" + s + ".json")).string() + " " + (d / ("m" + s)).string());
    cli.run("graph " + (d / ("m" + s)).string() + " " + (d / ("mg" + s)).string());
    if (cli.failures) break;
    bad += label_mismatches(labels_from_json(read_json(d / ("mg" + s) / "labels.json")),
                            labels_from_json(read_json(d / ("m" + s) / "displacement.json")), &compared);
  }
  o.require(cli.failures == 0, "motion scene CLI steps failed");
  o.require(bad == 0 && compared == 2 * 12 + 180, "labels from files: " + std::to_string(bad) + " mismatches over " + std::to_string(compared));
  const auto acc = read_csv(d / "eval" / "dir_acc.csv");
  for (const auto& r : acc) {
    if (r.size() == 4 && r[0] == "pipeline") o.require(std::stod(r[2]) == 100.0, "dir_acc pipeline " + r[2]);
  }
  const auto losses = read_json(d / "loss" / "losses.json");
  o.require(losses.at("cyc").get<double>() == 0.0, "cyc from files " + losses.at("cyc").dump());
  if (o.pass) {
    o.detail = "exit 0 everywhere; min SDR " + fmt(min_sdr) + " dB, SIR " + fmt(min_sir) + " dB, gain " + fmt(min_gain) +
               " dB; " + std::to_string(compared) + " labels from files, 0 mismatches";
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"geometry oracles (chamfer, icp)", criterion1},
      {"rbf sparsity non-increasing in sigma", criterion2},
      {"loss identities", criterion3},
      {"direction quantizer", criterion4},
      {"stft round-trip", criterion5},
      {"oracle two-tone separation", criterion6},
      {"bss metrics", criterion7},
      {"motion labels vs analytic truth", criterion8},
      {"neural shapes and invariants", criterion9},
      {"end-to-end cli", criterion10},
  };
  int failed = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " (" << o.detail << ")"
              << std::endl;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed in " << fmt(secs)
            << " s" << std::endl;
  return failed == 0 ? 0 : 1;
}
