#include <doctest.h>

#include "asmp/synth.hpp"
#include "asmp/tensorio.hpp"
#include "oracles.hpp"
#include "scenes.hpp"

#include <sys/wait.h>

#include <fstream>
#include <sstream>

using namespace asmp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

Run run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ASMP_CLI_PATH) + " " + args + " >" + (log.string() + ".out") + " 2>" + log.string();
  const int raw = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  r.err.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
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

std::string data(const char* name) { return (fs::path(ASMP_TEST_DATA) / name).string(); }

// Two synthesized bundles shared by the pipeline cases.
const fs::path& pipeline_dir() {
  static const fs::path dir = [] {
    const auto d = oracle::scratch("cli_pipeline");
    run("synth " + data("spec_a.json") + " " + (d / "a").string(), d / "log_a");
    run("synth " + data("spec_b.json") + " " + (d / "b").string(), d / "log_b");
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth writes a bundle and is deterministic under seed") {
  const auto d = oracle::scratch("cli_synth");
  CHECK(run("synth " + data("spec_a.json") + " " + (d / "x").string() + " --seed 5", d / "l1").code == 0);
  CHECK(run("synth " + data("spec_a.json") + " " + (d / "y").string() + " --seed 5", d / "l2").code == 0);
  CHECK(fs::exists(d / "x" / "manifest.json"));
  CHECK(slurp(d / "x" / "manifest.json") == slurp(d / "y" / "manifest.json"));
  CHECK(slurp(d / "x" / "features" / "background.a3mp") == slurp(d / "y" / "features" / "background.a3mp"));
  CHECK(slurp(d / "x" / "audio" / "mixture.wav") == slurp(d / "y" / "audio" / "mixture.wav"));
  CHECK(run("synth " + data("spec_a.json") + " " + (d / "z").string() + " --seed 6", d / "l3").code == 0);
  CHECK(slurp(d / "x" / "features" / "background.a3mp") != slurp(d / "z" / "features" / "background.a3mp"));
}

TEST_CASE("synth rejects an invalid spec and a missing spec") {
  const auto d = oracle::scratch("cli_synth_bad");
  auto j = read_json(data("spec_a.json"));
  j["objects"][0]["tone_hz"] = 6000.0;
  write_json(j, d / "bad.json");
  const Run bad = run("synth " + (d / "bad.json").string() + " " + (d / "out").string(), d / "l1");
  CHECK(bad.code == 1);
  CHECK_FALSE(bad.err.empty());
  const Run missing = run("synth " + (d / "nope.json").string() + " " + (d / "out").string(), d / "l2");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.json") != std::string::npos);
  CHECK(run("synth", d / "l3").code == 1);
  CHECK(run("frobnicate", d / "l4").code == 1);
}

TEST_CASE("graph: counts, labels and the multiscale forest") {
  const auto& p = pipeline_dir();
  const auto out = p / "ga";
  REQUIRE(run("graph " + (p / "a").string() + " " + out.string() + " --multiscale", p / "lg").code == 0);
  const auto labels = read_json(out / "labels.json");
  const auto rep = read_json(out / "report.json");
  const int windows = rep["windows"].get<int>();
  CHECK(windows == 6);
  CHECK(labels.size() == static_cast<std::size_t>(2 * windows));  // one auditory node plus background
  int graphs = 0;
  for (const auto& e : fs::directory_iterator(out / "graphs")) graphs += e.path().extension() == ".json";
  CHECK(graphs == windows);
  CHECK(fs::exists(out / "multiscale" / "window_0000_fine.a3mp"));
  CHECK(fs::exists(out / "multiscale" / "window_0000_coarse.a3mp"));
  const ArrayFile adj = read_array(out / "adjacency" / "window_0000.a3mp");
  CHECK(adj.shape.size() == 2);
  CHECK(adj.shape[0] == adj.shape[1]);
}

TEST_CASE("graph: wider sigma never increases sparsity") {
  const auto d = oracle::scratch("cli_sigma");
  write_json(scenes::random_motion_spec(3).to_json(), d / "spec.json");
  REQUIRE(run("synth " + (d / "spec.json").string() + " " + (d / "b").string(), d / "l0").code == 0);
  REQUIRE(run("graph " + (d / "b").string() + " " + (d / "g25").string() + " --sigma 25", d / "l1").code == 0);
  REQUIRE(run("graph " + (d / "b").string() + " " + (d / "g75").string() + " --sigma 75", d / "l2").code == 0);
  const auto s = read_json(d / "g25" / "sparsity.json");
  CHECK(s["non_increasing"].get<bool>());
  for (const auto& w : s["per_window"]) {
    CHECK(w["sparsity_75"].get<double>() <= w["sparsity_50"].get<double>());
    CHECK(w["sparsity_50"].get<double>() <= w["sparsity_25"].get<double>());
  }
  const ArrayFile a25 = read_array(d / "g25" / "adjacency" / "window_0000.a3mp");
  const ArrayFile a75 = read_array(d / "g75" / "adjacency" / "window_0000.a3mp");
  REQUIRE(a25.shape == a75.shape);
  for (std::size_t i = 0; i < a25.data.size(); ++i) CHECK(a75.data[i] >= a25.data[i]);
  CHECK(read_json(d / "g75" / "report.json")["percentile"].get<double>() == 75.0);
}

TEST_CASE("oracle separation, losses and eval") {
  const auto& p = pipeline_dir();
  REQUIRE(run("graph " + (p / "a").string() + " " + (p / "la").string(), p / "l1").code == 0);
  REQUIRE(run("graph " + (p / "b").string() + " " + (p / "lb").string(), p / "l2").code == 0);
  REQUIRE(run("separate " + (p / "a").string() + " " + (p / "b").string() + " " + (p / "sep").string() + " --mode oracle", p / "l3").code == 0);
  const std::string labels = " --labels " + (p / "la" / "labels.json").string() + " " + (p / "lb" / "labels.json").string();
  REQUIRE(run("losses " + (p / "sep").string() + " " + (p / "loss").string() + labels, p / "l4").code == 0);
  const auto l = read_json(p / "loss" / "losses.json");
  CHECK(l["cyc"].get<double>() == 0.0);
  CHECK(l["weights"]["l4"].get<double>() == 0.05);

  REQUIRE(run("eval " + (p / "sep").string() + " " + (p / "ev").string() + labels, p / "l5").code == 0);
  const auto rows = csv(p / "ev" / "metrics.csv");
  REQUIRE(!rows.empty());
  CHECK(rows[0] == std::vector<std::string>{"pair", "method", "estimate", "reference", "sdr", "sir", "sar"});
  int oracle_rows = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 7);
    if (rows[i][1] != "oracle") continue;
    ++oracle_rows;
    CHECK(rows[i][2] == rows[i][3]);
    CHECK(std::stod(rows[i][4]) >= 20.0);
  }
  CHECK(oracle_rows == 2);
  const auto acc = csv(p / "ev" / "dir_acc.csv");
  CHECK(acc[0] == std::vector<std::string>{"method", "classes", "accuracy", "count"});
  bool majority = false;
  for (const auto& r : acc) majority |= r[0] == "majority_vote";
  CHECK(majority);
  CHECK(run("eval " + (p / "sep").string() + " " + (p / "ev2").string() + " --framewise", p / "l6").code == 1);
}

TEST_CASE("eval: estimates equal to references hit the cap") {
  const auto& p = pipeline_dir();
  const auto d = oracle::scratch("cli_cap");
  REQUIRE(run("separate " + (p / "a").string() + " " + (p / "b").string() + " " + (d / "sep").string(), d / "l1").code == 0);
  for (int v = 0; v < 2; ++v) {
    const std::string f = "video_" + std::to_string(v) + ".wav";
    fs::copy_file(d / "sep" / "references" / f, d / "sep" / "estimates" / f, fs::copy_options::overwrite_existing);
  }
  REQUIRE(run("eval " + (d / "sep").string() + " " + (d / "ev").string(), d / "l2").code == 0);
  for (const auto& r : csv(d / "ev" / "metrics.csv")) {
    if (r[1] == "oracle") CHECK(std::stod(r[4]) == 300.0);
  }
}

TEST_CASE("network mode: masks in range, deterministic, and the lambda-4 ablation") {
  const auto& p = pipeline_dir();
  const auto d = oracle::scratch("cli_net");
  const std::string ab = (p / "a").string() + " " + (p / "b").string() + " ";
  REQUIRE(run("separate " + ab + (d / "n1").string() + " --mode network --seed 3", d / "l1").code == 0);
  REQUIRE(run("separate " + ab + (d / "n2").string() + " --mode network --seed 3", d / "l2").code == 0);
  const ArrayFile m = read_array(d / "n1" / "masks" / "pred_0_0.a3mp");
  CHECK(m.shape == std::vector<std::uint32_t>{256, 256});
  CHECK(*std::min_element(m.data.begin(), m.data.end()) >= 0.0f);
  CHECK(*std::max_element(m.data.begin(), m.data.end()) <= 1.0f);
  CHECK(slurp(d / "n1" / "masks" / "pred_0_0.a3mp") == slurp(d / "n2" / "masks" / "pred_0_0.a3mp"));
  CHECK(slurp(d / "n1" / "estimates" / "video_1.wav") == slurp(d / "n2" / "estimates" / "video_1.wav"));

  REQUIRE(run("graph " + (p / "a").string() + " " + (d / "la").string(), d / "l3").code == 0);
  REQUIRE(run("graph " + (p / "b").string() + " " + (d / "lb").string(), d / "l4").code == 0);
  const std::string labels = " --labels " + (d / "la" / "labels.json").string() + " " + (d / "lb" / "labels.json").string();
  REQUIRE(run("losses " + (d / "n1").string() + " " + (d / "full").string() + labels, d / "l5").code == 0);
  REQUIRE(run("losses " + (d / "n1").string() + " " + (d / "abl").string() + labels + " --l4 0", d / "l6").code == 0);
  const auto full = read_json(d / "full" / "losses.json");
  const auto abl = read_json(d / "abl" / "losses.json");
  REQUIRE(full["dirpred"].is_number());
  CHECK(full["dirpred"].get<double>() > 0.0);
  const double expect = 0.05 * full["cons"].get<double>() + full["cyc"].get<double>() + full["ortho"].get<double>();
  CHECK(abl["total"].get<double>() == doctest::Approx(expect).epsilon(1e-9));
  CHECK(full["total"].get<double>() == doctest::Approx(expect + 0.05 * full["dirpred"].get<double>()).epsilon(1e-9));
}

TEST_CASE("missing inputs exit with code 2 and name the path") {
  const auto& p = pipeline_dir();
  const auto d = oracle::scratch("cli_missing");
  fs::copy(p / "a", d / "a", fs::copy_options::recursive);
  fs::remove(d / "a" / "audio" / "mixture.wav");
  const Run r = run("separate " + (d / "a").string() + " " + (p / "b").string() + " " + (d / "sep").string(), d / "l1");
  CHECK(r.code == 2);
  CHECK(r.err.find("mixture.wav") != std::string::npos);
  CHECK(run("graph /nonexistent/bundle " + (d / "g").string(), d / "l2").code == 2);
  CHECK(run("separate " + (p / "a").string() + " " + (p / "b").string() + " " + (d / "s2").string() + " --classes 12", d / "l3").code == 1);
}
