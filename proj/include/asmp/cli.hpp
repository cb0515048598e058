#pragma once

// Pipeline commands behind the `asmp` executable. Each command reads and
// writes plain files so the stages can be chained from a shell.

#include "asmp/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace asmp {

enum class SeparationMode { kOracle, kNetwork };

struct RunConfig {
  std::uint64_t seed = 0;
  double gamma = 0.1;
  double sigma_percentile = 25.0;
  double tau = 0.02;
  int window_frames = 8;
  LossWeights weights;
  int classes = 10;
  SeparationMode mode = SeparationMode::kOracle;
  bool multiscale = false;
  int threads = 1;  // from ASMP_THREADS
  // Which of the above came from the command line rather than defaults;
  // synth lets these override the spec file, graph checks them against the bundle.
  bool seed_set = false;
  bool tau_set = false;
  bool window_frames_set = false;
};

void cmd_synth(const std::filesystem::path& spec, const std::filesystem::path& outdir,
               const RunConfig& config);

void cmd_graph(const std::filesystem::path& bundle, const std::filesystem::path& outdir,
               const RunConfig& config);

void cmd_separate(const std::filesystem::path& bundle_a, const std::filesystem::path& bundle_b,
                  const std::filesystem::path& outdir, const RunConfig& config);

/// `labels` holds one labels.json per separated video, in order; may be empty.
void cmd_losses(const std::filesystem::path& separation, const std::filesystem::path& outdir,
                const std::vector<std::filesystem::path>& labels, const RunConfig& config);

void cmd_eval(const std::filesystem::path& separation, const std::filesystem::path& outdir,
              const std::vector<std::filesystem::path>& labels, const RunConfig& config);

/// Parses arguments, runs one command, maps errors to exit codes
/// (0 success, 1 validation error, 2 missing input).
int run_cli(int argc, char** argv);

}  // namespace asmp
