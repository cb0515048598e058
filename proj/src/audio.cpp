#include "asmp/audio.hpp"

#include "asmp/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

namespace asmp {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  return std::unique_ptr<T[], FftwFree>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

void validate(const StftConfig& cfg) {
  require(cfg.window > 0 && cfg.window % 2 == 0, "STFT window must be positive and even");
  require(cfg.hop > 0 && cfg.hop <= cfg.window, "STFT hop must be in [1, window]");
}

}  // namespace

std::size_t frame_count(std::size_t length, const StftConfig& cfg) {
  const auto win = static_cast<std::size_t>(cfg.window);
  if (length < win) return 0;
  return 1 + (length - win) / static_cast<std::size_t>(cfg.hop);
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& cfg) {
  validate(cfg);
  const std::size_t frames = frame_count(clip.samples.size(), cfg);
  if (frames == 0) {
    fail("clip too short for STFT: " + std::to_string(clip.samples.size()) + " < " +
         std::to_string(cfg.window) + " samples");
  }
  const auto n = static_cast<std::size_t>(cfg.window);
  const int bins = cfg.bins();
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(static_cast<std::size_t>(bins));
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(cfg.window, in.get(), out.get(), FFTW_ESTIMATE));
  }
  const auto window = hann_window(cfg.window);
  ComplexSpectrogram spec(bins, static_cast<Eigen::Index>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(cfg.hop);
    for (std::size_t i = 0; i < n; ++i) in[i] = clip.samples[start + i] * window[i];
    fftw_execute(plan.get());
    for (int k = 0; k < bins; ++k) {
      spec(k, static_cast<Eigen::Index>(t)) = {out[static_cast<std::size_t>(k)][0],
                                               out[static_cast<std::size_t>(k)][1]};
    }
  }
  return spec;
}

AudioClip istft(const ComplexSpectrogram& spec, int rate, const StftConfig& cfg) {
  validate(cfg);
  require(spec.rows() == cfg.bins(), "spectrogram has " + std::to_string(spec.rows()) +
                                         " bins, expected " + std::to_string(cfg.bins()));
  const auto n = static_cast<std::size_t>(cfg.window);
  const auto hop = static_cast<std::size_t>(cfg.hop);
  const auto frames = static_cast<std::size_t>(spec.cols());
  AudioClip clip;
  clip.rate = rate;
  if (frames == 0) return clip;
  const std::size_t length = (frames - 1) * hop + n;
  clip.samples.assign(length, 0.0);
  std::vector<double> norm(length, 0.0);

  auto in = fftw_buffer<fftw_complex>(static_cast<std::size_t>(cfg.bins()));
  auto out = fftw_buffer<double>(n);
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_c2r_1d(cfg.window, in.get(), out.get(), FFTW_ESTIMATE));
  }
  const auto window = hann_window(cfg.window);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (int k = 0; k < cfg.bins(); ++k) {
      const auto v = spec(k, static_cast<Eigen::Index>(t));
      in[static_cast<std::size_t>(k)][0] = v.real();
      in[static_cast<std::size_t>(k)][1] = v.imag();
    }
    fftw_execute(plan.get());
    const std::size_t start = t * hop;
    for (std::size_t i = 0; i < n; ++i) {
      clip.samples[start + i] += out[i] * scale * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    clip.samples[i] = norm[i] > 1e-10 ? clip.samples[i] / norm[i] : 0.0;
  }
  return clip;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) { return spec.cwiseAbs(); }

MagnitudeSpectrogram pool_frequency(const MagnitudeSpectrogram& full) {
  if (full.rows() % 2 != 0) fail("pool_frequency: odd bin count " + std::to_string(full.rows()));
  MagnitudeSpectrogram pooled(full.rows() / 2, full.cols());
  for (Eigen::Index r = 0; r < pooled.rows(); ++r) {
    pooled.row(r) = 0.5 * (full.row(2 * r) + full.row(2 * r + 1));
  }
  return pooled;
}

Mask unpool_mask(const Mask& pooled) {
  Mask full(pooled.rows() * 2, pooled.cols());
  for (Eigen::Index r = 0; r < pooled.rows(); ++r) {
    full.row(2 * r) = pooled.row(r);
    full.row(2 * r + 1) = pooled.row(r);
  }
  return full;
}

AudioClip fit_length(const AudioClip& clip, std::size_t length) {
  AudioClip out;
  out.rate = clip.rate;
  out.samples.assign(length, 0.0);
  const std::size_t n = clip.samples.size();
  if (n >= length) {
    const std::size_t offset = (n - length) / 2;
    std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(offset), length,
                out.samples.begin());
  } else {
    const std::size_t offset = (length - n) / 2;
    std::copy(clip.samples.begin(), clip.samples.end(),
              out.samples.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return out;
}

AudioClip mix(std::span<const AudioClip> clips) {
  require(!clips.empty(), "mix of zero clips");
  AudioClip out = clips.front();
  for (std::size_t c = 1; c < clips.size(); ++c) {
    if (clips[c].samples.size() != out.samples.size()) {
      fail("mix: length mismatch (" + std::to_string(clips[c].samples.size()) + " vs " +
           std::to_string(out.samples.size()) + ")");
    }
    require(clips[c].rate == out.rate, "mix: sample-rate mismatch");
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += clips[c].samples[i];
  }
  return out;
}

Mask ibm(const MagnitudeSpectrogram& xu, const MagnitudeSpectrogram& xother) {
  require(xu.rows() == xother.rows() && xu.cols() == xother.cols(), "ibm: shape mismatch");
  return (xu.array() > xother.array()).cast<double>().matrix();
}

MagnitudeSpectrogram apply_mask(const Mask& mask, const MagnitudeSpectrogram& x) {
  require(mask.rows() == x.rows() && mask.cols() == x.cols(), "apply_mask: shape mismatch");
  return mask.cwiseProduct(x);
}

AudioClip reconstruct(const MagnitudeSpectrogram& mag, const ComplexSpectrogram& phase_source,
                      int rate, const StftConfig& cfg) {
  const MagnitudeSpectrogram full =
      mag.rows() * 2 == phase_source.rows() ? unpool_mask(mag) : mag;
  require(full.rows() == phase_source.rows() && full.cols() == phase_source.cols(),
          "reconstruct: shape mismatch");
  ComplexSpectrogram out(full.rows(), full.cols());
  for (Eigen::Index t = 0; t < full.cols(); ++t) {
    for (Eigen::Index k = 0; k < full.rows(); ++k) {
      const auto z = phase_source(k, t);
      const double a = std::abs(z);
      const std::complex<double> unit = a > 0.0 ? z / a : std::complex<double>(1.0, 0.0);
      out(k, t) = full(k, t) * unit;
    }
  }
  return istft(out, rate, cfg);
}

AudioClip separate(const Mask& pooled_mask, const ComplexSpectrogram& mixture, int rate,
                   const StftConfig& cfg) {
  const Mask full = unpool_mask(pooled_mask);
  require(full.rows() == mixture.rows() && full.cols() == mixture.cols(),
          "separate: mask shape does not match the mixture spectrogram");
  return reconstruct(apply_mask(full, magnitude(mixture)), mixture, rate, cfg);
}

}  // namespace asmp
