#pragma once

// STFT / iSTFT at the separation geometry (11025 Hz, periodic Hann 1022,
// hop 256), mixing, and time-frequency masking.

#include "asmp/tensorio.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <span>

namespace asmp {

struct StftConfig {
  int window = 1022;
  int hop = 256;

  int bins() const { return window / 2 + 1; }
};

/// bins x frames.
using ComplexSpectrogram = Eigen::MatrixXcd;
/// Non-negative bins x frames; 256 rows in the mask domain.
using MagnitudeSpectrogram = Eigen::MatrixXd;
/// Entries in [0, 1].
using Mask = Eigen::MatrixXd;

/// 1 + (66302 - 1022) / 256 == 256 frames.
inline constexpr std::size_t kDefaultClipSamples = 66302;
inline constexpr int kMaskBins = 256;

std::size_t frame_count(std::size_t length, const StftConfig& cfg = {});

std::vector<double> hann_window(int length);

ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& cfg = {});
AudioClip istft(const ComplexSpectrogram& spec, int rate = AudioClip::kDefaultRate,
                const StftConfig& cfg = {});

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

/// 512 -> 256 rows by averaging adjacent pairs.
MagnitudeSpectrogram pool_frequency(const MagnitudeSpectrogram& full);
/// 256 -> 512 rows; row r is copied to rows 2r and 2r+1.
Mask unpool_mask(const Mask& pooled);

/// Center-crop or zero-pad to exactly `length` samples.
AudioClip fit_length(const AudioClip& clip, std::size_t length = kDefaultClipSamples);

AudioClip mix(std::span<const AudioClip> clips);

/// 1 where xu > xother strictly, else 0.
Mask ibm(const MagnitudeSpectrogram& xu, const MagnitudeSpectrogram& xother);

MagnitudeSpectrogram apply_mask(const Mask& mask, const MagnitudeSpectrogram& x);

/// Magnitude (full-resolution, or mask-domain rows which are unpooled first)
/// combined with the phase of `phase_source`, then inverted.
AudioClip reconstruct(const MagnitudeSpectrogram& mag, const ComplexSpectrogram& phase_source,
                      int rate = AudioClip::kDefaultRate, const StftConfig& cfg = {});

/// Applies a mask-domain mask to a full-resolution mixture and inverts it.
AudioClip separate(const Mask& pooled_mask, const ComplexSpectrogram& mixture,
                   int rate = AudioClip::kDefaultRate, const StftConfig& cfg = {});

}  // namespace asmp
