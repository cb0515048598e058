#pragma once

// Whole-signal BSS-eval (SDR / SIR / SAR) and direction accuracy.

#include <span>
#include <vector>

namespace asmp {

using Signal = std::vector<double>;

/// Ratios are clamped to [-kBssCapDb, kBssCapDb]; zero denominators give +cap.
inline constexpr double kBssCapDb = 300.0;
inline constexpr double kReferenceConditioning = 1e-10;

struct BssDecomposition {
  Signal target;        // projection onto the target reference
  Signal interference;  // projection onto all references minus `target`
  Signal artifacts;     // residual outside the reference span
};

struct BssResult {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

BssDecomposition bss_decompose(std::span<const double> estimate,
                               std::span<const Signal> references, std::size_t target_index);

BssResult bss_ratios(const BssDecomposition& d);

struct BssAssignment {
  std::vector<int> estimate_of_reference;  // [r] -> estimate index
  std::vector<BssResult> results;          // per reference
  double mean_sdr = 0.0;
};

/// Evaluates every estimate-to-reference assignment and keeps the one with
/// the highest mean SDR (first in lexicographic order on ties).
BssAssignment best_permutation_bss(std::span<const Signal> estimates,
                                   std::span<const Signal> references);

/// Percentage of matching entries.
double direction_accuracy(std::span<const int> predictions, std::span<const int> labels);

/// Most frequent label (lowest id on ties).
int majority_label(std::span<const int> labels);

}  // namespace asmp
