#include "asmp/metrics.hpp"

#include "asmp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace asmp {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double energy(std::span<const double> a) { return dot(a, a); }

double ratio_db(double num, double den) {
  if (num <= 0.0) return -kBssCapDb;
  if (den <= 0.0) return kBssCapDb;
  return std::clamp(10.0 * std::log10(num / den), -kBssCapDb, kBssCapDb);
}

}  // namespace

BssDecomposition bss_decompose(std::span<const double> estimate,
                               std::span<const Signal> references, std::size_t target_index) {
  require(!references.empty(), "bss_decompose: no references");
  require(target_index < references.size(), "bss_decompose: target index out of range");
  const std::size_t len = estimate.size();
  const auto n = static_cast<Eigen::Index>(references.size());
  Eigen::MatrixXd gram(n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ri = references[static_cast<std::size_t>(i)];
    require(ri.size() == len, "bss_decompose: length mismatch");
    if (energy(ri) == 0.0) fail("bss_decompose: zero-norm reference " + std::to_string(i));
    rhs(i) = dot(ri, estimate);
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) = dot(ri, references[static_cast<std::size_t>(j)]);
    }
  }
  // Conditioning of the normalized Gram matrix (correlation matrix).
  const Eigen::VectorXd inv_norm = gram.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd corr = inv_norm.asDiagonal() * gram * inv_norm.asDiagonal();
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(corr).eigenvalues();
  if (eig.minCoeff() < kReferenceConditioning * eig.maxCoeff()) {
    fail("bss_decompose: rank-deficient reference set");
  }
  const Eigen::VectorXd coef = gram.ldlt().solve(rhs);

  const auto& target_ref = references[target_index];
  const double alpha = rhs(static_cast<Eigen::Index>(target_index)) /
                       gram(static_cast<Eigen::Index>(target_index),
                            static_cast<Eigen::Index>(target_index));
  BssDecomposition d;
  d.target.resize(len);
  d.interference.resize(len);
  d.artifacts.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    double proj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) proj += coef(i) * references[static_cast<std::size_t>(i)][t];
    d.target[t] = alpha * target_ref[t];
    d.interference[t] = proj - d.target[t];
    d.artifacts[t] = estimate[t] - proj;
  }
  return d;
}

BssResult bss_ratios(const BssDecomposition& d) {
  const double target = energy(d.target);
  double distortion = 0.0;
  double projected = 0.0;
  for (std::size_t t = 0; t < d.target.size(); ++t) {
    const double e = d.interference[t] + d.artifacts[t];
    const double p = d.target[t] + d.interference[t];
    distortion += e * e;
    projected += p * p;
  }
  BssResult r;
  r.sdr = ratio_db(target, distortion);
  r.sir = ratio_db(target, energy(d.interference));
  r.sar = ratio_db(projected, energy(d.artifacts));
  return r;
}

BssAssignment best_permutation_bss(std::span<const Signal> estimates,
                                   std::span<const Signal> references) {
  require(!estimates.empty(), "best_permutation_bss: empty input");
  require(estimates.size() == references.size(), "best_permutation_bss: count mismatch");
  const std::size_t n = references.size();
  // results[e][r]: estimate e scored against reference r.
  std::vector<std::vector<BssResult>> table(n, std::vector<BssResult>(n));
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t r = 0; r < n; ++r) {
      table[e][r] = bss_ratios(bss_decompose(estimates[e], references, r));
    }
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  BssAssignment best;
  best.mean_sdr = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += table[static_cast<std::size_t>(perm[r])][r].sdr;
    const double mean = total / static_cast<double>(n);
    if (mean > best.mean_sdr) {
      best.mean_sdr = mean;
      best.estimate_of_reference = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t r = 0; r < n; ++r) {
    best.results.push_back(table[static_cast<std::size_t>(best.estimate_of_reference[r])][r]);
  }
  return best;
}

double direction_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (labels.empty()) fail("direction_accuracy: empty input");
  require(predictions.size() == labels.size(), "direction_accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

int majority_label(std::span<const int> labels) {
  if (labels.empty()) fail("majority_label: empty input");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  return std::max_element(counts.begin(), counts.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

}  // namespace asmp
