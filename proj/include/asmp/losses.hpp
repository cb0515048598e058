#pragma once

// Training objectives: orthogonality, permutation-invariant consistency and
// direction cross-entropies, the cyclic mask loss and their weighted sum.

#include "asmp/audio.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace asmp {

/// Unit-norm embeddings, one per separated source.
using EmbeddingSet = std::vector<Eigen::VectorXd>;

/// Rows are sources, columns class probabilities. Rows sum to one.
using ProbTable = Eigen::MatrixXd;

inline constexpr double kProbFloor = 1e-12;
/// Row-sum and unit-norm tolerance on inputs.
inline constexpr double kInputTolerance = 1e-6;

struct LossWeights {
  double cons = 0.05;
  double cyc = 1.0;
  double ortho = 1.0;
  double dirpred = 0.05;
};

struct LossComponents {
  double cons = 0.0;
  double cyc = 0.0;
  double ortho = 0.0;
  double dirpred = 0.0;
};

/// Sum over ordered pairs i != j of (y_i . y_j)^2.
double ortho_loss(const EmbeddingSet& y);
/// Same sum without the unit-norm precondition (used for gradient checks).
double ortho_penalty(const EmbeddingSet& y);
EmbeddingSet ortho_loss_grad(const EmbeddingSet& y);

/// Minimum over permutations s of sum_i -log p[i, labels[s(i)]].
double permuted_cross_entropy(const ProbTable& probs, std::span<const int> labels);

/// One ProbTable and one label list per video.
double consistency_loss(std::span<const ProbTable> probs, std::span<const std::vector<int>> labels);

/// Sum over videos of || sum_i mask_i - ibm ||_1.
double cyclic_loss(std::span<const std::vector<Mask>> masks, std::span<const Mask> ibms);

enum class PermutationScope {
  kPerWindow,  // independent permutation for every (video, window)
  kShared,     // one permutation per video across its windows
};

/// probs[u][w] and labels[u][w]: video u, window w. `classes` is 10 or 28.
double dirpred_loss(std::span<const std::vector<ProbTable>> probs,
                    std::span<const std::vector<std::vector<int>>> labels, int classes,
                    PermutationScope scope = PermutationScope::kPerWindow);

double total_loss(const LossComponents& c, const LossWeights& w = {});

/// Central differences, one coordinate at a time.
Eigen::VectorXd numeric_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x, double h = 1e-5);

}  // namespace asmp
