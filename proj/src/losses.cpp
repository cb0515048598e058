#include "asmp/losses.hpp"

#include "asmp/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace asmp {

namespace {

void check_embeddings(const EmbeddingSet& y) {
  require(y.size() >= 2, "ortho_loss needs at least two embeddings");
  for (const auto& v : y) {
    require(v.size() == y.front().size(), "embedding dimension mismatch");
    if (std::abs(v.norm() - 1.0) > kInputTolerance) fail("embedding is not unit-normalized");
  }
}

void check_table(const ProbTable& p) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any() || !p.row(i).allFinite()) {
      fail("probability row " + std::to_string(i) + " has negative or non-finite entries");
    }
    if (std::abs(p.row(i).sum() - 1.0) > kInputTolerance) {
      fail("probability row " + std::to_string(i) + " is not normalized");
    }
  }
}

double neg_log(double p) { return -std::log(std::max(p, kProbFloor)); }

// cost(i, j): loss of assigning label j to row i.
Eigen::MatrixXd assignment_costs(const ProbTable& probs, std::span<const int> labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const int c = labels[static_cast<std::size_t>(j)];
      if (c < 0 || c >= probs.cols()) fail("class id " + std::to_string(c) + " out of range");
      cost(i, j) = neg_log(probs(i, c));
    }
  }
  return cost;
}

// Exhaustive minimum of sum_i cost(i, perm[i]) over all permutations.
template <typename CostFn>
double min_over_permutations(std::size_t n, CostFn cost_of) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, cost_of(perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

double ortho_loss(const EmbeddingSet& y) {
  check_embeddings(y);
  return ortho_penalty(y);
}

double ortho_penalty(const EmbeddingSet& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (i == j) continue;
      const double d = y[i].dot(y[j]);
      total += d * d;
    }
  }
  return total;
}

EmbeddingSet ortho_loss_grad(const EmbeddingSet& y) {
  check_embeddings(y);
  EmbeddingSet grad(y.size(), Eigen::VectorXd::Zero(y.front().size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (i != j) grad[i] += 4.0 * y[i].dot(y[j]) * y[j];
    }
  }
  return grad;
}

double permuted_cross_entropy(const ProbTable& probs, std::span<const int> labels) {
  require(probs.rows() == static_cast<Eigen::Index>(labels.size()),
          "probability rows (" + std::to_string(probs.rows()) + ") != label count (" +
              std::to_string(labels.size()) + ")");
  check_table(probs);
  const Eigen::MatrixXd cost = assignment_costs(probs, labels);
  return min_over_permutations(labels.size(), [&](const std::vector<int>& perm) {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += cost(static_cast<Eigen::Index>(i), perm[i]);
    return s;
  });
}

double consistency_loss(std::span<const ProbTable> probs,
                        std::span<const std::vector<int>> labels) {
  require(probs.size() == labels.size(), "consistency_loss: video count mismatch");
  double total = 0.0;
  for (std::size_t u = 0; u < probs.size(); ++u) total += permuted_cross_entropy(probs[u], labels[u]);
  return total;
}

double cyclic_loss(std::span<const std::vector<Mask>> masks, std::span<const Mask> ibms) {
  require(masks.size() == ibms.size(), "cyclic_loss: video count mismatch");
  double total = 0.0;
  for (std::size_t u = 0; u < masks.size(); ++u) {
    Mask sum = Mask::Zero(ibms[u].rows(), ibms[u].cols());
    for (const auto& m : masks[u]) {
      require(m.rows() == sum.rows() && m.cols() == sum.cols(), "cyclic_loss: shape mismatch");
      sum += m;
    }
    total += (sum - ibms[u]).cwiseAbs().sum();
  }
  return total;
}

double dirpred_loss(std::span<const std::vector<ProbTable>> probs,
                    std::span<const std::vector<std::vector<int>>> labels, int classes,
                    PermutationScope scope) {
  require(classes == 10 || classes == 28, "direction classes must be 10 or 28");
  require(probs.size() == labels.size(), "dirpred_loss: video count mismatch");
  double total = 0.0;
  for (std::size_t u = 0; u < probs.size(); ++u) {
    require(probs[u].size() == labels[u].size(), "dirpred_loss: window count mismatch");
    std::vector<Eigen::MatrixXd> costs;
    for (std::size_t w = 0; w < probs[u].size(); ++w) {
      const auto& p = probs[u][w];
      const auto& l = labels[u][w];
      require(p.cols() == classes, "probability table has " + std::to_string(p.cols()) +
                                       " columns, expected " + std::to_string(classes));
      require(p.rows() == static_cast<Eigen::Index>(l.size()), "dirpred_loss: row/label mismatch");
      for (int c : l) {
        if (c < 0 || c >= classes) fail("class id " + std::to_string(c) + " >= " + std::to_string(classes));
      }
      check_table(p);
      costs.push_back(assignment_costs(p, l));
    }
    if (costs.empty()) continue;
    const std::size_t n = static_cast<std::size_t>(costs.front().rows());
    auto perm_cost = [](const Eigen::MatrixXd& cost, const std::vector<int>& perm) {
      double s = 0.0;
      for (std::size_t i = 0; i < perm.size(); ++i) s += cost(static_cast<Eigen::Index>(i), perm[i]);
      return s;
    };
    if (scope == PermutationScope::kPerWindow) {
      for (const auto& cost : costs) {
        total += min_over_permutations(
            static_cast<std::size_t>(cost.rows()),
            [&](const std::vector<int>& perm) { return perm_cost(cost, perm); });
      }
    } else {
      for (const auto& cost : costs) require(static_cast<std::size_t>(cost.rows()) == n, "row count varies across windows");
      total += min_over_permutations(n, [&](const std::vector<int>& perm) {
        double s = 0.0;
        for (const auto& cost : costs) s += perm_cost(cost, perm);
        return s;
      });
    }
  }
  return total;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  for (double v : {c.cons, c.cyc, c.ortho, c.dirpred}) {
    if (!std::isfinite(v)) fail("non-finite loss component");
  }
  return w.cons * c.cons + w.cyc * c.cyc + w.ortho * c.ortho + w.dirpred * c.dirpred;
}

Eigen::VectorXd numeric_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down)) fail("numeric_grad: non-finite f(x +/- h)");
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace asmp
