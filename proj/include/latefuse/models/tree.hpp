#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latefuse/core.hpp"
#include "latefuse/rng.hpp"

namespace latefuse::models {

/// Internal nodes route x[feature] <= threshold to `left`. Leaves carry
/// `value`: class probabilities for classification trees, a single additive
/// score for gradient trees.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;

  bool is_leaf() const { return left < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const std::vector<double>& leaf_value(std::span<const double> x) const;
  int depth() const;
  bool operator==(const Tree&) const = default;
};

/// Row indices of a dataset sorted by each feature (ties by row index).
/// Built once per fit and shared read-only between trees.
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> order;
};

SortedColumns presort(const Dataset& data);

struct ClassTreeOptions {
  int max_depth = 6;
  int min_samples_leaf = 1;
  int max_features = 0;            // 0 = all features, scanned in index order
  bool random_thresholds = false;  // extremely randomized splits
};

/// Gini classification tree. `weights` holds a non-negative integer
/// multiplicity per row (bootstrap counts); rows with weight 0 are out of
/// the sample. Splits may have zero impurity decrease; growth stops at
/// pure nodes, at max_depth, or when no split honours min_samples_leaf.
Tree grow_classification_tree(const Dataset& data, const SortedColumns& sorted,
                              std::span<const double> weights, const ClassTreeOptions& options,
                              Rng& rng);

/// Weighted Gini split score sum_k L_k^2 / n_L + sum_k R_k^2 / n_R (larger is
/// purer). Shared by the builder and by anything that needs to rank splits.
double gini_split_score(std::span<const double> left_counts, double left_total,
                        std::span<const double> right_counts, double right_total);

struct GradientTreeOptions {
  int max_depth = 3;
  double lambda = 0.0;
  double min_child_weight = 1.0;  // minimum hessian sum per child
};

/// -G / (H + lambda).
inline double newton_leaf_weight(double grad_sum, double hess_sum, double lambda) {
  return -grad_sum / (hess_sum + lambda);
}

/// Quantile binning for gradient trees. A feature with at most `max_bins`
/// distinct values gets a cut between every pair of neighbours, which makes
/// binned splits identical to exact ones.
struct FeatureBins {
  std::size_t n_features = 0;
  std::vector<std::vector<double>> cuts;  // per feature, ascending
  std::vector<std::uint16_t> bin;         // n x d: number of cuts below x

  std::size_t bins(std::size_t f) const { return cuts[f].size() + 1; }
};

inline constexpr int kDefaultMaxBins = 64;

FeatureBins make_bins(const Dataset& data, const SortedColumns& sorted,
                      int max_bins = kDefaultMaxBins);

/// Regression tree on per-row gradient/hessian pairs restricted to `rows`.
/// Candidate thresholds are the bin cuts. Gain
/// G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l) must be positive; leaves hold
/// newton_leaf_weight. With h = 1 and lambda = 0 this is a least-squares fit
/// to -g.
Tree grow_gradient_tree(const Dataset& data, const FeatureBins& bins,
                        std::span<const std::uint32_t> rows, std::span<const double> grad,
                        std::span<const double> hess, const GradientTreeOptions& options);

}  // namespace latefuse::models
