#include "latefuse/models/forest.hpp"

#include <cmath>
#include <exception>

#include "latefuse/parallel.hpp"

namespace latefuse::models {

int max_features_for(FeatureSubsample s, std::size_t n_features) {
  const auto d = static_cast<double>(n_features);
  switch (s) {
    case FeatureSubsample::Sqrt:
      return std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
    case FeatureSubsample::Half:
      return std::max(1, static_cast<int>(std::floor(0.5 * d)));
    case FeatureSubsample::All:
      return static_cast<int>(n_features);
  }
  return static_cast<int>(n_features);
}

Tree fit_cart(const Dataset& data, const CartParams& params) {
  const auto sorted = presort(data);
  const std::vector<double> weights(data.rows(), 1.0);
  Rng unused(0);  // all features, exact thresholds: nothing random
  return grow_classification_tree(
      data, sorted, weights,
      {.max_depth = params.max_depth, .min_samples_leaf = params.min_samples_leaf}, unused);
}

namespace {

Tree grow_member(const Dataset& data, const SortedColumns& sorted, const ForestParams& params,
                 bool extra, std::uint64_t seed, std::size_t t) {
  Rng rng = make_stream(seed, "tree", t);
  const std::size_t n = data.rows();
  std::vector<double> weights(n, 1.0);
  if (params.bootstrap) {
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      weights[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1))] +=
          1.0;
    }
  }
  const ClassTreeOptions options{
      .max_depth = params.max_depth,
      .min_samples_leaf = 1,
      .max_features = max_features_for(params.feature_subsample, data.n_features),
      .random_thresholds = extra,
  };
  return grow_classification_tree(data, sorted, weights, options, rng);
}

}  // namespace

ForestModel fit_forest(const Dataset& data, const ForestParams& params, bool extremely_randomized,
                       std::uint64_t seed, int threads) {
  if (data.rows() == 0) throw ContractError("forest fit on an empty training set");
  const auto sorted = presort(data);
  ForestModel forest;
  forest.trees.resize(static_cast<std::size_t>(params.n_trees));
  const auto n_trees = static_cast<std::ptrdiff_t>(params.n_trees);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_threads(threads))
  for (std::ptrdiff_t t = 0; t < n_trees; ++t) {
    try {
      forest.trees[static_cast<std::size_t>(t)] = grow_member(
          data, sorted, params, extremely_randomized, seed, static_cast<std::size_t>(t));
    } catch (...) {
#pragma omp critical(latefuse_forest_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return forest;
}

std::array<double, 3> forest_proba(const ForestModel& forest, std::span<const double> x) {
  std::array<double, 3> p{};
  for (const auto& tree : forest.trees) {
    const auto& v = tree.leaf_value(x);
    for (std::size_t k = 0; k < 3; ++k) p[k] += v[k];
  }
  const double n = static_cast<double>(forest.trees.size());
  for (auto& v : p) v /= n;
  return p;
}

namespace reference {

ForestModel fit_forest(const Dataset& data, const ForestParams& params, bool extremely_randomized,
                       std::uint64_t seed) {
  if (data.rows() == 0) throw ContractError("forest fit on an empty training set");
  const auto sorted = presort(data);
  ForestModel forest;
  for (int t = 0; t < params.n_trees; ++t) {
    forest.trees.push_back(grow_member(data, sorted, params, extremely_randomized, seed,
                                       static_cast<std::size_t>(t)));
  }
  return forest;
}

}  // namespace reference

}  // namespace latefuse::models
