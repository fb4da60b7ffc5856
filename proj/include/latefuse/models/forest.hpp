#pragma once

#include <cstdint>
#include <vector>

#include "latefuse/models/spec.hpp"
#include "latefuse/models/tree.hpp"

namespace latefuse::models {

struct ForestModel {
  std::vector<Tree> trees;
  bool operator==(const ForestModel&) const = default;
};

int max_features_for(FeatureSubsample s, std::size_t n_features);

Tree fit_cart(const Dataset& data, const CartParams& params);

/// Tree t draws everything (bootstrap sample, feature subsets, random
/// thresholds) from stream (seed, "tree", t), so trees can be grown in any
/// order or concurrently and the forest is the same.
ForestModel fit_forest(const Dataset& data, const ForestParams& params, bool extremely_randomized,
                       std::uint64_t seed, int threads = 0);

/// Mean of member-tree leaf distributions.
std::array<double, 3> forest_proba(const ForestModel& forest, std::span<const double> x);

namespace reference {
ForestModel fit_forest(const Dataset& data, const ForestParams& params, bool extremely_randomized,
                       std::uint64_t seed);
}  // namespace reference

}  // namespace latefuse::models
