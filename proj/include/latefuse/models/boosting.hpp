#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "latefuse/models/spec.hpp"
#include "latefuse/models/tree.hpp"

namespace latefuse::models {

enum class LeafSolver {
  FirstOrder,   // least-squares tree on the negative gradient, h = 1, no lambda
  SecondOrder,  // gradient/hessian statistics, leaf = -G / (H + lambda)
};

/// K-class boosted trees with a softmax link: one regression tree per class
/// per round, added with shrinkage.
struct BoostModel {
  std::vector<double> init_scores;  // log class priors
  double shrinkage = 0.1;
  std::vector<Tree> trees;  // round-major: trees[round * K + k]

  std::size_t rounds() const { return trees.size() / init_scores.size(); }
  bool operator==(const BoostModel&) const = default;
};

/// Training-time state: the model so far plus the current score of every
/// training row (n x K, row-major).
struct BoostState {
  BoostModel model;
  std::vector<double> scores;
  FeatureBins bins;
  std::size_t rounds_done = 0;
};

/// Scores start at log((n_k + 1) / (n + K)) so a class absent from the
/// data still has a finite score.
BoostState gbm_init(const Dataset& train, const GbmParams& params);

/// One boosting round. Row subsampling (params.subsample < 1) draws from
/// stream (seed, "round", round index).
void gbm_round(BoostState& state, const Dataset& train, const GbmParams& params,
               LeafSolver solver, std::uint64_t seed);

/// Mean multinomial deviance (cross-entropy) of row-major n x K scores.
double multinomial_deviance(const Dataset& data, std::span<const double> scores);

std::array<double, 3> boost_scores(const BoostModel& model, std::span<const double> x);

/// Runs params.n_rounds rounds; `trace` receives the training deviance after
/// each round.
BoostModel fit_boosting(const Dataset& train, const GbmParams& params, LeafSolver solver,
                        std::uint64_t seed, std::vector<double>* trace = nullptr);

}  // namespace latefuse::models
