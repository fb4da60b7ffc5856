#include "latefuse/models/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "latefuse/models/linear.hpp"

namespace latefuse::models {

namespace {

constexpr std::size_t K = kNumClasses;

double log_sum_exp(std::span<const double> s) {
  const double m = *std::max_element(s.begin(), s.end());
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace

BoostState gbm_init(const Dataset& train, const GbmParams& params) {
  if (train.rows() == 0) throw ContractError("boosting fit on an empty training set");
  if (train.rows() > std::numeric_limits<std::uint32_t>::max()) {
    throw ContractError("training set too large");
  }
  BoostState state;
  std::array<double, K> counts{};
  for (int y : train.y) counts[static_cast<std::size_t>(y)] += 1.0;
  const double n = static_cast<double>(train.rows());
  state.model.init_scores.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    state.model.init_scores[k] = std::log((counts[k] + 1.0) / (n + static_cast<double>(K)));
  }
  state.model.shrinkage = params.learning_rate;
  state.scores.resize(train.rows() * K);
  for (std::size_t i = 0; i < train.rows(); ++i) {
    std::copy(state.model.init_scores.begin(), state.model.init_scores.end(),
              state.scores.begin() + static_cast<std::ptrdiff_t>(i * K));
  }
  state.bins = make_bins(train, presort(train));
  return state;
}

void gbm_round(BoostState& state, const Dataset& train, const GbmParams& params,
               LeafSolver solver, std::uint64_t seed) {
  const std::size_t n = train.rows();
  if (state.scores.size() != n * K) throw ContractError("boosting state does not match data");

  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  if (params.subsample < 1.0) {
    Rng rng = make_stream(seed, "round", state.rounds_done);
    const auto m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(params.subsample * static_cast<double>(n))), 1, n);
    for (std::size_t i = 0; i < m; ++i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(rng, static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
      std::swap(rows[i], rows[j]);
    }
    rows.resize(m);
    std::sort(rows.begin(), rows.end());
  }

  std::vector<double> prob(n * K);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> s(state.scores.data() + i * K, K);
    const double lse = log_sum_exp(s);
    for (std::size_t k = 0; k < K; ++k) prob[i * K + k] = std::exp(s[k] - lse);
  }

  const GradientTreeOptions options{
      .max_depth = params.max_depth,
      .lambda = solver == LeafSolver::SecondOrder ? params.lambda : 0.0,
      .min_child_weight = solver == LeafSolver::SecondOrder ? 1e-3 : 1.0,
  };
  std::vector<double> grad(n);
  std::vector<double> hess(n, 1.0);
  std::array<Tree, K> round_trees;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = prob[i * K + k];
      grad[i] = p - (static_cast<std::size_t>(train.y[i]) == k ? 1.0 : 0.0);
      if (solver == LeafSolver::SecondOrder) hess[i] = std::max(p * (1.0 - p), 1e-12);
    }
    round_trees[k] = grow_gradient_tree(train, state.bins, rows, grad, hess, options);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto x = train.row(i);
    for (std::size_t k = 0; k < K; ++k) {
      state.scores[i * K + k] += params.learning_rate * round_trees[k].leaf_value(x)[0];
    }
  }
  for (auto& t : round_trees) state.model.trees.push_back(std::move(t));
  ++state.rounds_done;
}

double multinomial_deviance(const Dataset& data, std::span<const double> scores) {
  if (data.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto s = scores.subspan(i * K, K);
    total += log_sum_exp(s) - s[static_cast<std::size_t>(data.y[i])];
  }
  return total / static_cast<double>(data.rows());
}

std::array<double, 3> boost_scores(const BoostModel& model, std::span<const double> x) {
  std::array<double, 3> s{model.init_scores[0], model.init_scores[1], model.init_scores[2]};
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    s[t % K] += model.shrinkage * model.trees[t].leaf_value(x)[0];
  }
  return s;
}

BoostModel fit_boosting(const Dataset& train, const GbmParams& params, LeafSolver solver,
                        std::uint64_t seed, std::vector<double>* trace) {
  auto state = gbm_init(train, params);
  for (int r = 0; r < params.n_rounds; ++r) {
    gbm_round(state, train, params, solver, seed);
    if (trace) trace->push_back(multinomial_deviance(train, state.scores));
  }
  return std::move(state.model);
}

}  // namespace latefuse::models
