#include <gtest/gtest.h>

#include <map>
#include <set>

#include "latefuse/automl.hpp"
#include "latefuse/models/spec.hpp"
#include "test_util.hpp"

namespace latefuse::automl {
namespace {

using models::Family;

/// Independent recheck of select_best: scan for the maximum objective.
std::size_t brute_force_best(const Leaderboard& board) {
  double best = -1.0;
  std::size_t idx = 0;
  for (const auto& t : board.trials) {
    if (!t.failed() && t.objective > best) {
      best = t.objective;
      idx = t.index;
    }
  }
  return idx;
}

void expect_in_search_range(double v, const models::ParamRange& r) {
  EXPECT_GE(v, r.search_lo);
  EXPECT_LE(v, r.search_hi);
}

TEST(Sampler, IsAPureFunctionOfSeedAndIndex) {
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(models::hyperparams_to_json(sample_spec(5, i)),
              models::hyperparams_to_json(sample_spec(5, i)));
    EXPECT_EQ(sample_spec(5, i).seed, sample_spec(5, i).seed);
  }
  EXPECT_NE(sample_spec(5, 0).seed, sample_spec(6, 0).seed);
}

TEST(Sampler, CoversEveryFamilyAndNeverSvmOrCart) {
  std::map<Family, int> seen;
  for (std::size_t i = 0; i < 600; ++i) ++seen[sample_spec(0, i).family];
  EXPECT_EQ(seen.size(), 6u);
  for (auto f : models::kSearchableFamilies) EXPECT_GT(seen[f], 0);
  EXPECT_EQ(seen.count(Family::LinearSVM), 0u);
  EXPECT_EQ(seen.count(Family::CART), 0u);
}

TEST(Sampler, DrawsStayInsideSearchRanges) {
  namespace r = models::ranges;
  for (std::size_t i = 0; i < 10000; ++i) {
    const auto spec = sample_spec(99, i);
    ASSERT_NO_THROW(models::validate(spec));
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, models::ForestParams>) {
            expect_in_search_range(p.n_trees, r::kForestTrees);
            expect_in_search_range(p.max_depth, r::kForestDepth);
          } else if constexpr (std::is_same_v<T, models::GlmParams>) {
            expect_in_search_range(p.lambda, r::kGlmLambda);
            expect_in_search_range(p.alpha, r::kGlmAlpha);
            expect_in_search_range(p.epochs, r::kGlmEpochs);
            expect_in_search_range(p.learning_rate, r::kGlmLearningRate);
          } else if constexpr (std::is_same_v<T, models::GbmParams>) {
            expect_in_search_range(p.n_rounds, r::kGbmRounds);
            expect_in_search_range(p.learning_rate, r::kGbmLearningRate);
            expect_in_search_range(p.max_depth, r::kGbmDepth);
            expect_in_search_range(p.subsample, r::kGbmSubsample);
            expect_in_search_range(p.lambda, r::kGbmLambda);
          } else if constexpr (std::is_same_v<T, models::MlpParams>) {
            expect_in_search_range(p.hidden_layers, r::kMlpLayers);
            EXPECT_TRUE(p.width == 8 || p.width == 16 || p.width == 32);
            expect_in_search_range(p.learning_rate, r::kMlpLearningRate);
            expect_in_search_range(p.epochs, r::kMlpEpochs);
          } else {
            ADD_FAILURE() << "unexpected family";
          }
        },
        spec.hyperparams);
  }
}

TEST(Folds, StratifiedAndBalanced) {
  const Dataset train = to_dataset(testing::small_split(2).train);
  const auto folds = stratified_folds(train, 4);
  ASSERT_EQ(folds.size(), train.rows());
  std::array<std::array<int, kStackFolds>, 3> counts{};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    ASSERT_GE(folds[i], 0);
    ASSERT_LT(folds[i], static_cast<int>(kStackFolds));
    ++counts[static_cast<std::size_t>(train.y[i])][static_cast<std::size_t>(folds[i])];
  }
  for (const auto& per_class : counts) {
    const auto [lo, hi] = std::minmax_element(per_class.begin(), per_class.end());
    EXPECT_LE(*hi - *lo, 1);
  }
  EXPECT_EQ(folds, stratified_folds(train, 4));

  Dataset tiny(1);
  for (int i = 0; i < 4; ++i) tiny.add_row(std::vector<double>{0.1 * i}, 0);
  for (int i = 0; i < 5; ++i) tiny.add_row(std::vector<double>{0.1 * i}, 1);
  for (int i = 0; i < 5; ++i) tiny.add_row(std::vector<double>{0.1 * i}, 2);
  EXPECT_THROW(stratified_folds(tiny, 1), ContractError);
}

TEST(Ensemble, ShapesAndValidity) {
  const auto split = testing::small_split(3);
  const Dataset train = to_dataset(split.train);
  std::vector<models::TrainedModel> bases;
  for (std::size_t i = 0; i < 4; ++i) bases.push_back(models::fit(sample_spec(1, i), train));
  const auto all = build_stacked_ensemble(bases, train, EnsembleKind::AllModels, 1);
  ASSERT_TRUE(all.meta_learner);
  EXPECT_EQ(all.meta_learner->n_features(), 3 * bases.size());
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto x = testing::random_fused_x(rng);
    EXPECT_EQ(all.meta_features(x).size(), 3 * bases.size());
    EXPECT_TRUE(is_valid_class_vector(all.predict_proba(x).probs()));
  }
  const auto fam = build_stacked_ensemble(bases, train, EnsembleKind::BestOfFamily, 1);
  std::set<Family> families;
  for (const auto& b : fam.base_models) EXPECT_TRUE(families.insert(b.family()).second);
  EXPECT_THROW(build_stacked_ensemble({}, train, EnsembleKind::AllModels, 1), ContractError);
}

TEST(Ensemble, SinglePerfectBaseIsNotDegraded) {
  // the label is readable from x[0..3], so a CART is perfect on train
  Dataset train(6);
  Rng rng(5);
  for (int i = 0; i < 150; ++i) {
    const int y = i % 3;
    std::vector<double> x(6, 0.0);
    x[static_cast<std::size_t>(y)] = 1.0;
    const auto t = testing::random_probs(rng);
    std::copy(t.begin(), t.end(), x.begin() + 3);
    train.add_row(x, y);
  }
  const auto base = models::fit({Family::CART, models::CartParams{4, 1}, 0}, train);
  ASSERT_EQ(accuracy(base.predict(train), labels_of(train)), 1.0);
  const auto ens = build_stacked_ensemble({base}, train, EnsembleKind::AllModels, 2);
  std::vector<Polarity> pred;
  for (std::size_t i = 0; i < train.rows(); ++i) pred.push_back(argmax_class(ens.predict_proba(train.row(i))));
  EXPECT_GE(accuracy(pred, labels_of(train)), 1.0 / 3.0 + 0.3);
}

TEST(Search, SingleTrialBudgetYieldsTwoEnsembles) {
  const auto split = testing::small_split(6);
  const auto board = random_search(to_dataset(split.train), to_dataset(split.valid), {1, {}}, 3,
                                   {.threads = 1});
  ASSERT_EQ(board.trials.size(), 3u);
  EXPECT_EQ(board.base_trial_count(), 1u);
  EXPECT_EQ(board.trials[1].family, "StackedEnsemble");
  EXPECT_EQ(board.trials[2].family, "StackedEnsemble");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(board.trials[i].index, i);
  EXPECT_EQ(select_best(board).index, brute_force_best(board));
}

TEST(Search, LeaderboardIsIndependentOfWorkerCount) {
  const auto split = testing::small_split(7);
  const Dataset train = to_dataset(split.train);
  const Dataset valid = to_dataset(split.valid);
  const SearchBudget budget{8, {}};
  const auto a = leaderboard_to_json(random_search(train, valid, budget, 42, {.threads = 1})).dump();
  const auto b = leaderboard_to_json(random_search(train, valid, budget, 42, {.threads = 4})).dump();
  const auto c = leaderboard_to_json(random_search(train, valid, budget, 42, {.threads = 3})).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Search, ObjectivesAreRecomputableAndBeatThePrior) {
  const auto split = testing::small_split(8);
  const Dataset train = to_dataset(split.train);
  const Dataset valid = to_dataset(split.valid);
  const auto board = random_search(train, valid, {6, {}}, 11, {.threads = 2});
  std::array<int, 3> prior{};
  for (int y : valid.y) ++prior[static_cast<std::size_t>(y)];
  const double prior_acc =
      static_cast<double>(*std::max_element(prior.begin(), prior.end())) / static_cast<double>(valid.rows());
  for (const auto& t : board.trials) {
    if (t.failed()) continue;
    std::vector<Polarity> pred;
    for (std::size_t i = 0; i < valid.rows(); ++i) pred.push_back(predict(*t.model, valid.row(i)));
    EXPECT_EQ(accuracy(pred, labels_of(valid)), t.objective) << t.index;
  }
  const auto& best = select_best(board);
  EXPECT_EQ(best.index, brute_force_best(board));
  EXPECT_GT(best.objective, prior_acc);
}

TEST(Search, LeaderboardDocument) {
  const auto split = testing::small_split(9);
  const auto board = random_search(to_dataset(split.train), to_dataset(split.valid), {3, 500.0}, 1,
                                   {.threads = 1});
  const auto doc = leaderboard_to_json(board);
  EXPECT_EQ(doc["schema_version"], kLeaderboardSchemaVersion);
  EXPECT_EQ(doc["master_seed"], 1);
  EXPECT_EQ(doc["budget"]["max_trials"], 3);
  EXPECT_EQ(doc["budget"]["max_wall_clock"], 500.0);
  EXPECT_EQ(doc["trials"].size(), 5u);
  EXPECT_EQ(doc["selected_index"], select_best(board).index);
  EXPECT_FALSE(doc["trials"][0].contains("fit_seconds"));
  EXPECT_TRUE(doc["trials"][0]["hyperparams"].contains("seed"));
  const auto timed = leaderboard_to_json(board, true);
  EXPECT_TRUE(timed["trials"][0].contains("fit_seconds"));
}

TEST(Search, WallClockKeepsATrialPrefix) {
  const auto split = testing::small_split(10);
  const Dataset train = to_dataset(split.train);
  const Dataset valid = to_dataset(split.valid);
  const auto full = random_search(train, valid, {40, {}}, 5, {.threads = 1, .build_ensembles = false});
  const auto cut = random_search(train, valid, {40, 0.05}, 5, {.threads = 1, .build_ensembles = false});
  ASSERT_GE(cut.trials.size(), 1u);
  ASSERT_LE(cut.trials.size(), full.trials.size());
  for (std::size_t i = 0; i < cut.trials.size(); ++i) {
    EXPECT_EQ(cut.trials[i].objective, full.trials[i].objective);
    EXPECT_EQ(cut.trials[i].hyperparams, full.trials[i].hyperparams);
  }
  EXPECT_THROW(random_search(train, valid, {0, {}}, 5), ContractError);
  EXPECT_THROW(random_search(train, valid, {3, -1.0}, 5), ContractError);
}

Trial fake(std::size_t index, double objective) {
  Trial t;
  t.index = index;
  t.family = "GLM";
  t.objective = objective;
  if (objective < 0) t.error = "boom";
  return t;
}

Leaderboard board_of(std::initializer_list<double> objectives) {
  Leaderboard b;
  std::size_t i = 0;
  for (double o : objectives) b.trials.push_back(fake(i++, o));
  return b;
}

TEST(Select, Examples) {
  EXPECT_EQ(select_best(board_of({0.91, 0.93, 0.93})).index, 1u);
  EXPECT_EQ(select_best(board_of({0.5})).index, 0u);
  auto with_ensemble = board_of({0.90, 0.94, 0.95});
  with_ensemble.trials[2].family = "StackedEnsemble";
  EXPECT_EQ(select_best(with_ensemble).index, 2u);
  EXPECT_EQ(select_best(board_of({-1.0, 0.2, -1.0})).index, 1u);
  EXPECT_THROW(select_best(board_of({-1.0, -1.0})), ContractError);
  EXPECT_THROW(select_best(Leaderboard{}), ContractError);
}

TEST(Select, MatchesBruteForceOnRandomBoards) {
  Rng rng(12);
  for (int rep = 0; rep < 2000; ++rep) {
    Leaderboard b;
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 30));
    bool any_ok = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double o = uniform01(rng) < 0.2 ? -1.0 : static_cast<double>(uniform_int(rng, 0, 20)) / 20.0;
      any_ok |= o >= 0;
      b.trials.push_back(fake(i, o));
    }
    if (!any_ok) continue;
    EXPECT_EQ(select_best(b).index, brute_force_best(b));
  }
}

}  // namespace
}  // namespace latefuse::automl
