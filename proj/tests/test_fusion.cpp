#include <gtest/gtest.h>

#include "latefuse/fusion.hpp"
#include "test_util.hpp"

namespace latefuse::fusion {
namespace {

ModalityPredictions preds(Modality m,
                          std::initializer_list<std::pair<std::string, std::array<double, 3>>> rows) {
  ModalityPredictions p;
  p.modality = m;
  for (const auto& [id, v] : rows) p.rows.emplace_back(id, ClassVector(v));
  return p;
}

FusedFeature fused(std::array<double, 6> x, Polarity y) {
  FusedFeature f;
  f.x = x;
  f.label = y;
  return f;
}

TEST(Join, ConcatenatesImageThenText) {
  const auto img = preds(Modality::Image, {{"a", {0.2, 0.3, 0.5}}});
  const auto text = preds(Modality::Text, {{"a", {0.1, 0.8, 0.1}}});
  const auto j = join_modalities(img, text, {{"a", Polarity::Neutral}});
  ASSERT_EQ(j.features.size(), 1u);
  EXPECT_EQ(j.features[0].x, (std::array<double, 6>{0.2, 0.3, 0.5, 0.1, 0.8, 0.1}));
  EXPECT_EQ(j.features[0].label, Polarity::Neutral);
}

TEST(Join, ReportsMissingIdsAndRejectsDisjointSets) {
  const auto img = preds(Modality::Image, {{"a", {1, 0, 0}}, {"b", {1, 0, 0}}, {"c", {1, 0, 0}},
                                           {"d", {1, 0, 0}}});
  const auto text = preds(Modality::Text, {{"c", {0, 1, 0}}, {"b", {0, 1, 0}}, {"a", {0, 1, 0}}});
  const auto j = join_modalities(img, text);
  EXPECT_EQ(j.features.size(), 3u);
  EXPECT_EQ(j.missing(), 1u);
  EXPECT_EQ(j.image_only, 1u);
  EXPECT_FALSE(j.features[0].label.has_value());

  const auto other = preds(Modality::Text, {{"z", {0, 1, 0}}});
  EXPECT_THROW(join_modalities(img, other), ContractError);
  auto dup = img;
  dup.rows.push_back(dup.rows.front());
  EXPECT_THROW(join_modalities(dup, text), ContractError);
}

TEST(Join, BlockOrderSurvivesTaggedRoundTrip) {
  // every image vector has its mass on class 0 and every text vector on class 2
  Rng rng(1);
  ModalityPredictions img{Modality::Image, {}}, text{Modality::Text, {}};
  for (int i = 0; i < 50; ++i) {
    const double a = uniform(rng, 0.5, 1.0);
    img.rows.emplace_back("id" + std::to_string(i), ClassVector({a, 1 - a, 0}));
    text.rows.emplace_back("id" + std::to_string(49 - i), ClassVector({0, 1 - a, a}));
  }
  const auto dir = testing::scratch_dir();
  write_predictions(dir / "img.jsonl", img);
  write_predictions(dir / "text.jsonl", text);
  const auto j = join_modalities(read_predictions(dir / "img.jsonl", Modality::Image),
                                 read_predictions(dir / "text.jsonl", Modality::Text));
  ASSERT_EQ(j.features.size(), 50u);
  for (const auto& f : j.features) {
    EXPECT_EQ(argmax_class(std::span<const double>(f.image_block())), Polarity::Negative);
    EXPECT_EQ(argmax_class(std::span<const double>(f.text_block())), Polarity::Positive);
  }
}

TEST(Files, ReadersNameTheBadLine) {
  const auto dir = testing::scratch_dir();
  testing::spit(dir / "p.jsonl", "{\"id\":\"a\",\"probs\":[1,0,0]}\n\n{\"id\":\"b\",\"probs\":[1,0]}\n");
  try {
    read_predictions(dir / "p.jsonl", Modality::Image);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("p.jsonl:3"), std::string::npos) << e.what();
  }
  testing::spit(dir / "g.jsonl", "{\"id\":\"a\",\"label\":3}\n");
  EXPECT_THROW(read_gold(dir / "g.jsonl"), FormatError);
  testing::spit(dir / "s.jsonl", "{\"id\":\"a\",\"split\":\"holdout\"}\n");
  EXPECT_THROW(read_splits(dir / "s.jsonl"), FormatError);
  testing::spit(dir / "bad.jsonl", "{\"id\":\"a\",\"probs\":[0.5,0.6,0]}\n");
  EXPECT_THROW(read_predictions(dir / "bad.jsonl", Modality::Text), FormatError);
  EXPECT_THROW(read_gold(dir / "missing.jsonl"), FormatError);
}

TEST(Partition, CountsUnassignedIds) {
  std::vector<FusedFeature> rows;
  for (const char* id : {"a", "b", "c", "d"}) {
    FusedFeature f = fused({1, 0, 0, 1, 0, 0}, Polarity::Negative);
    f.id = id;
    rows.push_back(f);
  }
  const auto p = partition(rows, {{"a", SplitName::Train}, {"b", SplitName::Valid}, {"c", SplitName::Test}});
  EXPECT_EQ(p.split.train.size(), 1u);
  EXPECT_EQ(p.split.valid.size(), 1u);
  EXPECT_EQ(p.split.test.size(), 1u);
  EXPECT_EQ(p.unassigned, 1u);
}

TEST(WeightedAverage, Examples) {
  const ClassVector img({0.2, 0.3, 0.5}), text({0.6, 0.1, 0.3});
  EXPECT_EQ(weighted_average_fuse(img, text, 1.0).probs(), img.probs());
  EXPECT_EQ(weighted_average_fuse(img, text, 0.0).probs(), text.probs());
  const auto mid = weighted_average_fuse(ClassVector({1, 0, 0}), ClassVector({0, 1, 0}), 0.5);
  EXPECT_EQ(mid.probs(), (std::array<double, 3>{0.5, 0.5, 0.0}));
  EXPECT_THROW(weighted_average_fuse(img, text, 1.01), ContractError);
  EXPECT_THROW(weighted_average_fuse(img, text, -0.01), ContractError);
}

TEST(WeightedAverage, ConvexCombinationIsValid) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto out = weighted_average_fuse(ClassVector(testing::random_probs(rng)),
                                           ClassVector(testing::random_probs(rng)), uniform01(rng));
    EXPECT_TRUE(is_valid_class_vector(out.probs()));
  }
}

double grid_accuracy(std::span<const FusedFeature> valid, double w) {
  std::size_t hits = 0;
  for (const auto& f : valid) {
    const auto p = weighted_average_fuse(ClassVector({f.x[0], f.x[1], f.x[2]}),
                                         ClassVector({f.x[3], f.x[4], f.x[5]}), w);
    hits += argmax_class(p) == *f.label;
  }
  return static_cast<double>(hits) / static_cast<double>(valid.size());
}

TEST(TuneWeight, PerfectImageRandomText) {
  Rng rng(3);
  std::vector<FusedFeature> valid;
  for (int i = 0; i < 300; ++i) {
    const auto y = polarity_from_int(i % 3);
    std::array<double, 6> x{};
    x[static_cast<std::size_t>(to_int(y))] = 0.6;
    for (std::size_t k = 0; k < 3; ++k) {
      if (k != static_cast<std::size_t>(to_int(y))) x[k] = 0.2;
    }
    const auto t = testing::random_probs(rng);
    std::copy(t.begin(), t.end(), x.begin() + 3);
    valid.push_back(fused(x, y));
  }
  const double w = tune_weight(valid);
  double best = -1.0, first = -1.0;
  for (int g = 0; g <= 100; ++g) {
    const double acc = grid_accuracy(valid, g / 100.0);
    if (acc > best) {
      best = acc;
      first = g / 100.0;
    }
  }
  EXPECT_EQ(grid_accuracy(valid, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(w, first);
  EXPECT_EQ(grid_accuracy(valid, w), 1.0);
}

TEST(TuneWeight, IdenticalModalitiesTieAtZero) {
  Rng rng(4);
  std::vector<FusedFeature> valid;
  for (int i = 0; i < 60; ++i) {
    const auto p = testing::random_probs(rng);
    valid.push_back(fused({p[0], p[1], p[2], p[0], p[1], p[2]}, polarity_from_int(i % 3)));
  }
  EXPECT_EQ(tune_weight(valid), 0.0);
  EXPECT_THROW(tune_weight({}), ContractError);
}

TEST(TuneWeight, ReturnsAGridArgmax) {
  const auto split = testing::small_split(5);
  const double w = tune_weight(split.valid);
  const double at_w = grid_accuracy(split.valid, w);
  for (int g = 0; g <= 100; ++g) EXPECT_GE(at_w, grid_accuracy(split.valid, g / 100.0));
}

TEST(Generator, LogitGapInvertsArgmaxAccuracy) {
  for (double acc : {0.4, 0.55, 0.7, 0.9, 0.99}) {
    EXPECT_NEAR(argmax_accuracy(logit_gap_for_accuracy(acc)), acc, 1e-9);
  }
  EXPECT_NEAR(argmax_accuracy(0.0), 1.0 / 3.0, 1e-9);
  // Monte Carlo check of the quadrature at mu = 1
  Rng rng(6);
  std::normal_distribution<double> n01;
  int hits = 0;
  const int trials = 200000;
  for (int i = 0; i < trials; ++i) {
    const double z0 = 1.0 + n01(rng), z1 = n01(rng), z2 = n01(rng);
    hits += z0 > z1 && z0 > z2;
  }
  EXPECT_NEAR(static_cast<double>(hits) / trials, argmax_accuracy(1.0), 0.005);
}

TEST(Generator, HitsTargetAccuracyAndIsDeterministic) {
  SynthConfig c;
  c.n_train = 6000;
  c.n_valid = 90;
  c.n_test = 90;
  c.seed = 17;
  const auto data = generate_synthetic(c);
  ASSERT_EQ(data.gold.size(), 6180u);
  std::size_t img_hits = 0, text_hits = 0, n = 0;
  std::array<std::size_t, 3> labels{};
  for (std::size_t i = 0; i < data.gold.size(); ++i) {
    if (data.splits[i].second != SplitName::Train) continue;
    const auto y = data.gold[i].second;
    ++n;
    ++labels[static_cast<std::size_t>(to_int(y))];
    img_hits += argmax_class(data.img.rows[i].second) == y;
    text_hits += argmax_class(data.text.rows[i].second) == y;
  }
  EXPECT_EQ(n, 6000u);
  for (auto l : labels) EXPECT_EQ(l, 2000u);
  const double ai = static_cast<double>(img_hits) / n;
  const double at = static_cast<double>(text_hits) / n;
  EXPECT_GE(ai, 0.68);
  EXPECT_LE(ai, 0.72);
  EXPECT_GE(at, 0.68);
  EXPECT_LE(at, 0.72);

  const auto d1 = testing::scratch_dir() / "a";
  const auto d2 = testing::scratch_dir() / "b";
  SynthConfig small;
  small.n_train = small.n_valid = small.n_test = 90;
  small.seed = 3;
  write_synthetic(generate_synthetic(small), d1);
  write_synthetic(generate_synthetic(small), d2);
  for (const char* f : {"img.jsonl", "text.jsonl", "gold.jsonl", "splits.jsonl"}) {
    EXPECT_EQ(testing::slurp(d1 / f), testing::slurp(d2 / f)) << f;
  }
}

TEST(Generator, PerfectModalityWithTightConcentration) {
  SynthConfig c;
  c.n_train = c.n_valid = c.n_test = 90;
  c.acc_img = 1.0;
  c.concentration = 20.0;
  const auto data = generate_synthetic(c);
  for (std::size_t i = 0; i < data.gold.size(); ++i) {
    EXPECT_EQ(argmax_class(data.img.rows[i].second), data.gold[i].second);
  }
}

TEST(Generator, ConfigValidation) {
  SynthConfig c;
  c.acc_img = 1.0 / 3.0;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.acc_text = 1.2;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.concentration = 0.0;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.n_valid = 89;
  EXPECT_THROW(c.validate(), ContractError);

  const auto j = to_json(SynthConfig{});
  EXPECT_EQ(to_json(synth_config_from_json(j)), j);
  EXPECT_THROW(synth_config_from_json({{"acc_image", 0.7}}), FormatError);
  EXPECT_EQ(synth_config_from_json({{"seed", 5}}).seed, 5u);
}

TEST(Generator, BayesOracleBeatsEachModality) {
  SynthConfig c;
  c.n_train = 3000;
  c.n_valid = c.n_test = 90;
  c.seed = 8;
  const auto data = generate_synthetic(c);
  GoldLabels gold(data.gold.begin(), data.gold.end());
  const auto j = join_modalities(data.img, data.text, gold);
  const BayesOracle oracle(c);
  std::size_t hits = 0;
  for (const auto& f : j.features) hits += oracle.predict(f) == *f.label;
  const double bayes = static_cast<double>(hits) / static_cast<double>(j.features.size());
  EXPECT_GT(bayes, block_accuracy(j.features, 0) + 0.05);
  EXPECT_GT(bayes, block_accuracy(j.features, 3) + 0.05);
}

TEST(FuseTrainEvaluate, PerfectModalitiesReachFullAccuracy) {
  SynthConfig c;
  c.n_train = c.n_valid = c.n_test = 120;
  c.acc_img = c.acc_text = 1.0;
  c.concentration = 5.0;
  const auto data = generate_synthetic(c);
  GoldLabels gold(data.gold.begin(), data.gold.end());
  SplitAssignment sp(data.splits.begin(), data.splits.end());
  const auto split = partition(join_modalities(data.img, data.text, gold).features, sp).split;
  const auto r = fuse_train_evaluate(split, {4, {}}, 1, {.threads = 1});
  EXPECT_EQ(r.report.test_accuracy.selected, 1.0);
  EXPECT_EQ(r.report.test_accuracy.image_only, 1.0);
}

TEST(FuseTrainEvaluate, ReportIsConsistentAndDeterministic) {
  const auto split = testing::small_split(11);
  const auto a = fuse_train_evaluate(split, {5, {}}, 2, {.threads = 1});
  const auto b = fuse_train_evaluate(split, {5, {}}, 2, {.threads = 2});
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());

  const auto& r = a.report;
  EXPECT_EQ(r.test_accuracy.image_only, block_accuracy(split.test, 0));
  EXPECT_EQ(r.test_accuracy.text_only, block_accuracy(split.test, 3));
  EXPECT_EQ(r.n_test, split.test.size());
  const auto& best = automl::select_best(a.leaderboard);
  EXPECT_EQ(r.selected_index, best.index);
  EXPECT_EQ(r.selected_objective, best.objective);
  std::vector<Polarity> pred;
  for (const auto& f : split.test) pred.push_back(automl::predict(a.model, f.x));
  EXPECT_EQ(accuracy(pred, labels_of(split.test)), r.test_accuracy.selected);
  const auto& cm = r.confusion.at("selected");
  EXPECT_EQ(static_cast<double>(cm.trace()) / static_cast<double>(cm.total()), r.test_accuracy.selected);

  const auto doc = to_json(r);
  for (const char* k : {"selected", "image_only", "text_only", "weighted_avg", "svm"}) {
    EXPECT_TRUE(doc["test_accuracy"].contains(k)) << k;
  }
  EXPECT_TRUE(doc.contains("w_star"));
  EXPECT_TRUE(doc["selected_trial"].contains("hyperparams"));
}

TEST(FuseTrainEvaluate, OneHotAblationUsesHardLabels) {
  const auto split = testing::small_split(12);
  const auto r = fuse_train_evaluate(split, {3, {}}, 2, {.threads = 1, .one_hot = true});
  EXPECT_TRUE(r.report.one_hot);
  EXPECT_EQ(to_json(r.report)["input_encoding"], "one_hot");
  for (const auto& f : to_one_hot(split.test)) {
    for (double v : f.x) EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
}

TEST(FuseTrainEvaluate, FusedValidationBeatsEachModalityOnBundledData) {
  const auto split = testing::bundled_split();
  const auto r = fuse_train_evaluate(split, {6, {}}, 0, {.threads = 0});
  EXPECT_GE(r.report.selected_objective, block_accuracy(split.valid, 0));
  EXPECT_GE(r.report.selected_objective, block_accuracy(split.valid, 3));
}

}  // namespace
}  // namespace latefuse::fusion
