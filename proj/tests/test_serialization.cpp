#include <gtest/gtest.h>

#include <cstring>

#include "latefuse/automl.hpp"
#include "latefuse/models/model.hpp"
#include "test_util.hpp"

namespace latefuse::models {
namespace {

bool bit_identical(const ClassVector& a, const ClassVector& b) {
  return std::memcmp(a.probs().data(), b.probs().data(), sizeof(double) * 3) == 0;
}

std::vector<ModelSpec> specs() {
  return {
      {Family::CART, CartParams{6, 1}, 1},
      {Family::RandomForest, ForestParams{10, 6, FeatureSubsample::Sqrt, true}, 2},
      {Family::ExtraTrees, ForestParams{10, 6, FeatureSubsample::All, false}, 3},
      {Family::GLM, GlmParams{1e-3, 0.5, 20, 0.1}, 4},
      {Family::GBM_FirstOrder, GbmParams{20, 0.1, 3, 0.7, 0.0}, 5},
      {Family::GBM_SecondOrder, GbmParams{20, 0.2, 4, 1.0, 2.0}, 6},
      {Family::MLP, MlpParams{2, 16, Activation::ReLU, 0.05, 10}, 7},
      {Family::LinearSVM, SvmParams{1e-3, 20, 0.05}, 8},
  };
}

TEST(Serialization, EveryFamilyRoundTripsBitIdentically) {
  const Dataset train = to_dataset(testing::small_split(31).train);
  Rng rng(32);
  for (const auto& spec : specs()) {
    const auto m = fit(spec, train);
    const std::string text = serialize(m);
    const auto back = deserialize(text);
    EXPECT_EQ(serialize(back), text) << family_name(spec.family);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x = i % 2 == 0 ? testing::random_fused_x(rng) : std::vector<double>(6);
      if (i % 2 == 1) {
        for (auto& v : x) v = uniform(rng, -1, 2);
      }
      EXPECT_TRUE(bit_identical(m.predict_proba(x), back.predict_proba(x)))
          << family_name(spec.family) << " input " << i;
    }
  }
}

TEST(Serialization, DocumentLayout) {
  const Dataset train = to_dataset(testing::small_split(33).train);
  const auto doc = to_json(fit({Family::GLM, GlmParams{}, 11}, train));
  EXPECT_EQ(doc["schema_version"], 1);
  EXPECT_EQ(doc["family"], "GLM");
  EXPECT_EQ(doc["seed"], 11);
  EXPECT_TRUE(doc["hyperparams"].is_object());
  EXPECT_TRUE(doc["params"].is_object());
  EXPECT_EQ(doc["train_meta"]["loss_trace"].size(), 50u);
}

TEST(Serialization, ForeignVersionIsRejected) {
  const Dataset train = to_dataset(testing::small_split(34).train);
  auto doc = to_json(fit({Family::CART, CartParams{}, 0}, train));
  doc["schema_version"] = 2;
  EXPECT_THROW(deserialize(doc.dump()), SchemaVersionError);
  doc["schema_version"] = "1";
  EXPECT_THROW(deserialize(doc.dump()), FormatError);
}

TEST(Serialization, TruncatedAndMalformedDocumentsAreRejected) {
  const Dataset train = to_dataset(testing::small_split(35).train);
  for (const auto& spec : specs()) {
    const std::string text = serialize(fit(spec, train));
    for (std::size_t cut : {std::size_t{0}, text.size() / 3, text.size() - 1}) {
      EXPECT_THROW(deserialize(text.substr(0, cut)), FormatError) << family_name(spec.family);
    }
  }
  auto doc = to_json(fit({Family::CART, CartParams{}, 0}, train));
  auto bad_child = doc;
  bad_child["params"]["tree"]["left"][0] = 0;
  EXPECT_THROW(model_from_json(bad_child), FormatError);
  auto bad_family = doc;
  bad_family["family"] = "Perceptron";
  EXPECT_THROW(model_from_json(bad_family), FormatError);
  auto bad_hp = doc;
  bad_hp["hyperparams"]["max_depth"] = 99;
  EXPECT_THROW(model_from_json(bad_hp), FormatError);

  auto mlp = to_json(fit({Family::MLP, MlpParams{}, 1}, train));
  mlp["params"]["layers"][0]["weights"].erase(0);
  EXPECT_THROW(model_from_json(mlp), FormatError);
}

TEST(Serialization, StackedEnsembleRoundTrips) {
  const auto split = testing::small_split(36);
  const Dataset train = to_dataset(split.train);
  std::vector<TrainedModel> bases;
  for (const auto& spec : {ModelSpec{Family::GLM, GlmParams{}, 1},
                           ModelSpec{Family::CART, CartParams{4, 5}, 2}}) {
    bases.push_back(fit(spec, train));
  }
  const automl::FusionModel ens =
      automl::build_stacked_ensemble(bases, train, automl::EnsembleKind::AllModels, 3, 1);
  const std::string text = automl::serialize(ens);
  const auto back = automl::deserialize_fusion_model(text);
  EXPECT_EQ(automl::serialize(back), text);
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    const auto x = testing::random_fused_x(rng);
    EXPECT_TRUE(bit_identical(automl::predict_proba(ens, x), automl::predict_proba(back, x)));
  }
  auto doc = nlohmann::json::parse(text);
  doc["schema_version"] = 7;
  EXPECT_THROW(automl::fusion_model_from_json(doc), SchemaVersionError);
}

}  // namespace
}  // namespace latefuse::models
