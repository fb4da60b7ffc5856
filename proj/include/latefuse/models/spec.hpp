#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace latefuse::models {

enum class Family {
  CART,
  RandomForest,
  ExtraTrees,
  GLM,
  GBM_FirstOrder,
  GBM_SecondOrder,
  MLP,
  LinearSVM,
};

std::string_view family_name(Family f);
Family family_from_name(std::string_view name);

/// The random-search space. CART is a building block and LinearSVM a
/// baseline; neither is searched.
inline constexpr std::array<Family, 6> kSearchableFamilies = {
    Family::RandomForest, Family::ExtraTrees,      Family::GLM,
    Family::GBM_FirstOrder, Family::GBM_SecondOrder, Family::MLP,
};

enum class FeatureSubsample { Sqrt, Half, All };
enum class Activation { ReLU, Tanh };

struct CartParams {
  int max_depth = 6;
  int min_samples_leaf = 1;  // split criterion is always Gini
};

struct ForestParams {
  int n_trees = 50;
  int max_depth = 8;
  FeatureSubsample feature_subsample = FeatureSubsample::Sqrt;
  bool bootstrap = true;
};

/// Multinomial logistic regression with elastic-net penalty
/// lambda * (alpha * |W|_1 + (1 - alpha) / 2 * |W|_2^2); biases unpenalized.
struct GlmParams {
  double lambda = 1e-3;
  double alpha = 0.0;
  int epochs = 50;
  double learning_rate = 0.1;
};

/// Shared by both boosting variants; lambda only applies to second order.
struct GbmParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double subsample = 1.0;
  double lambda = 0.0;
};

struct MlpParams {
  int hidden_layers = 1;
  int width = 16;
  Activation activation = Activation::ReLU;
  double learning_rate = 0.05;
  int epochs = 20;
};

/// One-vs-rest hinge loss with (lambda / 2) |W|^2.
struct SvmParams {
  double lambda = 1e-3;
  int epochs = 50;
  double learning_rate = 0.05;
};

using Hyperparams =
    std::variant<CartParams, ForestParams, GlmParams, GbmParams, MlpParams, SvmParams>;

/// An architecture: family plus hyperparameters plus the seed every
/// stochastic choice of the fit derives from.
struct ModelSpec {
  Family family = Family::CART;
  Hyperparams hyperparams = CartParams{};
  std::uint64_t seed = 0;
};

ModelSpec default_spec(Family family, std::uint64_t seed = 0);

/// A numeric hyperparameter's accepted interval and the (narrower) interval
/// random search draws from.
struct ParamRange {
  double lo;
  double hi;
  double search_lo;
  double search_hi;
  bool log_scale = false;
};

namespace ranges {
inline constexpr ParamRange kCartDepth{1, 12, 1, 12};
inline constexpr ParamRange kCartMinLeaf{1, 20, 1, 20};
inline constexpr ParamRange kForestTrees{1, 200, 10, 200};
inline constexpr ParamRange kForestDepth{1, 20, 1, 12};
inline constexpr ParamRange kGlmLambda{0.0, 10, 1e-4, 10, true};
inline constexpr ParamRange kGlmAlpha{0, 1, 0, 1};
inline constexpr ParamRange kGlmEpochs{1, 1000, 10, 100};
inline constexpr ParamRange kGlmLearningRate{1e-6, 10, 1e-2, 1, true};
inline constexpr ParamRange kGbmRounds{1, 1000, 10, 300};
inline constexpr ParamRange kGbmLearningRate{0, 1, 0.01, 0.3, true};
inline constexpr ParamRange kGbmDepth{1, 12, 1, 6};
inline constexpr ParamRange kGbmSubsample{0.01, 1, 0.5, 1};
inline constexpr ParamRange kGbmLambda{0, 100, 0, 10};
inline constexpr ParamRange kMlpLayers{1, 2, 1, 2};
inline constexpr std::array<int, 3> kMlpWidths = {8, 16, 32};
inline constexpr ParamRange kMlpLearningRate{1e-6, 10, 1e-3, 0.3, true};
inline constexpr ParamRange kMlpEpochs{1, 1000, 5, 30};
inline constexpr ParamRange kSvmLambda{1e-8, 1e4, 1e-6, 1, true};
inline constexpr ParamRange kSvmEpochs{1, 1000, 10, 100};
inline constexpr ParamRange kSvmLearningRate{1e-6, 10, 1e-3, 0.3, true};
}  // namespace ranges

/// Throws ContractError when the hyperparameter variant does not belong to
/// the family or a value is outside its accepted range.
void validate(const ModelSpec& spec);

nlohmann::json hyperparams_to_json(const ModelSpec& spec);
/// Unknown keys, missing keys and out-of-range values are errors.
ModelSpec spec_from_json(Family family, const nlohmann::json& hyperparams, std::uint64_t seed);

}  // namespace latefuse::models
