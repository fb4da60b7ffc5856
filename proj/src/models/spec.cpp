#include "latefuse/models/spec.hpp"

#include <cmath>
#include <set>
#include <string>

#include "latefuse/core.hpp"

namespace latefuse::models {

namespace {

struct FamilyName {
  Family family;
  std::string_view name;
};

constexpr FamilyName kFamilyNames[] = {
    {Family::CART, "CART"},
    {Family::RandomForest, "RandomForest"},
    {Family::ExtraTrees, "ExtraTrees"},
    {Family::GLM, "GLM"},
    {Family::GBM_FirstOrder, "GBM_FirstOrder"},
    {Family::GBM_SecondOrder, "GBM_SecondOrder"},
    {Family::MLP, "MLP"},
    {Family::LinearSVM, "LinearSVM"},
};

void check_range(std::string_view key, double v, const ParamRange& r) {
  if (!std::isfinite(v) || v < r.lo || v > r.hi) {
    throw ContractError("hyperparameter " + std::string(key) + " = " + std::to_string(v) +
                        " outside [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  }
}

template <typename T>
const T& params_as(const ModelSpec& spec) {
  const T* p = std::get_if<T>(&spec.hyperparams);
  if (!p) {
    throw ContractError("hyperparameters do not match family " +
                        std::string(family_name(spec.family)));
  }
  return *p;
}

std::string_view subsample_name(FeatureSubsample s) {
  switch (s) {
    case FeatureSubsample::Sqrt:
      return "sqrt";
    case FeatureSubsample::Half:
      return "0.5";
    case FeatureSubsample::All:
      return "1.0";
  }
  return "sqrt";
}

// Reads hyperparameter documents key by key and rejects leftovers.
class Reader {
 public:
  explicit Reader(const nlohmann::json& j) : j_(j) {
    if (!j.is_object()) throw FormatError("hyperparams must be a JSON object");
  }

  const nlohmann::json& at(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) throw FormatError("missing hyperparameter '" + key + "'");
    used_.insert(key);
    return *it;
  }
  int integer(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw FormatError("hyperparameter '" + key + "' must be an integer");
    return v.get<int>();
  }
  double real(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_number()) throw FormatError("hyperparameter '" + key + "' must be a number");
    return v.get<double>();
  }
  std::string text(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_string()) throw FormatError("hyperparameter '" + key + "' must be a string");
    return v.get<std::string>();
  }
  bool boolean(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_boolean()) throw FormatError("hyperparameter '" + key + "' must be a boolean");
    return v.get<bool>();
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw ContractError("unknown hyperparameter '" + k + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::set<std::string> used_;
};

}  // namespace

std::string_view family_name(Family f) {
  for (const auto& e : kFamilyNames) {
    if (e.family == f) return e.name;
  }
  return "?";
}

Family family_from_name(std::string_view name) {
  for (const auto& e : kFamilyNames) {
    if (e.name == name) return e.family;
  }
  throw FormatError("unknown model family '" + std::string(name) + "'");
}

ModelSpec default_spec(Family family, std::uint64_t seed) {
  ModelSpec s;
  s.family = family;
  s.seed = seed;
  switch (family) {
    case Family::CART:
      s.hyperparams = CartParams{};
      break;
    case Family::RandomForest:
      s.hyperparams = ForestParams{};
      break;
    case Family::ExtraTrees:
      s.hyperparams = ForestParams{.bootstrap = false};
      break;
    case Family::GLM:
      s.hyperparams = GlmParams{};
      break;
    case Family::GBM_FirstOrder:
      s.hyperparams = GbmParams{};
      break;
    case Family::GBM_SecondOrder:
      s.hyperparams = GbmParams{.lambda = 1.0};
      break;
    case Family::MLP:
      s.hyperparams = MlpParams{};
      break;
    case Family::LinearSVM:
      s.hyperparams = SvmParams{};
      break;
  }
  return s;
}

void validate(const ModelSpec& spec) {
  using namespace ranges;
  switch (spec.family) {
    case Family::CART: {
      const auto& p = params_as<CartParams>(spec);
      check_range("max_depth", p.max_depth, kCartDepth);
      check_range("min_samples_leaf", p.min_samples_leaf, kCartMinLeaf);
      break;
    }
    case Family::RandomForest:
    case Family::ExtraTrees: {
      const auto& p = params_as<ForestParams>(spec);
      check_range("n_trees", p.n_trees, kForestTrees);
      check_range("max_depth", p.max_depth, kForestDepth);
      break;
    }
    case Family::GLM: {
      const auto& p = params_as<GlmParams>(spec);
      check_range("lambda", p.lambda, kGlmLambda);
      check_range("alpha", p.alpha, kGlmAlpha);
      check_range("epochs", p.epochs, kGlmEpochs);
      check_range("learning_rate", p.learning_rate, kGlmLearningRate);
      break;
    }
    case Family::GBM_FirstOrder:
    case Family::GBM_SecondOrder: {
      const auto& p = params_as<GbmParams>(spec);
      check_range("n_rounds", p.n_rounds, kGbmRounds);
      check_range("learning_rate", p.learning_rate, kGbmLearningRate);
      check_range("max_depth", p.max_depth, kGbmDepth);
      check_range("subsample", p.subsample, kGbmSubsample);
      if (spec.family == Family::GBM_SecondOrder) {
        check_range("lambda", p.lambda, kGbmLambda);
      } else if (p.lambda != 0.0) {
        throw ContractError("first-order boosting takes no lambda");
      }
      break;
    }
    case Family::MLP: {
      const auto& p = params_as<MlpParams>(spec);
      check_range("hidden_layers", p.hidden_layers, kMlpLayers);
      if (std::find(kMlpWidths.begin(), kMlpWidths.end(), p.width) == kMlpWidths.end()) {
        throw ContractError("MLP width must be one of 8, 16, 32");
      }
      check_range("learning_rate", p.learning_rate, kMlpLearningRate);
      check_range("epochs", p.epochs, kMlpEpochs);
      break;
    }
    case Family::LinearSVM: {
      const auto& p = params_as<SvmParams>(spec);
      check_range("lambda", p.lambda, kSvmLambda);
      check_range("epochs", p.epochs, kSvmEpochs);
      check_range("learning_rate", p.learning_rate, kSvmLearningRate);
      break;
    }
  }
}

nlohmann::json hyperparams_to_json(const ModelSpec& spec) {
  nlohmann::json j = nlohmann::json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CartParams>) {
          j["max_depth"] = p.max_depth;
          j["min_samples_leaf"] = p.min_samples_leaf;
          j["criterion"] = "gini";
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          j["n_trees"] = p.n_trees;
          j["max_depth"] = p.max_depth;
          j["feature_subsample"] = subsample_name(p.feature_subsample);
          j["bootstrap"] = p.bootstrap;
        } else if constexpr (std::is_same_v<T, GlmParams>) {
          j["lambda"] = p.lambda;
          j["alpha"] = p.alpha;
          j["epochs"] = p.epochs;
          j["learning_rate"] = p.learning_rate;
        } else if constexpr (std::is_same_v<T, GbmParams>) {
          j["n_rounds"] = p.n_rounds;
          j["learning_rate"] = p.learning_rate;
          j["max_depth"] = p.max_depth;
          j["subsample"] = p.subsample;
          if (spec.family == Family::GBM_SecondOrder) j["lambda"] = p.lambda;
        } else if constexpr (std::is_same_v<T, MlpParams>) {
          j["hidden_layers"] = p.hidden_layers;
          j["width"] = p.width;
          j["activation"] = p.activation == Activation::ReLU ? "relu" : "tanh";
          j["learning_rate"] = p.learning_rate;
          j["epochs"] = p.epochs;
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          j["lambda"] = p.lambda;
          j["epochs"] = p.epochs;
          j["learning_rate"] = p.learning_rate;
        }
      },
      spec.hyperparams);
  return j;
}

ModelSpec spec_from_json(Family family, const nlohmann::json& hyperparams, std::uint64_t seed) {
  Reader r(hyperparams);
  ModelSpec spec;
  spec.family = family;
  spec.seed = seed;
  switch (family) {
    case Family::CART: {
      CartParams p;
      p.max_depth = r.integer("max_depth");
      p.min_samples_leaf = r.integer("min_samples_leaf");
      if (r.text("criterion") != "gini") throw ContractError("CART criterion must be gini");
      spec.hyperparams = p;
      break;
    }
    case Family::RandomForest:
    case Family::ExtraTrees: {
      ForestParams p;
      p.n_trees = r.integer("n_trees");
      p.max_depth = r.integer("max_depth");
      const auto fs = r.text("feature_subsample");
      if (fs == "sqrt") {
        p.feature_subsample = FeatureSubsample::Sqrt;
      } else if (fs == "0.5") {
        p.feature_subsample = FeatureSubsample::Half;
      } else if (fs == "1.0") {
        p.feature_subsample = FeatureSubsample::All;
      } else {
        throw ContractError("feature_subsample must be sqrt, 0.5 or 1.0");
      }
      p.bootstrap = r.boolean("bootstrap");
      spec.hyperparams = p;
      break;
    }
    case Family::GLM: {
      GlmParams p;
      p.lambda = r.real("lambda");
      p.alpha = r.real("alpha");
      p.epochs = r.integer("epochs");
      p.learning_rate = r.real("learning_rate");
      spec.hyperparams = p;
      break;
    }
    case Family::GBM_FirstOrder:
    case Family::GBM_SecondOrder: {
      GbmParams p;
      p.n_rounds = r.integer("n_rounds");
      p.learning_rate = r.real("learning_rate");
      p.max_depth = r.integer("max_depth");
      p.subsample = r.real("subsample");
      if (family == Family::GBM_SecondOrder) p.lambda = r.real("lambda");
      spec.hyperparams = p;
      break;
    }
    case Family::MLP: {
      MlpParams p;
      p.hidden_layers = r.integer("hidden_layers");
      p.width = r.integer("width");
      const auto act = r.text("activation");
      if (act == "relu") {
        p.activation = Activation::ReLU;
      } else if (act == "tanh") {
        p.activation = Activation::Tanh;
      } else {
        throw ContractError("activation must be relu or tanh");
      }
      p.learning_rate = r.real("learning_rate");
      p.epochs = r.integer("epochs");
      spec.hyperparams = p;
      break;
    }
    case Family::LinearSVM: {
      SvmParams p;
      p.lambda = r.real("lambda");
      p.epochs = r.integer("epochs");
      p.learning_rate = r.real("learning_rate");
      spec.hyperparams = p;
      break;
    }
  }
  r.finish();
  validate(spec);
  return spec;
}

}  // namespace latefuse::models
