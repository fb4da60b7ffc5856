#include "latefuse/models/model.hpp"

#include <cmath>
#include <string>

namespace latefuse::models {

namespace {

using nlohmann::json;

constexpr std::size_t K = kNumClasses;

[[noreturn]] void bad(const std::string& what) { throw FormatError("model artifact: " + what); }

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) bad(std::string("expected an object holding '") + key + "'");
  const auto it = obj.find(key);
  if (it == obj.end()) bad(std::string("missing field '") + key + "'");
  return *it;
}

std::vector<double> doubles(const json& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) bad(std::string(what) + " must hold numbers");
    const double d = v.get<double>();
    if (!std::isfinite(d)) bad(std::string(what) + " holds a non-finite value");
    out.push_back(d);
  }
  return out;
}

std::vector<int> ints(const json& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array");
  std::vector<int> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer()) bad(std::string(what) + " must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

std::size_t count(const json& j, const char* what) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    bad(std::string(what) + " must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

json linear_to_json(const LinearModel& m) {
  return {{"weights", m.weights}, {"bias", m.bias}};
}

LinearModel linear_from_json(const json& j, std::size_t d) {
  LinearModel m(d);
  m.weights = doubles(field(j, "weights"), "weights");
  m.bias = doubles(field(j, "bias"), "bias");
  if (m.weights.size() != K * d || m.bias.size() != K) bad("linear weights have the wrong shape");
  return m;
}

json boost_to_json(const BoostModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  return {{"init_scores", m.init_scores}, {"shrinkage", m.shrinkage}, {"trees", trees}};
}

BoostModel boost_from_json(const json& j, std::size_t d) {
  BoostModel m;
  m.init_scores = doubles(field(j, "init_scores"), "init_scores");
  if (m.init_scores.size() != K) bad("init_scores must have 3 entries");
  const auto& s = field(j, "shrinkage");
  if (!s.is_number()) bad("shrinkage must be a number");
  m.shrinkage = s.get<double>();
  const auto& trees = field(j, "trees");
  if (!trees.is_array() || trees.size() % K != 0) bad("boosting trees must come in groups of 3");
  for (const auto& t : trees) m.trees.push_back(tree_from_json(t, d, 1));
  return m;
}

json mlp_to_json(const MlpModel& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
  }
  return {{"activation", m.activation == Activation::ReLU ? "relu" : "tanh"}, {"layers", layers}};
}

MlpModel mlp_from_json(const json& j, std::size_t d) {
  MlpModel m;
  const auto& act = field(j, "activation");
  if (act == "relu") {
    m.activation = Activation::ReLU;
  } else if (act == "tanh") {
    m.activation = Activation::Tanh;
  } else {
    bad("unknown activation");
  }
  const auto& layers = field(j, "layers");
  if (!layers.is_array() || layers.empty()) bad("MLP needs at least one layer");
  std::size_t expect_in = d;
  for (const auto& lj : layers) {
    DenseLayer l;
    l.in = count(field(lj, "in"), "in");
    l.out = count(field(lj, "out"), "out");
    l.weights = doubles(field(lj, "weights"), "weights");
    l.bias = doubles(field(lj, "bias"), "bias");
    if (l.in != expect_in || l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      bad("MLP layer shapes are inconsistent");
    }
    expect_in = l.out;
    m.layers.push_back(std::move(l));
  }
  if (expect_in != K) bad("MLP output layer must have 3 units");
  return m;
}

std::array<double, 3> normalized(std::array<double, 3> p) {
  double total = 0.0;
  for (double& v : p) {
    v = std::max(v, 0.0);
    total += v;
  }
  if (!(total > 0.0) || !std::isfinite(total)) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  for (double& v : p) v /= total;
  return p;
}

}  // namespace

json tree_to_json(const Tree& tree) {
  json feature = json::array();
  json threshold = json::array();
  json left = json::array();
  json right = json::array();
  json value = json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
          {"value", value}};
}

Tree tree_from_json(const json& j, std::size_t n_features, std::size_t value_size) {
  const auto feature = ints(field(j, "feature"), "feature");
  const auto threshold = doubles(field(j, "threshold"), "threshold");
  const auto left = ints(field(j, "left"), "left");
  const auto right = ints(field(j, "right"), "right");
  const auto& value = field(j, "value");
  const std::size_t n = feature.size();
  if (n == 0) bad("tree has no nodes");
  if (threshold.size() != n || left.size() != n || right.size() != n || !value.is_array() ||
      value.size() != n) {
    bad("tree columns differ in length");
  }
  Tree tree;
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = tree.nodes[i];
    node.feature = feature[i];
    node.threshold = threshold[i];
    node.left = left[i];
    node.right = right[i];
    node.value = doubles(value[i], "value");
    const auto self = static_cast<int>(i);
    if (node.left < 0) {
      if (node.right >= 0 || node.value.size() != value_size) bad("malformed tree leaf");
    } else {
      // Children always follow their parent, which also rules out cycles.
      if (node.left <= self || node.right <= self || node.left >= static_cast<int>(n) ||
          node.right >= static_cast<int>(n) || node.feature < 0 ||
          node.feature >= static_cast<int>(n_features) || !node.value.empty()) {
        bad("malformed tree split node");
      }
    }
  }
  return tree;
}

void check_schema_version(const json& doc) {
  const auto& v = field(doc, "schema_version");
  if (!v.is_number_integer()) bad("schema_version must be an integer");
  if (v.get<int>() != kModelSchemaVersion) {
    throw SchemaVersionError("unsupported schema_version " + std::to_string(v.get<int>()) +
                             " (this build reads " + std::to_string(kModelSchemaVersion) + ")");
  }
}

TrainedModel::TrainedModel(ModelSpec spec, std::size_t n_features, FittedParams params,
                           std::vector<double> loss_trace)
    : spec_(std::move(spec)),
      n_features_(n_features),
      params_(std::move(params)),
      loss_trace_(std::move(loss_trace)) {}

std::array<double, 3> TrainedModel::raw_proba(std::span<const double> x) const {
  switch (spec_.family) {
    case Family::CART: {
      const auto& v = std::get<CartModel>(params_).tree.leaf_value(x);
      return {v[0], v[1], v[2]};
    }
    case Family::RandomForest:
    case Family::ExtraTrees:
      return forest_proba(std::get<ForestModel>(params_), x);
    case Family::GLM:
    case Family::LinearSVM:
      // SVM margins pass through softmax; the argmax is unchanged.
      return softmax(std::get<LinearModel>(params_).scores(x));
    case Family::GBM_FirstOrder:
    case Family::GBM_SecondOrder:
      return softmax(boost_scores(std::get<BoostModel>(params_), x));
    case Family::MLP:
      return softmax(mlp_scores(std::get<MlpModel>(params_), x));
  }
  throw ContractError("unknown model family");
}

ClassVector TrainedModel::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw ContractError("expected " + std::to_string(n_features_) + " features, got " +
                        std::to_string(x.size()));
  }
  return ClassVector(normalized(raw_proba(x)));
}

std::vector<ClassVector> TrainedModel::predict_proba(const Dataset& data) const {
  if (data.n_features != n_features_) throw ContractError("dataset width does not match model");
  std::vector<ClassVector> out;
  out.reserve(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) out.push_back(predict_proba(data.row(i)));
  return out;
}

std::vector<Polarity> TrainedModel::predict(const Dataset& data) const {
  std::vector<Polarity> out;
  out.reserve(data.rows());
  for (const auto& p : predict_proba(data)) out.push_back(argmax_class(p));
  return out;
}

TrainedModel fit(const ModelSpec& spec, const Dataset& train, int threads) {
  validate(spec);
  if (train.rows() == 0) throw ContractError("cannot fit on an empty training set");
  if (train.n_features == 0) throw ContractError("training set has no features");
  const std::size_t d = train.n_features;
  std::vector<double> trace;
  switch (spec.family) {
    case Family::CART:
      return {spec, d, CartModel{fit_cart(train, std::get<CartParams>(spec.hyperparams))}};
    case Family::RandomForest:
    case Family::ExtraTrees:
      return {spec, d,
              fit_forest(train, std::get<ForestParams>(spec.hyperparams),
                         spec.family == Family::ExtraTrees, spec.seed, threads)};
    case Family::GLM: {
      auto m = fit_glm(train, std::get<GlmParams>(spec.hyperparams), spec.seed, &trace);
      return {spec, d, std::move(m), std::move(trace)};
    }
    case Family::LinearSVM: {
      auto m = fit_svm(train, std::get<SvmParams>(spec.hyperparams), spec.seed, &trace);
      return {spec, d, std::move(m), std::move(trace)};
    }
    case Family::GBM_FirstOrder:
    case Family::GBM_SecondOrder: {
      const auto solver =
          spec.family == Family::GBM_FirstOrder ? LeafSolver::FirstOrder : LeafSolver::SecondOrder;
      auto m = fit_boosting(train, std::get<GbmParams>(spec.hyperparams), solver, spec.seed, &trace);
      return {spec, d, std::move(m), std::move(trace)};
    }
    case Family::MLP: {
      auto m = fit_mlp(train, std::get<MlpParams>(spec.hyperparams), spec.seed, &trace);
      return {spec, d, std::move(m), std::move(trace)};
    }
  }
  throw ContractError("unknown model family");
}

TrainedModel fit(const ModelSpec& spec, std::span<const FusedFeature> train, int threads) {
  return fit(spec, to_dataset(train), threads);
}

json to_json(const TrainedModel& model) {
  json params = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CartModel>) {
          return {{"tree", tree_to_json(p.tree)}};
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          json trees = json::array();
          for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
          return {{"trees", trees}};
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          return linear_to_json(p);
        } else if constexpr (std::is_same_v<T, BoostModel>) {
          return boost_to_json(p);
        } else {
          return mlp_to_json(p);
        }
      },
      model.params());
  return {
      {"schema_version", kModelSchemaVersion},
      {"family", std::string(family_name(model.family()))},
      {"hyperparams", hyperparams_to_json(model.spec())},
      {"seed", model.spec().seed},
      {"n_features", model.n_features()},
      {"params", params},
      {"train_meta", {{"loss_trace", model.loss_trace()}}},
  };
}

TrainedModel model_from_json(const json& doc) {
  check_schema_version(doc);
  const auto& fam = field(doc, "family");
  if (!fam.is_string()) bad("family must be a string");
  Family family;
  try {
    family = family_from_name(fam.get<std::string>());
  } catch (const ContractError& e) {
    bad(e.what());
  }
  const auto& seed_j = field(doc, "seed");
  if (!seed_j.is_number_unsigned() && !seed_j.is_number_integer()) bad("seed must be an integer");
  ModelSpec spec;
  try {
    spec = spec_from_json(family, field(doc, "hyperparams"), seed_j.get<std::uint64_t>());
  } catch (const ContractError& e) {
    bad(e.what());
  }
  const std::size_t d = count(field(doc, "n_features"), "n_features");
  if (d == 0) bad("n_features must be positive");
  const auto& p = field(doc, "params");
  std::vector<double> trace;
  if (doc.contains("train_meta")) trace = doubles(field(doc["train_meta"], "loss_trace"), "loss_trace");

  switch (family) {
    case Family::CART:
      return {spec, d, CartModel{tree_from_json(field(p, "tree"), d, K)}, std::move(trace)};
    case Family::RandomForest:
    case Family::ExtraTrees: {
      const auto& trees = field(p, "trees");
      if (!trees.is_array() || trees.empty()) bad("forest needs at least one tree");
      ForestModel f;
      for (const auto& t : trees) f.trees.push_back(tree_from_json(t, d, K));
      return {spec, d, std::move(f), std::move(trace)};
    }
    case Family::GLM:
    case Family::LinearSVM:
      return {spec, d, linear_from_json(p, d), std::move(trace)};
    case Family::GBM_FirstOrder:
    case Family::GBM_SecondOrder:
      return {spec, d, boost_from_json(p, d), std::move(trace)};
    case Family::MLP:
      return {spec, d, mlp_from_json(p, d), std::move(trace)};
  }
  bad("unknown family");
}

std::string serialize(const TrainedModel& model) { return to_json(model).dump(); }

TrainedModel deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model artifact is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model artifact: ") + e.what());
  }
}

}  // namespace latefuse::models
