#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "latefuse/core.hpp"
#include "latefuse/models/boosting.hpp"
#include "latefuse/models/forest.hpp"
#include "latefuse/models/linear.hpp"
#include "latefuse/models/mlp.hpp"
#include "latefuse/models/spec.hpp"
#include "latefuse/models/tree.hpp"

namespace latefuse::models {

inline constexpr int kModelSchemaVersion = 1;

struct CartModel {
  Tree tree;
  bool operator==(const CartModel&) const = default;
};

using FittedParams = std::variant<CartModel, ForestModel, LinearModel, BoostModel, MlpModel>;

/// A fitted architecture. Immutable once built; predict_proba is pure.
class TrainedModel {
 public:
  TrainedModel(ModelSpec spec, std::size_t n_features, FittedParams params,
               std::vector<double> loss_trace = {});

  const ModelSpec& spec() const { return spec_; }
  Family family() const { return spec_.family; }
  std::size_t n_features() const { return n_features_; }
  const FittedParams& params() const { return params_; }
  const std::vector<double>& loss_trace() const { return loss_trace_; }

  /// Throws ContractError when x has the wrong length.
  ClassVector predict_proba(std::span<const double> x) const;
  Polarity predict(std::span<const double> x) const { return argmax_class(predict_proba(x)); }

  std::vector<ClassVector> predict_proba(const Dataset& data) const;
  std::vector<Polarity> predict(const Dataset& data) const;

 private:
  std::array<double, 3> raw_proba(std::span<const double> x) const;

  ModelSpec spec_;
  std::size_t n_features_ = 0;
  FittedParams params_;
  std::vector<double> loss_trace_;
};

/// Validates the spec, then fits. Deterministic in (spec, train).
TrainedModel fit(const ModelSpec& spec, const Dataset& train, int threads = 1);
TrainedModel fit(const ModelSpec& spec, std::span<const FusedFeature> train, int threads = 1);

nlohmann::json to_json(const TrainedModel& model);
/// Throws SchemaVersionError for a foreign schema_version and FormatError
/// for anything else malformed.
TrainedModel model_from_json(const nlohmann::json& doc);

std::string serialize(const TrainedModel& model);
TrainedModel deserialize(std::string_view text);

/// Shared helpers for documents that embed trees.
nlohmann::json tree_to_json(const Tree& tree);
Tree tree_from_json(const nlohmann::json& j, std::size_t n_features, std::size_t value_size);

/// Checks the schema_version field of any artifact document.
void check_schema_version(const nlohmann::json& doc);

}  // namespace latefuse::models
