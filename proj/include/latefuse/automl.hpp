#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "latefuse/core.hpp"
#include "latefuse/models/model.hpp"

namespace latefuse::automl {

inline constexpr std::size_t kStackFolds = 5;
inline constexpr int kLeaderboardSchemaVersion = 1;

struct SearchBudget {
  std::size_t max_trials = 60;
  std::optional<double> max_wall_clock;  // seconds, checked between trials

  void validate() const;
};

/// Family uniform over the six searchable families, then every
/// hyperparameter from its search interval. Depends on nothing but
/// (master_seed, trial_index).
models::ModelSpec sample_spec(std::uint64_t master_seed, std::size_t trial_index);

enum class EnsembleKind { AllModels, BestOfFamily };
std::string_view ensemble_kind_name(EnsembleKind k);
EnsembleKind ensemble_kind_from_name(std::string_view name);

/// Superlearner: a GLM over the concatenated class probabilities of the
/// base models.
struct StackedEnsemble {
  EnsembleKind kind = EnsembleKind::AllModels;
  std::vector<models::TrainedModel> base_models;
  std::optional<models::TrainedModel> meta_learner;

  std::size_t n_features() const { return base_models.front().n_features(); }
  std::vector<double> meta_features(std::span<const double> x) const;
  ClassVector predict_proba(std::span<const double> x) const;
};

/// GLM used as meta-learner: L2 only, lambda = 1e-3.
models::ModelSpec meta_learner_spec(std::uint64_t seed);

/// Stratified fold of every training row: class by class, rows are
/// shuffled with stream (seed, "folds", class) and dealt round-robin.
/// Throws ContractError when a class has fewer than kStackFolds rows.
std::vector<int> stratified_folds(const Dataset& train, std::uint64_t seed);

/// Out-of-fold class probabilities of `spec` refit on the other folds:
/// n x 3, row-major.
std::vector<double> out_of_fold(const models::ModelSpec& spec, const Dataset& train,
                                std::span<const int> folds);

StackedEnsemble build_stacked_ensemble(std::vector<models::TrainedModel> base_models,
                                       const Dataset& train, EnsembleKind kind,
                                       std::uint64_t seed, int threads = 0);

/// The fusion classifier after selection: either a single fitted model or
/// a stacked ensemble.
using FusionModel = std::variant<models::TrainedModel, StackedEnsemble>;

ClassVector predict_proba(const FusionModel& model, std::span<const double> x);
Polarity predict(const FusionModel& model, std::span<const double> x);
std::size_t n_features(const FusionModel& model);
nlohmann::json to_json(const FusionModel& model);
/// Single-model documents and "StackedEnsemble" documents; FormatError and
/// SchemaVersionError as for models::model_from_json.
FusionModel fusion_model_from_json(const nlohmann::json& doc);
std::string serialize(const FusionModel& model);
FusionModel deserialize_fusion_model(std::string_view text);

struct Trial {
  std::size_t index = 0;
  std::string family;          // a family name or "StackedEnsemble"
  nlohmann::json hyperparams;  // for ensembles: {kind, base_trials}
  std::shared_ptr<const FusionModel> model;  // null when the trial failed
  double objective = -1.0;                    // validation accuracy; -1 when failed
  double fit_seconds = 0.0;
  std::string error;

  bool failed() const { return objective < 0.0; }
};

/// Base trials in index order followed by up to two ensemble trials whose
/// indices continue the sequence.
struct Leaderboard {
  std::uint64_t master_seed = 0;
  SearchBudget budget;
  std::vector<Trial> trials;

  std::size_t base_trial_count() const;
};

struct SearchOptions {
  int threads = 0;  // 0: LATEFUSE_THREADS or all cores
  bool build_ensembles = true;
};

/// Fits every sampled spec on train, scores on valid, then stacks. Trials run
/// concurrently; the result does not depend on the worker count when the
/// budget is expressed in trials. Throws ContractError when every trial
/// fails.
Leaderboard random_search(const Dataset& train, const Dataset& valid, const SearchBudget& budget,
                          std::uint64_t master_seed, const SearchOptions& options = {});

/// Maximum objective, ties to the smallest index. Throws ContractError when
/// no trial succeeded.
const Trial& select_best(const Leaderboard& board);

/// fit_seconds is written only when `include_timings` is set; without it the
/// document is a pure function of (data, seed, trial budget).
nlohmann::json leaderboard_to_json(const Leaderboard& board, bool include_timings = false);

}  // namespace latefuse::automl
