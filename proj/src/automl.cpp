#include "latefuse/automl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include <omp.h>

#include "latefuse/parallel.hpp"
#include "latefuse/rng.hpp"

namespace latefuse::automl {

namespace {

using models::Family;
using models::ModelSpec;
using models::ParamRange;
using models::TrainedModel;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t K = kNumClasses;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int draw_int(Rng& rng, const ParamRange& r) {
  return static_cast<int>(uniform_int(rng, static_cast<std::int64_t>(r.search_lo),
                                      static_cast<std::int64_t>(r.search_hi)));
}

double draw_real(Rng& rng, const ParamRange& r) {
  const double v = r.log_scale
                       ? std::exp(uniform(rng, std::log(r.search_lo), std::log(r.search_hi)))
                       : uniform(rng, r.search_lo, r.search_hi);
  return std::clamp(v, r.search_lo, r.search_hi);
}

bool coin(Rng& rng) { return uniform_int(rng, 0, 1) == 1; }

double valid_accuracy(const FusionModel& model, const Dataset& valid) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < valid.rows(); ++i) {
    if (to_int(predict(model, valid.row(i))) == valid.y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(valid.rows());
}

[[noreturn]] void bad(const std::string& what) { throw FormatError("ensemble artifact: " + what); }

// Out-of-fold probabilities for a set of specs, one (spec, fold) refit per
// parallel task. A spec whose refit throws gets an empty matrix.
std::vector<std::vector<double>> oof_cache(std::span<const ModelSpec> specs, const Dataset& train,
                                           std::span<const int> folds, int threads) {
  const std::size_t n = train.rows();
  const std::size_t m = specs.size();
  std::vector<std::vector<double>> oof(m, std::vector<double>(n * K, 0.0));
  std::vector<char> failed(m * kStackFolds, 0);
  const auto tasks = static_cast<std::int64_t>(m * kStackFolds);

#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_threads(threads))
  for (std::int64_t task = 0; task < tasks; ++task) {
    const auto j = static_cast<std::size_t>(task) / kStackFolds;
    const auto f = static_cast<int>(static_cast<std::size_t>(task) % kStackFolds);
    try {
      std::vector<std::size_t> fit_rows;
      std::vector<std::size_t> held_out;
      for (std::size_t i = 0; i < n; ++i) (folds[i] == f ? held_out : fit_rows).push_back(i);
      const auto model = models::fit(specs[j], subset(train, fit_rows), 1);
      for (auto i : held_out) {
        const auto p = model.predict_proba(train.row(i));
        for (std::size_t k = 0; k < K; ++k) oof[j][i * K + k] = p[k];
      }
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(task)] = 1;
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t f = 0; f < kStackFolds; ++f) {
      if (failed[j * kStackFolds + f]) oof[j].clear();
    }
  }
  return oof;
}

// Meta-learner over the cached OOF columns of `members`.
StackedEnsemble stack(EnsembleKind kind, std::vector<TrainedModel> bases,
                      std::span<const std::vector<double>* const> columns, const Dataset& train,
                      std::uint64_t seed) {
  const std::size_t n = train.rows();
  const std::size_t m = bases.size();
  Dataset meta(K * m);
  meta.x.resize(n * K * m);
  meta.y = train.y;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k < K; ++k) meta.x[i * K * m + j * K + k] = (*columns[j])[i * K + k];
    }
  }
  StackedEnsemble ens;
  ens.kind = kind;
  ens.base_models = std::move(bases);
  ens.meta_learner = models::fit(meta_learner_spec(stream_seed(seed, "meta")), meta, 1);
  return ens;
}

// Best successful trial of each family, in trial order.
std::vector<std::size_t> best_of_family(const std::vector<Trial>& trials,
                                        std::span<const std::size_t> ok) {
  std::map<std::string, std::size_t> best;
  for (auto i : ok) {
    auto [it, inserted] = best.emplace(trials[i].family, i);
    if (!inserted && trials[i].objective > trials[it->second].objective) it->second = i;
  }
  std::vector<std::size_t> out;
  for (const auto& [family, i] : best) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

Trial run_trial(std::size_t index, std::uint64_t master_seed, const Dataset& train,
                const Dataset& valid) {
  Trial trial;
  trial.index = index;
  const auto spec = sample_spec(master_seed, index);
  trial.family = std::string(models::family_name(spec.family));
  trial.hyperparams = models::hyperparams_to_json(spec);
  trial.hyperparams["seed"] = spec.seed;
  const auto t0 = Clock::now();
  try {
    auto model = std::make_shared<const FusionModel>(models::fit(spec, train, 1));
    trial.objective = valid_accuracy(*model, valid);
    trial.model = std::move(model);
  } catch (const std::exception& e) {
    trial.objective = -1.0;
    trial.error = e.what();
  }
  trial.fit_seconds = seconds_since(t0);
  return trial;
}

}  // namespace

void SearchBudget::validate() const {
  if (max_trials == 0) throw ContractError("search budget needs at least one trial");
  if (max_wall_clock && !(*max_wall_clock > 0.0)) {
    throw ContractError("wall-clock budget must be positive");
  }
}

ModelSpec sample_spec(std::uint64_t master_seed, std::size_t trial_index) {
  namespace r = models::ranges;
  Rng rng = make_stream(master_seed, "trial", trial_index);
  const auto& fams = models::kSearchableFamilies;
  ModelSpec spec;
  spec.family = fams[static_cast<std::size_t>(uniform_int(rng, 0, fams.size() - 1))];
  switch (spec.family) {
    case Family::RandomForest:
    case Family::ExtraTrees: {
      models::ForestParams p;
      p.n_trees = draw_int(rng, r::kForestTrees);
      p.max_depth = draw_int(rng, r::kForestDepth);
      p.feature_subsample = static_cast<models::FeatureSubsample>(uniform_int(rng, 0, 2));
      p.bootstrap = coin(rng);
      spec.hyperparams = p;
      break;
    }
    case Family::GLM: {
      models::GlmParams p;
      p.lambda = draw_real(rng, r::kGlmLambda);
      p.alpha = draw_real(rng, r::kGlmAlpha);
      p.epochs = draw_int(rng, r::kGlmEpochs);
      p.learning_rate = draw_real(rng, r::kGlmLearningRate);
      spec.hyperparams = p;
      break;
    }
    case Family::GBM_FirstOrder:
    case Family::GBM_SecondOrder: {
      models::GbmParams p;
      p.n_rounds = draw_int(rng, r::kGbmRounds);
      p.learning_rate = draw_real(rng, r::kGbmLearningRate);
      p.max_depth = draw_int(rng, r::kGbmDepth);
      p.subsample = draw_real(rng, r::kGbmSubsample);
      p.lambda = spec.family == Family::GBM_SecondOrder ? draw_real(rng, r::kGbmLambda) : 0.0;
      spec.hyperparams = p;
      break;
    }
    case Family::MLP: {
      models::MlpParams p;
      p.hidden_layers = draw_int(rng, r::kMlpLayers);
      p.width = r::kMlpWidths[static_cast<std::size_t>(uniform_int(rng, 0, r::kMlpWidths.size() - 1))];
      p.activation = coin(rng) ? models::Activation::Tanh : models::Activation::ReLU;
      p.learning_rate = draw_real(rng, r::kMlpLearningRate);
      p.epochs = draw_int(rng, r::kMlpEpochs);
      spec.hyperparams = p;
      break;
    }
    default:
      throw ContractError("family is not searchable");
  }
  spec.seed = rng();
  return spec;
}

std::string_view ensemble_kind_name(EnsembleKind k) {
  return k == EnsembleKind::AllModels ? "AllModels" : "BestOfFamily";
}

EnsembleKind ensemble_kind_from_name(std::string_view name) {
  if (name == "AllModels") return EnsembleKind::AllModels;
  if (name == "BestOfFamily") return EnsembleKind::BestOfFamily;
  throw FormatError("unknown ensemble kind '" + std::string(name) + "'");
}

std::vector<double> StackedEnsemble::meta_features(std::span<const double> x) const {
  std::vector<double> z;
  z.reserve(K * base_models.size());
  for (const auto& m : base_models) {
    const auto p = m.predict_proba(x);
    z.insert(z.end(), p.probs().begin(), p.probs().end());
  }
  return z;
}

ClassVector StackedEnsemble::predict_proba(std::span<const double> x) const {
  if (!meta_learner) throw ContractError("stacked ensemble has no meta-learner");
  return meta_learner->predict_proba(meta_features(x));
}

ModelSpec meta_learner_spec(std::uint64_t seed) {
  return {Family::GLM,
          models::GlmParams{.lambda = 1e-3, .alpha = 0.0, .epochs = 100, .learning_rate = 0.05},
          seed};
}

std::vector<int> stratified_folds(const Dataset& train, std::uint64_t seed) {
  std::vector<int> folds(train.rows(), 0);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      if (train.y[i] == c) rows.push_back(i);
    }
    if (rows.size() < kStackFolds) {
      throw ContractError("stacking needs at least " + std::to_string(kStackFolds) +
                          " training examples of class " + std::to_string(c) + ", found " +
                          std::to_string(rows.size()));
    }
    Rng rng = make_stream(seed, "folds", static_cast<std::uint64_t>(c));
    for (std::size_t i = rows.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(rows[i - 1], rows[j]);
    }
    for (std::size_t r = 0; r < rows.size(); ++r) folds[rows[r]] = static_cast<int>(r % kStackFolds);
  }
  return folds;
}

std::vector<double> out_of_fold(const ModelSpec& spec, const Dataset& train,
                                std::span<const int> folds) {
  if (folds.size() != train.rows()) throw ContractError("fold vector does not match training set");
  auto cache = oof_cache(std::span<const ModelSpec>(&spec, 1), train, folds, 1);
  if (cache[0].empty()) throw ContractError("out-of-fold refit failed");
  return std::move(cache[0]);
}

StackedEnsemble build_stacked_ensemble(std::vector<TrainedModel> base_models,
                                       const Dataset& train, EnsembleKind kind,
                                       std::uint64_t seed, int threads) {
  if (base_models.empty()) throw ContractError("stacked ensemble needs at least one base model");
  if (kind == EnsembleKind::BestOfFamily) {
    // First model of each family wins; callers order candidates best first.
    std::vector<TrainedModel> kept;
    for (auto& m : base_models) {
      const bool seen = std::any_of(kept.begin(), kept.end(),
                                    [&](const TrainedModel& k) { return k.family() == m.family(); });
      if (!seen) kept.push_back(std::move(m));
    }
    base_models = std::move(kept);
  }
  const auto folds = stratified_folds(train, seed);
  std::vector<ModelSpec> specs;
  for (const auto& m : base_models) specs.push_back(m.spec());
  const auto cache = oof_cache(specs, train, folds, threads);

  std::vector<TrainedModel> kept;
  std::vector<const std::vector<double>*> columns;
  for (std::size_t j = 0; j < base_models.size(); ++j) {
    if (cache[j].empty()) continue;
    kept.push_back(std::move(base_models[j]));
    columns.push_back(&cache[j]);
  }
  if (kept.empty()) throw ContractError("every base model failed its out-of-fold refits");
  return stack(kind, std::move(kept), columns, train, seed);
}

ClassVector predict_proba(const FusionModel& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict_proba(x); }, model);
}

Polarity predict(const FusionModel& model, std::span<const double> x) {
  return argmax_class(predict_proba(model, x));
}

std::size_t n_features(const FusionModel& model) {
  return std::visit([](const auto& m) { return m.n_features(); }, model);
}

json to_json(const FusionModel& model) {
  if (const auto* single = std::get_if<TrainedModel>(&model)) return models::to_json(*single);
  const auto& ens = std::get<StackedEnsemble>(model);
  json bases = json::array();
  for (const auto& m : ens.base_models) bases.push_back(models::to_json(m));
  return {
      {"schema_version", models::kModelSchemaVersion},
      {"family", "StackedEnsemble"},
      {"n_features", ens.n_features()},
      {"params",
       {{"kind", std::string(ensemble_kind_name(ens.kind))},
        {"base_models", bases},
        {"meta_learner", models::to_json(*ens.meta_learner)}}},
  };
}

FusionModel fusion_model_from_json(const json& doc) {
  models::check_schema_version(doc);
  if (!doc.contains("family") || !doc["family"].is_string()) bad("missing family");
  if (doc["family"] != "StackedEnsemble") return models::model_from_json(doc);
  if (!doc.contains("params") || !doc["params"].is_object()) bad("missing params");
  const auto& p = doc["params"];
  for (const char* key : {"kind", "base_models", "meta_learner"}) {
    if (!p.contains(key)) bad(std::string("missing field '") + key + "'");
  }
  if (!p["kind"].is_string()) bad("kind must be a string");
  if (!p["base_models"].is_array() || p["base_models"].empty()) bad("no base models");
  StackedEnsemble ens;
  ens.kind = ensemble_kind_from_name(p["kind"].get<std::string>());
  for (const auto& b : p["base_models"]) ens.base_models.push_back(models::model_from_json(b));
  ens.meta_learner = models::model_from_json(p["meta_learner"]);
  const std::size_t d = ens.base_models.front().n_features();
  for (const auto& b : ens.base_models) {
    if (b.n_features() != d) bad("base models disagree on input width");
  }
  if (ens.meta_learner->n_features() != K * ens.base_models.size()) {
    bad("meta-learner width is not 3 x base models");
  }
  return ens;
}

std::string serialize(const FusionModel& model) { return to_json(model).dump(); }

FusionModel deserialize_fusion_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model artifact is not valid JSON: ") + e.what());
  }
  try {
    return fusion_model_from_json(doc);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model artifact: ") + e.what());
  }
}

std::size_t Leaderboard::base_trial_count() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.family != "StackedEnsemble"; }));
}

Leaderboard random_search(const Dataset& train, const Dataset& valid, const SearchBudget& budget,
                          std::uint64_t master_seed, const SearchOptions& options) {
  budget.validate();
  if (train.rows() == 0 || valid.rows() == 0) throw ContractError("train and valid must be non-empty");
  if (train.n_features != valid.n_features) throw ContractError("train and valid widths differ");

  const auto start = Clock::now();
  const std::size_t n = budget.max_trials;
  std::vector<std::optional<Trial>> slots(n);
  const int threads = resolve_threads(options.threads);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    if (budget.max_wall_clock && seconds_since(start) >= *budget.max_wall_clock) continue;
    slots[static_cast<std::size_t>(i)] = run_trial(static_cast<std::size_t>(i), master_seed, train, valid);
  }

  Leaderboard board;
  board.master_seed = master_seed;
  board.budget = budget;
  for (auto& s : slots) {
    if (!s) break;  // keep the contiguous prefix
    board.trials.push_back(std::move(*s));
  }
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < board.trials.size(); ++i) {
    if (!board.trials[i].failed()) ok.push_back(i);
  }
  if (ok.empty()) {
    std::string why = board.trials.empty() ? "no trial finished inside the budget"
                                           : "every trial failed; first error: " + board.trials[0].error;
    throw ContractError(why);
  }
  if (!options.build_ensembles) return board;

  const auto stage_start = Clock::now();
  const std::size_t next = board.trials.size();
  std::vector<Trial> ensembles;
  for (auto kind : {EnsembleKind::AllModels, EnsembleKind::BestOfFamily}) {
    Trial t;
    t.index = next + ensembles.size();
    t.family = "StackedEnsemble";
    t.hyperparams = {{"kind", std::string(ensemble_kind_name(kind))}, {"base_trials", json::array()}};
    ensembles.push_back(std::move(t));
  }

  std::vector<int> folds;
  try {
    folds = stratified_folds(train, stream_seed(master_seed, "stack"));
  } catch (const ContractError& e) {
    for (auto& t : ensembles) t.error = e.what();
  }
  if (!folds.empty()) {
    std::vector<ModelSpec> specs;
    for (auto i : ok) specs.push_back(std::get<TrainedModel>(*board.trials[i].model).spec());
    const auto cache = oof_cache(specs, train, folds, threads);

    const std::vector<std::size_t> members[2] = {ok, best_of_family(board.trials, ok)};
    for (std::size_t e = 0; e < 2; ++e) {
      std::vector<TrainedModel> bases;
      std::vector<const std::vector<double>*> columns;
      for (auto i : members[e]) {
        const auto pos = static_cast<std::size_t>(std::find(ok.begin(), ok.end(), i) - ok.begin());
        if (cache[pos].empty()) continue;
        bases.push_back(std::get<TrainedModel>(*board.trials[i].model));
        columns.push_back(&cache[pos]);
        ensembles[e].hyperparams["base_trials"].push_back(i);
      }
      auto& t = ensembles[e];
      if (bases.empty()) {
        t.error = "every base model failed its out-of-fold refits";
      } else {
        try {
          const auto kind = e == 0 ? EnsembleKind::AllModels : EnsembleKind::BestOfFamily;
          auto model = std::make_shared<const FusionModel>(
              stack(kind, std::move(bases), columns, train, stream_seed(master_seed, "stack")));
          t.objective = valid_accuracy(*model, valid);
          t.model = std::move(model);
        } catch (const std::exception& ex) {
          t.error = ex.what();
        }
      }
      t.fit_seconds = seconds_since(stage_start);
    }
  }
  for (auto& t : ensembles) board.trials.push_back(std::move(t));
  return board;
}

const Trial& select_best(const Leaderboard& board) {
  const Trial* best = nullptr;
  for (const auto& t : board.trials) {
    if (t.failed()) continue;
    if (!best || t.objective > best->objective) best = &t;
  }
  if (!best) throw ContractError("no successful trial to select");
  return *best;
}

json leaderboard_to_json(const Leaderboard& board, bool include_timings) {
  json trials = json::array();
  for (const auto& t : board.trials) {
    json row = {{"index", t.index},
                {"family", t.family},
                {"hyperparams", t.hyperparams},
                {"objective", t.objective}};
    if (include_timings) row["fit_seconds"] = t.fit_seconds;
    if (t.failed()) row["error"] = t.error;
    trials.push_back(std::move(row));
  }
  json budget = {{"max_trials", board.budget.max_trials}, {"max_wall_clock", nullptr}};
  if (board.budget.max_wall_clock) budget["max_wall_clock"] = *board.budget.max_wall_clock;
  json selected = nullptr;
  if (std::any_of(board.trials.begin(), board.trials.end(), [](const Trial& t) { return !t.failed(); })) {
    selected = select_best(board).index;
  }
  return {{"schema_version", kLeaderboardSchemaVersion},
          {"master_seed", board.master_seed},
          {"budget", budget},
          {"trials", trials},
          {"selected_index", selected}};
}

}  // namespace latefuse::automl
