#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latefuse/automl.hpp"
#include "latefuse/core.hpp"

namespace latefuse::fusion {

enum class Modality { Image, Text };

/// One modality's classification vectors, in file order.
struct ModalityPredictions {
  Modality modality = Modality::Image;
  std::vector<std::pair<std::string, ClassVector>> rows;

  /// Throws ContractError on a repeated id.
  void check_unique() const;
};

using GoldLabels = std::map<std::string, Polarity>;

enum class SplitName { Train, Valid, Test };
using SplitAssignment = std::map<std::string, SplitName>;

std::string_view split_name(SplitName s);

// JSON Lines readers report the 1-based line number of the first bad line.
ModalityPredictions read_predictions(const std::filesystem::path& path, Modality modality);
void write_predictions(const std::filesystem::path& path, const ModalityPredictions& preds);
GoldLabels read_gold(const std::filesystem::path& path);
void write_gold(const std::filesystem::path& path, std::span<const std::pair<std::string, Polarity>> rows);
SplitAssignment read_splits(const std::filesystem::path& path);
void write_splits(const std::filesystem::path& path,
                  std::span<const std::pair<std::string, SplitName>> rows);

struct JoinResult {
  std::vector<FusedFeature> features;  // image file order
  std::size_t image_only = 0;
  std::size_t text_only = 0;

  std::size_t missing() const { return image_only + text_only; }
};

/// x = image probabilities followed by text probabilities for every id in
/// both inputs; labels come from `gold` when present there. Throws
/// ContractError on duplicate ids or when no id is shared.
JoinResult join_modalities(const ModalityPredictions& img, const ModalityPredictions& text,
                           const GoldLabels& gold = {});

struct PartitionResult {
  DatasetSplit split;
  std::size_t unassigned = 0;
};

PartitionResult partition(std::span<const FusedFeature> features, const SplitAssignment& splits);

/// Replaces both blocks by the one-hot of their argmax.
std::vector<FusedFeature> to_one_hot(std::span<const FusedFeature> features);

ClassVector weighted_average_fuse(const ClassVector& img, const ClassVector& text, double w);

/// w on the grid 0.00, 0.01, ..., 1.00 with the best accuracy; ties go to
/// the smallest w.
double tune_weight(std::span<const FusedFeature> valid);

/// Accuracy of argmax over one 3-wide block of x (0 = image, 3 = text).
double block_accuracy(std::span<const FusedFeature> features, std::size_t offset);
std::vector<Polarity> block_predictions(std::span<const FusedFeature> features, std::size_t offset);

struct SynthConfig {
  std::size_t n_train = 6000;
  std::size_t n_valid = 2000;
  std::size_t n_test = 2000;
  double acc_img = 0.7;
  double acc_text = 0.7;
  double concentration = 1.0;
  std::uint64_t seed = 0;

  /// Accuracies in (1/3, 1], positive concentration, 30 per class per split.
  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& c);

/// Per modality the logits are z ~ N(mu e_gold, I) and the emitted vector
/// is softmax(concentration * z). mu is chosen so that the argmax hits the
/// gold class with probability `accuracy`.
double logit_gap_for_accuracy(double accuracy);

/// P(argmax z = gold) for z ~ N(mu e_gold, I) with 3 classes.
double argmax_accuracy(double mu);

struct SynthData {
  ModalityPredictions img;
  ModalityPredictions text;
  std::vector<std::pair<std::string, Polarity>> gold;
  std::vector<std::pair<std::string, SplitName>> splits;
};

SynthData generate_synthetic(const SynthConfig& config);
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

/// Bayes-optimal decision under the generator's noise model (balanced prior).
class BayesOracle {
 public:
  explicit BayesOracle(const SynthConfig& config);
  Polarity predict(const FusedFeature& f) const;

 private:
  double mu_img_;
  double mu_text_;
};

struct FuseOptions {
  int threads = 0;
  bool one_hot = false;
};

struct AccuracySet {
  double selected = 0.0;
  double image_only = 0.0;
  double text_only = 0.0;
  double weighted_avg = 0.0;
  double svm = 0.0;
};

struct FuseReport {
  AccuracySet test_accuracy;
  std::map<std::string, ConfusionMatrix> confusion;
  std::size_t selected_index = 0;
  std::string selected_family;
  nlohmann::json selected_hyperparams;
  double selected_objective = 0.0;
  double w_star = 0.0;
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t n_test = 0;
  bool one_hot = false;
};

nlohmann::json to_json(const FuseReport& r);

struct FuseResult {
  FuseReport report;
  automl::Leaderboard leaderboard;
  automl::FusionModel model;
};

/// Search on train/valid, select, then score on test once. Test labels are
/// read only after the selected model is frozen.
FuseResult fuse_train_evaluate(const DatasetSplit& split, const automl::SearchBudget& budget,
                               std::uint64_t seed, const FuseOptions& options = {});

/// Linear SVM baseline on the fused inputs.
models::ModelSpec svm_baseline_spec(std::uint64_t seed);

}  // namespace latefuse::fusion
