#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace latefuse {

/// Raised when a caller breaks an operation's precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed files and documents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A serialized artifact carries a schema version this build does not read.
class SchemaVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

inline constexpr int kNumClasses = 3;
inline constexpr std::size_t kFusedDim = 6;

/// Probability-simplex tolerance shared by every ClassVector check.
inline constexpr double kProbTolerance = 1e-6;

// Codes 0/1/2 are part of every file format; never reorder.
enum class Polarity : int { Negative = 0, Neutral = 1, Positive = 2 };

Polarity polarity_from_int(int code);
inline int to_int(Polarity p) { return static_cast<int>(p); }
std::string_view polarity_name(Polarity p);

bool is_valid_class_vector(std::span<const double> probs);

/// A 3-class probability distribution over {negative, neutral, positive}.
class ClassVector {
 public:
  ClassVector() = default;  // uniform
  explicit ClassVector(const std::array<double, 3>& probs);

  double operator[](std::size_t k) const { return probs_[k]; }
  const std::array<double, 3>& probs() const { return probs_; }

 private:
  std::array<double, 3> probs_{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

/// Index of the largest entry; ties go to the lowest index. Works on
/// unnormalized scores too.
Polarity argmax_class(std::span<const double> scores);
inline Polarity argmax_class(const ClassVector& v) {
  return argmax_class(std::span<const double>(v.probs()));
}

/// X = Y_img concatenated with Y_text, plus the gold label when known.
struct FusedFeature {
  std::string id;
  std::array<double, kFusedDim> x{};
  std::optional<Polarity> label;

  std::span<const double, 3> image_block() const {
    return std::span<const double, 3>(x.data(), 3);
  }
  std::span<const double, 3> text_block() const {
    return std::span<const double, 3>(x.data() + 3, 3);
  }
};

void validate(const FusedFeature& f);

struct DatasetSplit {
  std::vector<FusedFeature> train;
  std::vector<FusedFeature> valid;
  std::vector<FusedFeature> test;
};

/// Checks id disjointness across partitions and feature validity. When
/// `require_labels` is set, train and valid must be labeled and contain
/// every class.
void validate(const DatasetSplit& split, bool require_labels = true);

struct ConfusionMatrix {
  // rows = gold, cols = predicted
  std::array<std::array<std::size_t, 3>, 3> counts{};

  std::size_t total() const;
  std::size_t trace() const;
};

double accuracy(std::span<const Polarity> predictions,
                std::span<const Polarity> gold);
ConfusionMatrix confusion(std::span<const Polarity> predictions,
                          std::span<const Polarity> gold);

/// Dense row-major design matrix with integer class labels; the training
/// view every model family consumes.
struct Dataset {
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<int> y;

  Dataset() = default;
  explicit Dataset(std::size_t features) : n_features(features) {}

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * n_features, n_features};
  }
  void add_row(std::span<const double> values, int label);
};

/// Labeled features only; throws ContractError on an unlabeled row.
Dataset to_dataset(std::span<const FusedFeature> features);
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);
std::vector<Polarity> labels_of(const Dataset& data);
std::vector<Polarity> labels_of(std::span<const FusedFeature> features);

}  // namespace latefuse
