#include "latefuse/core.hpp"

#include <cmath>
#include <unordered_set>

namespace latefuse {

Polarity polarity_from_int(int code) {
  if (code < 0 || code >= kNumClasses) {
    throw ContractError("polarity code out of range: " + std::to_string(code));
  }
  return static_cast<Polarity>(code);
}

std::string_view polarity_name(Polarity p) {
  switch (p) {
    case Polarity::Negative:
      return "negative";
    case Polarity::Neutral:
      return "neutral";
    case Polarity::Positive:
      return "positive";
  }
  return "?";
}

bool is_valid_class_vector(std::span<const double> probs) {
  if (probs.size() != 3) return false;
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= kProbTolerance;
}

ClassVector::ClassVector(const std::array<double, 3>& probs) : probs_(probs) {
  if (!is_valid_class_vector(probs_)) {
    throw ContractError("not a probability vector: [" +
                        std::to_string(probs[0]) + ", " +
                        std::to_string(probs[1]) + ", " +
                        std::to_string(probs[2]) + "]");
  }
}

Polarity argmax_class(std::span<const double> scores) {
  if (scores.size() != 3) throw ContractError("argmax_class expects 3 scores");
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return static_cast<Polarity>(best);
}

void validate(const FusedFeature& f) {
  if (!is_valid_class_vector(f.image_block()) ||
      !is_valid_class_vector(f.text_block())) {
    throw ContractError("fused feature '" + f.id +
                        "' does not hold two probability vectors");
  }
}

namespace {

void check_partition(const std::vector<FusedFeature>& part, const char* name,
                     bool require_labels,
                     std::unordered_set<std::string>& seen) {
  std::array<bool, 3> present{};
  for (const auto& f : part) {
    validate(f);
    if (!seen.insert(f.id).second) {
      throw ContractError("id '" + f.id + "' appears in more than one place (" +
                          name + ")");
    }
    if (f.label) {
      present[static_cast<std::size_t>(to_int(*f.label))] = true;
    } else if (require_labels) {
      throw ContractError(std::string(name) + " row '" + f.id +
                          "' has no label");
    }
  }
  if (require_labels) {
    for (int k = 0; k < kNumClasses; ++k) {
      if (!present[static_cast<std::size_t>(k)]) {
        throw ContractError(std::string(name) + " partition has no " +
                            std::string(polarity_name(static_cast<Polarity>(k))) +
                            " example");
      }
    }
  }
}

}  // namespace

void validate(const DatasetSplit& split, bool require_labels) {
  std::unordered_set<std::string> seen;
  check_partition(split.train, "train", require_labels, seen);
  check_partition(split.valid, "valid", require_labels, seen);
  check_partition(split.test, "test", false, seen);
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& r : counts) {
    for (auto c : r) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  return counts[0][0] + counts[1][1] + counts[2][2];
}

namespace {

void check_lengths(std::span<const Polarity> predictions,
                   std::span<const Polarity> gold) {
  if (predictions.size() != gold.size()) {
    throw ContractError("prediction/gold length mismatch: " +
                        std::to_string(predictions.size()) + " vs " +
                        std::to_string(gold.size()));
  }
  if (gold.empty()) throw ContractError("accuracy of an empty set");
}

}  // namespace

double accuracy(std::span<const Polarity> predictions,
                std::span<const Polarity> gold) {
  check_lengths(predictions, gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    hits += predictions[i] == gold[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

ConfusionMatrix confusion(std::span<const Polarity> predictions,
                          std::span<const Polarity> gold) {
  check_lengths(predictions, gold);
  ConfusionMatrix m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(to_int(gold[i]))]
              [static_cast<std::size_t>(to_int(predictions[i]))];
  }
  return m;
}

void Dataset::add_row(std::span<const double> values, int label) {
  if (values.size() != n_features) {
    throw ContractError("row has " + std::to_string(values.size()) +
                        " features, expected " + std::to_string(n_features));
  }
  x.insert(x.end(), values.begin(), values.end());
  y.push_back(label);
}

Dataset to_dataset(std::span<const FusedFeature> features) {
  Dataset d(kFusedDim);
  d.x.reserve(features.size() * kFusedDim);
  d.y.reserve(features.size());
  for (const auto& f : features) {
    if (!f.label) throw ContractError("row '" + f.id + "' has no label");
    d.add_row(f.x, to_int(*f.label));
  }
  return d;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out(data.n_features);
  out.x.reserve(indices.size() * data.n_features);
  out.y.reserve(indices.size());
  for (auto i : indices) out.add_row(data.row(i), data.y[i]);
  return out;
}

std::vector<Polarity> labels_of(const Dataset& data) {
  std::vector<Polarity> out;
  out.reserve(data.rows());
  for (int y : data.y) out.push_back(polarity_from_int(y));
  return out;
}

std::vector<Polarity> labels_of(std::span<const FusedFeature> features) {
  std::vector<Polarity> out;
  out.reserve(features.size());
  for (const auto& f : features) {
    if (!f.label) throw ContractError("row '" + f.id + "' has no label");
    out.push_back(*f.label);
  }
  return out;
}

}  // namespace latefuse
