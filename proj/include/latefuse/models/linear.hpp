#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "latefuse/core.hpp"
#include "latefuse/models/spec.hpp"

namespace latefuse::models {

/// K x d weights (row-major) plus K biases. Shared by the multinomial GLM
/// and the one-vs-rest linear SVM.
struct LinearModel {
  std::size_t n_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  LinearModel() = default;
  explicit LinearModel(std::size_t features)
      : n_features(features), weights(kNumClasses * features, 0.0), bias(kNumClasses, 0.0) {}

  std::array<double, 3> scores(std::span<const double> x) const;
  double weight_norm() const;
  bool operator==(const LinearModel&) const = default;
};

std::array<double, 3> softmax(const std::array<double, 3>& scores);

/// Mean cross-entropy over `rows` plus the elastic-net penalty
/// lambda * (alpha |W|_1 + (1 - alpha)/2 |W|^2).
double glm_loss(const LinearModel& model, const Dataset& data, std::span<const std::size_t> rows,
                double lambda, double alpha);

/// Analytic gradient of glm_loss, shaped like the model. The L1 term uses
/// sign(w) with sign(0) = 0.
LinearModel glm_gradient(const LinearModel& model, const Dataset& data,
                         std::span<const std::size_t> rows, double lambda, double alpha);

/// Mini-batch gradient descent from zero weights; `trace` receives the
/// full-data loss after each epoch.
LinearModel fit_glm(const Dataset& train, const GlmParams& params, std::uint64_t seed,
                    std::vector<double>* trace = nullptr);

/// Mean over rows of sum_k max(0, 1 - t_k m_k) plus (lambda / 2) |W|^2, with
/// t_k = +1 for the gold class and -1 otherwise.
double svm_objective(const LinearModel& model, const Dataset& data, double lambda);

/// One-vs-rest hinge-loss subgradient descent with a 1/sqrt(epoch) step decay.
LinearModel fit_svm(const Dataset& train, const SvmParams& params, std::uint64_t seed,
                    std::vector<double>* trace = nullptr);

/// Class of the largest margin.
Polarity svm_predict(const LinearModel& model, std::span<const double> x);

/// Fails on an empty set or when only one class is present.
void require_multiclass(const Dataset& train, const char* family);

}  // namespace latefuse::models
