#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "latefuse/core.hpp"
#include "latefuse/models/spec.hpp"

namespace latefuse::models {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

/// Hidden layers use `activation`; the last layer is linear into a 3-way
/// softmax.
struct MlpModel {
  Activation activation = Activation::ReLU;
  std::vector<DenseLayer> layers;

  bool operator==(const MlpModel&) const = default;
};

/// Shape-only network (all zeros) with `hidden_layers` layers of `width`.
MlpModel make_mlp(std::size_t n_features, int hidden_layers, int width, Activation activation);

/// Glorot-uniform (tanh) or He-uniform (ReLU) weights, zero biases.
MlpModel init_mlp(std::size_t n_features, const MlpParams& params, std::uint64_t seed);

std::array<double, 3> mlp_scores(const MlpModel& net, std::span<const double> x);

struct MlpLossGrad {
  double loss = 0.0;
  MlpModel grad;  // same shape as the network
};

/// Mean softmax cross-entropy over `rows` and its exact backprop gradient.
/// Throws ContractError on non-finite activations.
MlpLossGrad mlp_forward_backward(const MlpModel& net, const Dataset& data,
                                 std::span<const std::size_t> rows);

void sgd_step(MlpModel& net, const MlpModel& grad, double learning_rate);

/// Mini-batch SGD; `trace` receives the full-data loss after each epoch.
MlpModel fit_mlp(const Dataset& train, const MlpParams& params, std::uint64_t seed,
                 std::vector<double>* trace = nullptr);

/// Flat views over all parameters in layer order (weights then bias), for
/// gradient checking.
std::vector<double*> parameter_pointers(MlpModel& net);

}  // namespace latefuse::models
