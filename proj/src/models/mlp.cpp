#include "latefuse/models/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latefuse/models/linear.hpp"
#include "latefuse/rng.hpp"

namespace latefuse::models {

namespace {

constexpr std::size_t kBatch = 32;

double activate(Activation a, double z) { return a == Activation::ReLU ? std::max(0.0, z) : std::tanh(z); }

// Derivative expressed through pre-activation z and output y.
double activate_grad(Activation a, double z, double y) {
  return a == Activation::ReLU ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

// Per-sample forward buffers: pre-activations and outputs of every layer.
struct Trace {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

void forward(const MlpModel& net, std::span<const double> x, Trace& t) {
  const std::size_t L = net.layers.size();
  t.z.resize(L);
  t.a.resize(L);
  std::span<const double> in = x;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = net.layers[l];
    t.z[l].resize(layer.out);
    t.a[l].resize(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = layer.bias[o];
      const double* w = layer.weights.data() + o * layer.in;
      for (std::size_t j = 0; j < layer.in; ++j) acc += w[j] * in[j];
      t.z[l][o] = acc;
      t.a[l][o] = l + 1 < L ? activate(net.activation, acc) : acc;
    }
    in = t.a[l];
  }
}

double mean_loss(const MlpModel& net, const Dataset& data) {
  Trace t;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    forward(net, data.row(i), t);
    const auto& s = t.a.back();
    const auto p = softmax({s[0], s[1], s[2]});
    loss -= std::log(std::max(p[static_cast<std::size_t>(data.y[i])], 1e-300));
  }
  return loss / static_cast<double>(data.rows());
}

}  // namespace

MlpModel make_mlp(std::size_t n_features, int hidden_layers, int width, Activation activation) {
  MlpModel net;
  net.activation = activation;
  std::size_t in = n_features;
  const auto w = static_cast<std::size_t>(width);
  for (int l = 0; l <= hidden_layers; ++l) {
    const std::size_t out = l < hidden_layers ? w : static_cast<std::size_t>(kNumClasses);
    net.layers.push_back({in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)});
    in = out;
  }
  return net;
}

MlpModel init_mlp(std::size_t n_features, const MlpParams& params, std::uint64_t seed) {
  auto net = make_mlp(n_features, params.hidden_layers, params.width, params.activation);
  Rng rng = make_stream(seed, "init");
  for (auto& layer : net.layers) {
    const double fan_in = static_cast<double>(layer.in);
    const double fan_out = static_cast<double>(layer.out);
    const double limit = params.activation == Activation::ReLU ? std::sqrt(6.0 / fan_in)
                                                               : std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& w : layer.weights) w = uniform(rng, -limit, limit);
  }
  return net;
}

std::array<double, 3> mlp_scores(const MlpModel& net, std::span<const double> x) {
  Trace t;
  forward(net, x, t);
  const auto& s = t.a.back();
  return {s[0], s[1], s[2]};
}

MlpLossGrad mlp_forward_backward(const MlpModel& net, const Dataset& data,
                                 std::span<const std::size_t> rows) {
  MlpLossGrad out;
  out.grad = net;
  for (auto& layer : out.grad.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  const std::size_t L = net.layers.size();
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  Trace t;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  for (auto i : rows) {
    const auto x = data.row(i);
    forward(net, x, t);
    const auto& s = t.a.back();
    const std::array<double, 3> scores{s[0], s[1], s[2]};
    const auto p = softmax(scores);
    const auto y = static_cast<std::size_t>(data.y[i]);
    out.loss -= std::log(std::max(p[y], 1e-300)) * inv_n;

    delta.assign(p.begin(), p.end());
    delta[y] -= 1.0;
    for (auto& v : delta) v *= inv_n;

    for (std::size_t l = L; l-- > 0;) {
      const auto& layer = net.layers[l];
      auto& g = out.grad.layers[l];
      const std::span<const double> input = l == 0 ? x : std::span<const double>(t.a[l - 1]);
      for (std::size_t o = 0; o < layer.out; ++o) {
        g.bias[o] += delta[o];
        double* gw = g.weights.data() + o * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) gw[j] += delta[o] * input[j];
      }
      if (l == 0) break;
      prev_delta.assign(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* w = layer.weights.data() + o * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) prev_delta[j] += w[j] * delta[o];
      }
      for (std::size_t j = 0; j < layer.in; ++j) {
        prev_delta[j] *= activate_grad(net.activation, t.z[l - 1][j], t.a[l - 1][j]);
      }
      std::swap(delta, prev_delta);
    }
  }
  if (!std::isfinite(out.loss)) throw ContractError("MLP produced non-finite activations");
  return out;
}

void sgd_step(MlpModel& net, const MlpModel& grad, double learning_rate) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    const auto& g = grad.layers[l];
    for (std::size_t j = 0; j < layer.weights.size(); ++j) layer.weights[j] -= learning_rate * g.weights[j];
    for (std::size_t j = 0; j < layer.bias.size(); ++j) layer.bias[j] -= learning_rate * g.bias[j];
  }
}

MlpModel fit_mlp(const Dataset& train, const MlpParams& params, std::uint64_t seed,
                 std::vector<double>* trace) {
  require_multiclass(train, "MLP");
  auto net = init_mlp(train.n_features, params, seed);
  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < params.epochs; ++e) {
    Rng rng = make_stream(seed, "epoch", static_cast<std::uint64_t>(e));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t b = 0; b < order.size(); b += kBatch) {
      const std::span<const std::size_t> batch(order.data() + b, std::min(kBatch, order.size() - b));
      const auto lg = mlp_forward_backward(net, train, batch);
      sgd_step(net, lg.grad, params.learning_rate);
    }
    if (trace) trace->push_back(mean_loss(net, train));
  }
  return net;
}

std::vector<double*> parameter_pointers(MlpModel& net) {
  std::vector<double*> out;
  for (auto& layer : net.layers) {
    for (auto& w : layer.weights) out.push_back(&w);
    for (auto& b : layer.bias) out.push_back(&b);
  }
  return out;
}

}  // namespace latefuse::models
