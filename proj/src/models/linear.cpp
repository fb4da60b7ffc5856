#include "latefuse/models/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "latefuse/rng.hpp"

namespace latefuse::models {

namespace {

constexpr std::size_t K = kNumClasses;
constexpr std::size_t kBatch = 32;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

void shuffle(std::vector<std::size_t>& rows, Rng& rng) {
  for (std::size_t i = rows.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
    std::swap(rows[i - 1], rows[j]);
  }
}

}  // namespace

std::array<double, 3> LinearModel::scores(std::span<const double> x) const {
  std::array<double, 3> s{};
  for (std::size_t k = 0; k < K; ++k) {
    double acc = bias[k];
    const double* w = weights.data() + k * n_features;
    for (std::size_t j = 0; j < n_features; ++j) acc += w[j] * x[j];
    s[k] = acc;
  }
  return s;
}

double LinearModel::weight_norm() const {
  double acc = 0.0;
  for (double w : weights) acc += w * w;
  return std::sqrt(acc);
}

std::array<double, 3> softmax(const std::array<double, 3>& scores) {
  const double m = std::max({scores[0], scores[1], scores[2]});
  std::array<double, 3> p{};
  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p[k] = std::exp(scores[k] - m);
    z += p[k];
  }
  for (auto& v : p) v /= z;
  return p;
}

void require_multiclass(const Dataset& train, const char* family) {
  if (train.rows() == 0) throw ContractError(std::string(family) + " fit on an empty training set");
  const int first = train.y[0];
  if (std::all_of(train.y.begin(), train.y.end(), [&](int y) { return y == first; })) {
    throw ContractError(std::string(family) + " needs at least two classes in the training set");
  }
}

double glm_loss(const LinearModel& model, const Dataset& data, std::span<const std::size_t> rows,
                double lambda, double alpha) {
  double ce = 0.0;
  for (auto i : rows) {
    const auto s = model.scores(data.row(i));
    const double m = std::max({s[0], s[1], s[2]});
    const double lse = m + std::log(std::exp(s[0] - m) + std::exp(s[1] - m) + std::exp(s[2] - m));
    ce += lse - s[static_cast<std::size_t>(data.y[i])];
  }
  ce /= static_cast<double>(rows.size());
  double l1 = 0.0;
  double l2 = 0.0;
  for (double w : model.weights) {
    l1 += std::abs(w);
    l2 += w * w;
  }
  return ce + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2);
}

LinearModel glm_gradient(const LinearModel& model, const Dataset& data,
                         std::span<const std::size_t> rows, double lambda, double alpha) {
  const std::size_t d = model.n_features;
  LinearModel g(d);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (auto i : rows) {
    const auto x = data.row(i);
    const auto p = softmax(model.scores(x));
    for (std::size_t k = 0; k < K; ++k) {
      const double r =
          (p[k] - (static_cast<std::size_t>(data.y[i]) == k ? 1.0 : 0.0)) * inv_n;
      g.bias[k] += r;
      double* gw = g.weights.data() + k * d;
      for (std::size_t j = 0; j < d; ++j) gw[j] += r * x[j];
    }
  }
  for (std::size_t j = 0; j < g.weights.size(); ++j) {
    const double w = model.weights[j];
    g.weights[j] += lambda * (alpha * sign(w) + (1.0 - alpha) * w);
  }
  return g;
}

LinearModel fit_glm(const Dataset& train, const GlmParams& params, std::uint64_t seed,
                    std::vector<double>* trace) {
  require_multiclass(train, "GLM");
  LinearModel model(train.n_features);
  auto order = all_rows(train);
  const auto everything = all_rows(train);
  for (int e = 0; e < params.epochs; ++e) {
    Rng rng = make_stream(seed, "epoch", static_cast<std::uint64_t>(e));
    shuffle(order, rng);
    for (std::size_t b = 0; b < order.size(); b += kBatch) {
      const std::span<const std::size_t> batch(order.data() + b,
                                               std::min(kBatch, order.size() - b));
      const auto g = glm_gradient(model, train, batch, params.lambda, params.alpha);
      for (std::size_t j = 0; j < model.weights.size(); ++j) {
        model.weights[j] -= params.learning_rate * g.weights[j];
      }
      for (std::size_t k = 0; k < K; ++k) model.bias[k] -= params.learning_rate * g.bias[k];
    }
    if (trace) trace->push_back(glm_loss(model, train, everything, params.lambda, params.alpha));
  }
  return model;
}

double svm_objective(const LinearModel& model, const Dataset& data, double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto m = model.scores(data.row(i));
    for (std::size_t k = 0; k < K; ++k) {
      const double t = static_cast<std::size_t>(data.y[i]) == k ? 1.0 : -1.0;
      hinge += std::max(0.0, 1.0 - t * m[k]);
    }
  }
  double l2 = 0.0;
  for (double w : model.weights) l2 += w * w;
  return hinge / static_cast<double>(data.rows()) + 0.5 * lambda * l2;
}

LinearModel fit_svm(const Dataset& train, const SvmParams& params, std::uint64_t seed,
                    std::vector<double>* trace) {
  require_multiclass(train, "LinearSVM");
  const std::size_t d = train.n_features;
  LinearModel model(d);
  auto order = all_rows(train);
  std::vector<double> gw(model.weights.size());
  std::array<double, 3> gb{};
  for (int e = 0; e < params.epochs; ++e) {
    Rng rng = make_stream(seed, "epoch", static_cast<std::uint64_t>(e));
    shuffle(order, rng);
    const double lr = params.learning_rate / std::sqrt(1.0 + e);
    for (std::size_t b = 0; b < order.size(); b += kBatch) {
      const std::size_t end = std::min(order.size(), b + kBatch);
      const double inv = 1.0 / static_cast<double>(end - b);
      for (std::size_t j = 0; j < gw.size(); ++j) gw[j] = params.lambda * model.weights[j];
      gb = {};
      for (std::size_t bi = b; bi < end; ++bi) {
        const auto i = order[bi];
        const auto x = train.row(i);
        const auto m = model.scores(x);
        for (std::size_t k = 0; k < K; ++k) {
          const double t = static_cast<std::size_t>(train.y[i]) == k ? 1.0 : -1.0;
          if (t * m[k] >= 1.0) continue;
          gb[k] -= t * inv;
          for (std::size_t j = 0; j < d; ++j) gw[k * d + j] -= t * inv * x[j];
        }
      }
      for (std::size_t j = 0; j < gw.size(); ++j) model.weights[j] -= lr * gw[j];
      for (std::size_t k = 0; k < K; ++k) model.bias[k] -= lr * gb[k];
    }
    if (trace) trace->push_back(svm_objective(model, train, params.lambda));
  }
  return model;
}

Polarity svm_predict(const LinearModel& model, std::span<const double> x) {
  const auto m = model.scores(x);
  return argmax_class(std::span<const double>(m));
}

}  // namespace latefuse::models
