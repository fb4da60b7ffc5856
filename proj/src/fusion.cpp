#include "latefuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "latefuse/rng.hpp"

namespace latefuse::fusion {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::size_t K = kNumClasses;
constexpr double kAccuracyCap = 0.995;

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

// Calls fn(object, line_number) for every non-blank line.
template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError(where(path, no) + "not valid JSON");
    }
    if (!obj.is_object()) throw FormatError(where(path, no) + "expected a JSON object");
    try {
      fn(obj, no);
    } catch (const ContractError& e) {
      throw FormatError(where(path, no) + e.what());
    } catch (const json::exception& e) {
      throw FormatError(where(path, no) + e.what());
    }
  }
}

std::string read_id(const json& obj, const fs::path& path, std::size_t no) {
  if (!obj.contains("id") || !obj["id"].is_string()) {
    throw FormatError(where(path, no) + "missing string field \"id\"");
  }
  return obj["id"].get<std::string>();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::array<double, 3> block(const FusedFeature& f, std::size_t offset) {
  return {f.x[offset], f.x[offset + 1], f.x[offset + 2]};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::array<double, 3> softmax3(const std::array<double, 3>& s) {
  const double m = std::max({s[0], s[1], s[2]});
  std::array<double, 3> p{};
  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) z += p[k] = std::exp(s[k] - m);
  for (auto& v : p) v /= z;
  return p;
}

ClassVector sample_vector(Rng& rng, int gold, double accuracy, double mu, double concentration) {
  // Pick the class the argmax must land on, then draw logits conditioned on
  // that argmax; jointly this is exactly z ~ N(mu e_gold, I).
  int target = gold;
  if (uniform01(rng) >= accuracy) target = (gold + 1 + static_cast<int>(uniform_int(rng, 0, 1))) % 3;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 3> z{};
  for (;;) {
    for (std::size_t k = 0; k < K; ++k) z[k] = normal(rng);
    z[static_cast<std::size_t>(gold)] += mu;
    if (to_int(argmax_class(std::span<const double>(z))) == target) break;
  }
  for (auto& v : z) v *= concentration;
  return ClassVector(softmax3(z));
}

double accuracy_of(std::span<const Polarity> pred, std::span<const Polarity> gold) {
  return accuracy(pred, gold);
}

}  // namespace

void ModalityPredictions::check_unique() const {
  std::unordered_set<std::string> seen;
  for (const auto& [id, p] : rows) {
    if (!seen.insert(id).second) throw ContractError("duplicate id '" + id + "'");
  }
}

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::Train:
      return "train";
    case SplitName::Valid:
      return "valid";
    case SplitName::Test:
      return "test";
  }
  return "train";
}

ModalityPredictions read_predictions(const fs::path& path, Modality modality) {
  ModalityPredictions out;
  out.modality = modality;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](const json& obj, std::size_t no) {
    auto id = read_id(obj, path, no);
    if (!obj.contains("probs") || !obj["probs"].is_array() || obj["probs"].size() != K) {
      throw FormatError(where(path, no) + "\"probs\" must be an array of 3 numbers");
    }
    std::array<double, 3> p{};
    for (std::size_t k = 0; k < K; ++k) {
      if (!obj["probs"][k].is_number()) throw FormatError(where(path, no) + "\"probs\" must hold numbers");
      p[k] = obj["probs"][k].get<double>();
    }
    if (!seen.insert(id).second) throw FormatError(where(path, no) + "duplicate id '" + id + "'");
    out.rows.emplace_back(std::move(id), ClassVector(p));
  });
  return out;
}

void write_predictions(const fs::path& path, const ModalityPredictions& preds) {
  auto out = open_out(path);
  for (const auto& [id, p] : preds.rows) {
    out << json{{"id", id}, {"probs", p.probs()}}.dump() << '\n';
  }
}

GoldLabels read_gold(const fs::path& path) {
  GoldLabels gold;
  for_each_jsonl(path, [&](const json& obj, std::size_t no) {
    auto id = read_id(obj, path, no);
    if (!obj.contains("label") || !obj["label"].is_number_integer()) {
      throw FormatError(where(path, no) + "missing integer field \"label\"");
    }
    const auto label = polarity_from_int(obj["label"].get<int>());
    if (!gold.emplace(id, label).second) throw FormatError(where(path, no) + "duplicate id '" + id + "'");
  });
  return gold;
}

void write_gold(const fs::path& path, std::span<const std::pair<std::string, Polarity>> rows) {
  auto out = open_out(path);
  for (const auto& [id, label] : rows) out << json{{"id", id}, {"label", to_int(label)}}.dump() << '\n';
}

SplitAssignment read_splits(const fs::path& path) {
  SplitAssignment splits;
  for_each_jsonl(path, [&](const json& obj, std::size_t no) {
    auto id = read_id(obj, path, no);
    if (!obj.contains("split") || !obj["split"].is_string()) {
      throw FormatError(where(path, no) + "missing string field \"split\"");
    }
    const auto name = obj["split"].get<std::string>();
    SplitName s;
    if (name == "train") {
      s = SplitName::Train;
    } else if (name == "valid") {
      s = SplitName::Valid;
    } else if (name == "test") {
      s = SplitName::Test;
    } else {
      throw FormatError(where(path, no) + "split must be train, valid or test");
    }
    if (!splits.emplace(id, s).second) throw FormatError(where(path, no) + "duplicate id '" + id + "'");
  });
  return splits;
}

void write_splits(const fs::path& path, std::span<const std::pair<std::string, SplitName>> rows) {
  auto out = open_out(path);
  for (const auto& [id, s] : rows) {
    out << json{{"id", id}, {"split", std::string(split_name(s))}}.dump() << '\n';
  }
}

JoinResult join_modalities(const ModalityPredictions& img, const ModalityPredictions& text,
                           const GoldLabels& gold) {
  img.check_unique();
  text.check_unique();
  std::unordered_map<std::string, const ClassVector*> text_by_id;
  for (const auto& [id, p] : text.rows) text_by_id.emplace(id, &p);

  JoinResult out;
  for (const auto& [id, p] : img.rows) {
    const auto it = text_by_id.find(id);
    if (it == text_by_id.end()) {
      ++out.image_only;
      continue;
    }
    FusedFeature f;
    f.id = id;
    std::copy(p.probs().begin(), p.probs().end(), f.x.begin());
    std::copy(it->second->probs().begin(), it->second->probs().end(), f.x.begin() + K);
    if (const auto g = gold.find(id); g != gold.end()) f.label = g->second;
    out.features.push_back(std::move(f));
  }
  out.text_only = text.rows.size() - out.features.size();
  if (out.features.empty()) throw ContractError("image and text predictions share no ids");
  return out;
}

PartitionResult partition(std::span<const FusedFeature> features, const SplitAssignment& splits) {
  PartitionResult out;
  for (const auto& f : features) {
    const auto it = splits.find(f.id);
    if (it == splits.end()) {
      ++out.unassigned;
      continue;
    }
    switch (it->second) {
      case SplitName::Train:
        out.split.train.push_back(f);
        break;
      case SplitName::Valid:
        out.split.valid.push_back(f);
        break;
      case SplitName::Test:
        out.split.test.push_back(f);
        break;
    }
  }
  return out;
}

std::vector<FusedFeature> to_one_hot(std::span<const FusedFeature> features) {
  std::vector<FusedFeature> out(features.begin(), features.end());
  for (auto& f : out) {
    for (std::size_t offset : {std::size_t{0}, K}) {
      const auto c = static_cast<std::size_t>(to_int(argmax_class(std::span<const double>(f.x.data() + offset, K))));
      for (std::size_t k = 0; k < K; ++k) f.x[offset + k] = k == c ? 1.0 : 0.0;
    }
  }
  return out;
}

ClassVector weighted_average_fuse(const ClassVector& img, const ClassVector& text, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ContractError("fusion weight must lie in [0, 1]");
  std::array<double, 3> p{};
  for (std::size_t k = 0; k < K; ++k) p[k] = w * img[k] + (1.0 - w) * text[k];
  return ClassVector(p);
}

double tune_weight(std::span<const FusedFeature> valid) {
  if (valid.empty()) throw ContractError("weight tuning needs a non-empty validation set");
  std::vector<ClassVector> img;
  std::vector<ClassVector> text;
  for (const auto& f : valid) {
    if (!f.label) throw ContractError("weight tuning needs labeled rows");
    img.emplace_back(block(f, 0));
    text.emplace_back(block(f, K));
  }
  double best_w = 0.0;
  std::size_t best_hits = 0;
  for (int step = 0; step <= 100; ++step) {
    const double w = step / 100.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
      if (argmax_class(weighted_average_fuse(img[i], text[i], w)) == *valid[i].label) ++hits;
    }
    if (step == 0 || hits > best_hits) {
      best_hits = hits;
      best_w = w;
    }
  }
  return best_w;
}

std::vector<Polarity> block_predictions(std::span<const FusedFeature> features, std::size_t offset) {
  std::vector<Polarity> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(argmax_class(std::span<const double>(f.x.data() + offset, K)));
  return out;
}

double block_accuracy(std::span<const FusedFeature> features, std::size_t offset) {
  return accuracy_of(block_predictions(features, offset), labels_of(features));
}

void SynthConfig::validate() const {
  for (double a : {acc_img, acc_text}) {
    if (!(a > 1.0 / 3.0 && a <= 1.0)) throw ContractError("accuracies must lie in (1/3, 1]");
  }
  if (!(concentration > 0.0) || !std::isfinite(concentration)) {
    throw ContractError("concentration must be positive");
  }
  for (auto n : {n_train, n_valid, n_test}) {
    if (n < 30 * K) throw ContractError("every split needs at least 30 examples per class (90 rows)");
  }
}

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("synth config must be a JSON object");
  SynthConfig c;
  for (const auto& [key, v] : j.items()) {
    auto count = [&](std::size_t& dst) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw FormatError("synth config: " + key + " must be a non-negative integer");
      }
      dst = v.get<std::size_t>();
    };
    auto real = [&](double& dst) {
      if (!v.is_number()) throw FormatError("synth config: " + key + " must be a number");
      dst = v.get<double>();
    };
    if (key == "n_train") {
      count(c.n_train);
    } else if (key == "n_valid") {
      count(c.n_valid);
    } else if (key == "n_test") {
      count(c.n_test);
    } else if (key == "acc_img") {
      real(c.acc_img);
    } else if (key == "acc_text") {
      real(c.acc_text);
    } else if (key == "concentration") {
      real(c.concentration);
    } else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw FormatError("synth config: seed must be a non-negative integer");
      }
      c.seed = v.get<std::uint64_t>();
    } else {
      throw FormatError("synth config: unknown key '" + key + "'");
    }
  }
  return c;
}

json to_json(const SynthConfig& c) {
  return {{"n_train", c.n_train},   {"n_valid", c.n_valid},   {"n_test", c.n_test},
          {"acc_img", c.acc_img},   {"acc_text", c.acc_text}, {"concentration", c.concentration},
          {"seed", c.seed}};
}

double argmax_accuracy(double mu) {
  // P = integral phi(t) Phi(t + mu)^2 dt, trapezoid on [-12, 12].
  constexpr int kSteps = 4800;
  constexpr double lo = -12.0;
  constexpr double hi = 12.0;
  const double h = (hi - lo) / kSteps;
  double acc = 0.0;
  for (int i = 0; i <= kSteps; ++i) {
    const double t = lo + h * i;
    const double phi = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
    const double c = normal_cdf(t + mu);
    acc += (i == 0 || i == kSteps ? 0.5 : 1.0) * phi * c * c;
  }
  return acc * h;
}

double logit_gap_for_accuracy(double accuracy) {
  if (!(accuracy > 1.0 / 3.0 && accuracy <= 1.0)) throw ContractError("accuracy must lie in (1/3, 1]");
  const double target = std::min(accuracy, kAccuracyCap);
  double lo = 0.0;
  double hi = 10.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (argmax_accuracy(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SynthData generate_synthetic(const SynthConfig& config) {
  config.validate();
  const double mu_img = logit_gap_for_accuracy(config.acc_img);
  const double mu_text = logit_gap_for_accuracy(config.acc_text);
  SynthData data;
  data.img.modality = Modality::Image;
  data.text.modality = Modality::Text;

  const std::array<std::pair<std::size_t, SplitName>, 3> parts = {
      std::pair{config.n_train, SplitName::Train}, std::pair{config.n_valid, SplitName::Valid},
      std::pair{config.n_test, SplitName::Test}};
  std::size_t next = 0;
  for (std::size_t s = 0; s < parts.size(); ++s) {
    const auto [n, name] = parts[s];
    // Balanced labels inside every split, shuffled.
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % K);
    Rng shuffle = make_stream(config.seed, "labels", s);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(shuffle, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(labels[i - 1], labels[j]);
    }
    for (std::size_t i = 0; i < n; ++i, ++next) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "ex%07zu", next);
      const std::string id = buf;
      const int y = labels[i];
      Rng ri = make_stream(config.seed, "image", next);
      Rng rt = make_stream(config.seed, "text", next);
      data.img.rows.emplace_back(id, sample_vector(ri, y, config.acc_img, mu_img, config.concentration));
      data.text.rows.emplace_back(id, sample_vector(rt, y, config.acc_text, mu_text, config.concentration));
      data.gold.emplace_back(id, polarity_from_int(y));
      data.splits.emplace_back(id, name);
    }
  }
  return data;
}

void write_synthetic(const SynthData& data, const fs::path& dir) {
  fs::create_directories(dir);
  write_predictions(dir / "img.jsonl", data.img);
  write_predictions(dir / "text.jsonl", data.text);
  write_gold(dir / "gold.jsonl", data.gold);
  write_splits(dir / "splits.jsonl", data.splits);
}

BayesOracle::BayesOracle(const SynthConfig& config)
    : mu_img_(logit_gap_for_accuracy(config.acc_img)),
      mu_text_(logit_gap_for_accuracy(config.acc_text)) {}

Polarity BayesOracle::predict(const FusedFeature& f) const {
  // Logits equal log p / concentration up to a per-vector constant, and the
  // likelihood ratio of class y is exp(mu * z_y).
  std::array<double, 3> score{};
  for (std::size_t k = 0; k < K; ++k) {
    score[k] = mu_img_ * std::log(std::max(f.x[k], 1e-300)) +
               mu_text_ * std::log(std::max(f.x[K + k], 1e-300));
  }
  return argmax_class(std::span<const double>(score));
}

models::ModelSpec svm_baseline_spec(std::uint64_t seed) {
  return {models::Family::LinearSVM,
          models::SvmParams{.lambda = 1e-4, .epochs = 50, .learning_rate = 0.1},
          stream_seed(seed, "svm")};
}

json to_json(const FuseReport& r) {
  json confusion = json::object();
  for (const auto& [name, m] : r.confusion) {
    json rows = json::array();
    for (const auto& row : m.counts) rows.push_back(row);
    confusion[name] = rows;
  }
  return {
      {"test_accuracy",
       {{"selected", r.test_accuracy.selected},
        {"image_only", r.test_accuracy.image_only},
        {"text_only", r.test_accuracy.text_only},
        {"weighted_avg", r.test_accuracy.weighted_avg},
        {"svm", r.test_accuracy.svm}}},
      {"confusion", confusion},
      {"selected_trial",
       {{"index", r.selected_index},
        {"family", r.selected_family},
        {"hyperparams", r.selected_hyperparams},
        {"objective", r.selected_objective}}},
      {"w_star", r.w_star},
      {"counts", {{"train", r.n_train}, {"valid", r.n_valid}, {"test", r.n_test}}},
      {"input_encoding", r.one_hot ? "one_hot" : "probabilities"},
  };
}

FuseResult fuse_train_evaluate(const DatasetSplit& split, const automl::SearchBudget& budget,
                               std::uint64_t seed, const FuseOptions& options) {
  validate(split, true);
  if (split.test.empty()) throw ContractError("test split is empty");
  std::vector<FusedFeature> train = split.train;
  std::vector<FusedFeature> valid = split.valid;
  if (options.one_hot) {
    train = to_one_hot(train);
    valid = to_one_hot(valid);
  }
  const Dataset train_ds = to_dataset(train);
  const Dataset valid_ds = to_dataset(valid);

  auto board = automl::random_search(train_ds, valid_ds, budget, seed, {.threads = options.threads});
  const auto& best = automl::select_best(board);
  const automl::FusionModel model = *best.model;
  const double w_star = tune_weight(valid);
  const auto svm = models::fit(svm_baseline_spec(seed), train_ds, 1);

  // Selection is frozen; the test split is read from here on only.
  const std::vector<FusedFeature> test = options.one_hot ? to_one_hot(split.test) : split.test;
  const auto gold = labels_of(test);
  std::map<std::string, std::vector<Polarity>> preds;
  for (const auto& f : test) {
    preds["selected"].push_back(automl::predict(model, f.x));
    preds["svm"].push_back(svm.predict(f.x));
    preds["weighted_avg"].push_back(
        argmax_class(weighted_average_fuse(ClassVector(block(f, 0)), ClassVector(block(f, K)), w_star)));
  }
  preds["image_only"] = block_predictions(test, 0);
  preds["text_only"] = block_predictions(test, K);

  FuseReport r;
  r.test_accuracy = {.selected = accuracy_of(preds["selected"], gold),
                     .image_only = accuracy_of(preds["image_only"], gold),
                     .text_only = accuracy_of(preds["text_only"], gold),
                     .weighted_avg = accuracy_of(preds["weighted_avg"], gold),
                     .svm = accuracy_of(preds["svm"], gold)};
  for (const auto& [name, p] : preds) r.confusion[name] = confusion(p, gold);
  r.selected_index = best.index;
  r.selected_family = best.family;
  r.selected_hyperparams = best.hyperparams;
  r.selected_objective = best.objective;
  r.w_star = w_star;
  r.n_train = train.size();
  r.n_valid = valid.size();
  r.n_test = test.size();
  r.one_hot = options.one_hot;
  return {std::move(r), std::move(board), model};
}

}  // namespace latefuse::fusion
