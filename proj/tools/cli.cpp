#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latefuse/automl.hpp"
#include "latefuse/core.hpp"
#include "latefuse/fusion.hpp"
#include "latefuse/image_io.hpp"
#include "latefuse/imageprep.hpp"
#include "latefuse/parallel.hpp"
#include "latefuse/textprep.hpp"

namespace latefuse::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kStatsSchemaVersion = 1;

struct CleanTextArgs {
  std::string in, out, stopwords;
};

struct LexiconArgs {
  std::string in, lexicon, out;
};

struct ImagePrepArgs {
  std::string in, out, stats, stats_in;
  std::size_t size = image::kDefaultSide;
  bool lbp = false;
  int threads = 0;
};

struct SynthArgs {
  fusion::SynthConfig config;
  std::string out_dir;
};

struct FuseArgs {
  std::string img, text, gold, splits, out_report, out_model, out_leaderboard;
  std::size_t budget = 60;
  std::optional<double> wall_clock;
  std::uint64_t seed = 0;
  bool one_hot = false;
  bool timings = false;
  bool print_report = false;
  int threads = 0;
};

struct PredictArgs {
  std::string model, img, text, out;
};

struct Args {
  CleanTextArgs clean;
  LexiconArgs lexicon;
  ImagePrepArgs image;
  SynthArgs synth;
  FuseArgs fuse;
  PredictArgs predict;
  std::string config;  // shared by every subcommand
};

std::unique_ptr<CLI::App> build_app(Args& a) {
  auto app = std::make_unique<CLI::App>("Late fusion of image and text sentiment classifiers",
                                        "latefuse");
  app->require_subcommand(1);
  const auto existing = CLI::ExistingFile;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "JSON file whose keys mirror the flag names")
        ->check(existing);
  };

  auto* clean = app->add_subcommand("clean-text", "Clean JSONL {id, text} records");
  clean->add_option("--in", a.clean.in, "input JSONL")->required()->check(existing);
  clean->add_option("--out", a.clean.out, "output JSONL")->required();
  clean->add_option("--stopwords", a.clean.stopwords, "stopword list, one per line")
      ->required()
      ->check(existing);
  add_config(clean);

  auto* lex = app->add_subcommand("lexicon-classify", "Lexicon polarity to one-hot predictions");
  lex->add_option("--in", a.lexicon.in, "cleaned JSONL {id, text}")->required()->check(existing);
  lex->add_option("--lexicon", a.lexicon.lexicon, "word<TAB>score file")
      ->required()
      ->check(existing);
  lex->add_option("--out", a.lexicon.out, "prediction JSONL {id, probs}")->required();
  add_config(lex);

  auto* img = app->add_subcommand("image-prep", "Resize, normalize and optionally add LBP");
  img->add_option("--in", a.image.in, "directory of .ppm/.pgm images")
      ->required()
      ->check(CLI::ExistingDirectory);
  img->add_option("--out", a.image.out, "directory for .npy tensors")->required();
  img->add_option("--stats", a.image.stats, "where to write the channel statistics JSON")
      ->required();
  img->add_option("--stats-in", a.image.stats_in,
                  "normalize with these statistics instead of computing them")
      ->check(existing);
  img->add_option("--size", a.image.size, "output side length")
      ->check(CLI::Range(std::size_t{2}, std::size_t{4096}));
  img->add_flag("--lbp", a.image.lbp, "append an LBP plane");
  img->add_option("--threads", a.image.threads, "worker count (0: LATEFUSE_THREADS or all cores)");
  add_config(img);

  auto* synth = app->add_subcommand("synth", "Write a synthetic two-modality dataset");
  synth->add_option("--out-dir", a.synth.out_dir, "output directory")->required();
  synth->add_option("--n-train", a.synth.config.n_train);
  synth->add_option("--n-valid", a.synth.config.n_valid);
  synth->add_option("--n-test", a.synth.config.n_test);
  synth->add_option("--acc-img", a.synth.config.acc_img, "image argmax accuracy");
  synth->add_option("--acc-text", a.synth.config.acc_text, "text argmax accuracy");
  synth->add_option("--concentration", a.synth.config.concentration, "softmax temperature inverse");
  synth->add_option("--seed", a.synth.config.seed);
  add_config(synth);

  auto* fuse = app->add_subcommand("fuse", "Search, select and evaluate a fusion classifier");
  fuse->add_option("--img", a.fuse.img, "image predictions JSONL")->required()->check(existing);
  fuse->add_option("--text", a.fuse.text, "text predictions JSONL")->required()->check(existing);
  fuse->add_option("--gold", a.fuse.gold, "gold labels JSONL")->required()->check(existing);
  fuse->add_option("--splits", a.fuse.splits, "split assignment JSONL")
      ->required()
      ->check(existing);
  fuse->add_option("--budget", a.fuse.budget, "number of search trials")
      ->check(CLI::PositiveNumber);
  fuse->add_option("--wall-clock", a.fuse.wall_clock, "search time limit in seconds");
  fuse->add_option("--seed", a.fuse.seed, "master seed");
  fuse->add_option("--out-report", a.fuse.out_report, "report JSON")->required();
  fuse->add_option("--out-model", a.fuse.out_model, "selected model JSON")->required();
  fuse->add_option("--out-leaderboard", a.fuse.out_leaderboard, "leaderboard JSON");
  fuse->add_flag("--one-hot", a.fuse.one_hot, "fuse one-hot predicted labels");
  fuse->add_flag("--timings", a.fuse.timings, "record fit_seconds in the leaderboard");
  fuse->add_flag("--print-report", a.fuse.print_report, "also print the report on stdout");
  fuse->add_option("--threads", a.fuse.threads, "worker count (0: LATEFUSE_THREADS or all cores)");
  add_config(fuse);

  auto* pred = app->add_subcommand("predict", "Apply a saved fusion model");
  pred->add_option("--model", a.predict.model, "model JSON from fuse")->required()->check(existing);
  pred->add_option("--img", a.predict.img, "image predictions JSONL")->required()->check(existing);
  pred->add_option("--text", a.predict.text, "text predictions JSONL")->required()->check(existing);
  pred->add_option("--out", a.predict.out, "JSONL {id, label, probs}")->required();
  add_config(pred);

  return app;
}

std::string flag_name(const std::string& arg) {
  return arg.substr(0, arg.find('='));
}

/// Splices the values of a --config file in after the subcommand name, for
/// every key whose flag is absent from the command line.
std::vector<std::string> expand_config(const CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty() || args[0].starts_with("-")) return args;
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({})) {
    if (s->get_name() == args[0]) sub = s;
  }
  if (sub == nullptr) return args;

  std::optional<std::string> path;
  std::set<std::string> given;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (!args[i].starts_with("--")) continue;
    const std::string name = flag_name(args[i]);
    given.insert(name);
    if (name == "--config") {
      if (args[i].size() > name.size()) {
        path = args[i].substr(name.size() + 1);
      } else if (i + 1 < args.size()) {
        path = args[i + 1];
      }
    }
  }
  if (!path) return args;

  std::ifstream in(*path);
  if (!in) throw UsageError("cannot open config file " + *path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + *path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw UsageError("config file " + *path + " must hold a JSON object");

  std::vector<std::string> injected;
  for (const auto& [key, value] : doc.items()) {
    std::string name = "--" + key;
    std::replace(name.begin() + 2, name.end(), '_', '-');
    if (name == "--config") throw UsageError("config files cannot nest --config");
    const CLI::Option* opt = sub->get_option_no_throw(name);
    if (opt == nullptr) throw UsageError("config key '" + key + "' is not a flag of " + args[0]);
    if (given.contains(name)) continue;
    if (opt->get_expected_min() == 0) {
      if (!value.is_boolean()) throw UsageError("config key '" + key + "' must be true or false");
      if (value.get<bool>()) injected.push_back(name);
      continue;
    }
    injected.push_back(name);
    if (value.is_string()) {
      injected.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      injected.push_back(value.dump());
    } else {
      throw UsageError("config key '" + key + "' must be a string or a number");
    }
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

struct TextRecord {
  std::string id;
  std::string text;
};

/// Reads {id, text} JSONL. Malformed lines are reported on `err` and
/// skipped; returns the number of such lines through `bad_lines`.
std::vector<TextRecord> read_text_records(const fs::path& path, std::ostream& err,
                                          std::size_t& bad_lines) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<TextRecord> rows;
  std::string line;
  bad_lines = 0;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      err << where(path, no) << "not valid JSON\n";
      ++bad_lines;
      continue;
    }
    if (!obj.is_object()) {
      err << where(path, no) << "expected a JSON object\n";
      ++bad_lines;
      continue;
    }
    if (!obj.contains("id") || !obj["id"].is_string()) {
      err << where(path, no) << "missing string field \"id\"\n";
      ++bad_lines;
      continue;
    }
    if (!obj.contains("text") || !obj["text"].is_string()) {
      err << where(path, no) << "missing string field \"text\"\n";
      ++bad_lines;
      continue;
    }
    rows.push_back({obj["id"].get<std::string>(), obj["text"].get<std::string>()});
  }
  return rows;
}

int cmd_clean_text(const CleanTextArgs& a, std::ostream& err) {
  const auto stopwords = text::StopwordSet::load(a.stopwords);
  std::size_t bad = 0;
  const auto rows = read_text_records(a.in, err, bad);
  auto out = open_out(a.out);
  for (const auto& r : rows) {
    out << json{{"id", r.id}, {"text", text::clean_pipeline(r.text, stopwords)}}.dump() << '\n';
  }
  err << "clean-text: " << rows.size() << " records cleaned, " << bad << " malformed\n";
  return bad == 0 ? kExitOk : kExitError;
}

int cmd_lexicon_classify(const LexiconArgs& a, std::ostream& err) {
  const auto lexicon = text::Lexicon::load(a.lexicon);
  std::size_t bad = 0;
  const auto rows = read_text_records(a.in, err, bad);
  fusion::ModalityPredictions preds;
  preds.modality = fusion::Modality::Text;
  for (const auto& r : rows) {
    std::array<double, 3> p{};
    p[static_cast<std::size_t>(to_int(text::lexicon_polarity(r.text, lexicon).polarity))] = 1.0;
    preds.rows.emplace_back(r.id, ClassVector(p));
  }
  preds.check_unique();
  fusion::write_predictions(a.out, preds);
  err << "lexicon-classify: " << rows.size() << " records classified, " << bad << " malformed\n";
  return bad == 0 ? kExitOk : kExitError;
}

json stats_to_json(const image::ChannelStats& s, std::size_t size, bool lbp, std::size_t images) {
  return {{"schema_version", kStatsSchemaVersion},
          {"size", {size, size}},
          {"channels", s.mean.size()},
          {"lbp", lbp},
          {"images", images},
          {"mean", s.mean},
          {"std", s.std}};
}

image::ChannelStats stats_from_file(const fs::path& path, std::size_t channels) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error&) {
    throw FormatError(path.string() + ": not valid JSON");
  }
  if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    throw FormatError(path.string() + ": missing schema_version");
  }
  if (doc["schema_version"].get<int>() != kStatsSchemaVersion) {
    throw SchemaVersionError(path.string() + ": unsupported schema_version " +
                             doc["schema_version"].dump());
  }
  image::ChannelStats s;
  try {
    s.mean = doc.at("mean").get<std::vector<double>>();
    s.std = doc.at("std").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw FormatError(path.string() + ": mean and std must be arrays of numbers");
  }
  if (s.mean.size() != channels || s.std.size() != channels) {
    throw FormatError(path.string() + ": statistics cover " + std::to_string(s.mean.size()) +
                      " channels, images have " + std::to_string(channels));
  }
  for (double v : s.std) {
    if (!(v > 0.0)) throw FormatError(path.string() + ": std entries must be positive");
  }
  return s;
}

int cmd_image_prep(const ImagePrepArgs& a, std::ostream& err) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.in)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ContractError("no .ppm/.pgm images in " + a.in);

  std::vector<image::Image> images;
  images.reserve(files.size());
  for (const auto& f : files) {
    image::Image img = image::resize_bilinear(image::read_pnm(f), a.size, a.size);
    if (a.lbp) {
      if (img.channels() != 3) throw ContractError(f.string() + ": --lbp needs an RGB image");
      img = image::append_lbp_channel(img);
    }
    if (!images.empty() && img.channels() != images.front().channels()) {
      throw ContractError(f.string() + ": channel count differs from " + files.front().string());
    }
    images.push_back(std::move(img));
  }

  const int threads = resolve_threads(a.threads);
  const image::ChannelStats stats = a.stats_in.empty()
                                        ? image::channel_stats(images, threads)
                                        : stats_from_file(a.stats_in, images.front().channels());
  const auto normalized = image::normalize_all(images, stats, threads);
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < files.size(); ++i) {
    image::write_npy(fs::path(a.out) / (files[i].stem().string() + ".npy"), normalized[i]);
  }
  write_file(a.stats, stats_to_json(stats, a.size, a.lbp, files.size()).dump(2) + "\n");
  err << "image-prep: " << files.size() << " images, " << images.front().channels()
      << " channels\n";
  return kExitOk;
}

int cmd_synth(const SynthArgs& a, std::ostream& err) {
  try {
    a.config.validate();
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  const auto data = fusion::generate_synthetic(a.config);
  fusion::write_synthetic(data, a.out_dir);
  err << "synth: " << data.gold.size() << " examples written to " << a.out_dir << "\n";
  return kExitOk;
}

int cmd_fuse(const FuseArgs& a, std::ostream& out, std::ostream& err) {
  const auto img = fusion::read_predictions(a.img, fusion::Modality::Image);
  const auto text = fusion::read_predictions(a.text, fusion::Modality::Text);
  const auto gold = fusion::read_gold(a.gold);
  const auto splits = fusion::read_splits(a.splits);

  const auto joined = fusion::join_modalities(img, text, gold);
  if (joined.missing() > 0) {
    err << "fuse: " << joined.image_only << " ids only in image predictions, " << joined.text_only
        << " only in text predictions; skipped\n";
  }
  const auto part = fusion::partition(joined.features, splits);
  if (part.unassigned > 0) err << "fuse: " << part.unassigned << " ids without a split; skipped\n";

  automl::SearchBudget budget;
  budget.max_trials = a.budget;
  budget.max_wall_clock = a.wall_clock;
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = fusion::fuse_train_evaluate(part.split, budget, a.seed,
                                                  {.threads = a.threads, .one_hot = a.one_hot});
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const json report = fusion::to_json(result.report);
  write_file(a.out_report, report.dump(2) + "\n");
  json model = automl::to_json(result.model);
  model["input_encoding"] = a.one_hot ? "one_hot" : "probabilities";
  write_file(a.out_model, model.dump() + "\n");
  if (!a.out_leaderboard.empty()) {
    write_file(a.out_leaderboard,
               automl::leaderboard_to_json(result.leaderboard, a.timings).dump(2) + "\n");
  }
  if (a.print_report) out << report.dump(2) << "\n";

  std::ostringstream msg;
  msg.setf(std::ios::fixed);
  msg.precision(4);
  msg << "fuse: " << result.leaderboard.trials.size() << " trials in " << std::setprecision(1)
      << seconds << " s; selected #" << result.report.selected_index << " ("
      << result.report.selected_family << ") test accuracy " << std::setprecision(4)
      << result.report.test_accuracy.selected << "\n";
  err << msg.str();
  return kExitOk;
}

int cmd_predict(const PredictArgs& a, std::ostream& err) {
  std::ifstream in(a.model);
  if (!in) throw FormatError("cannot open " + a.model);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error&) {
    throw FormatError(a.model + ": not valid JSON");
  }
  const auto model = automl::fusion_model_from_json(doc);
  bool one_hot = false;
  if (doc.contains("input_encoding")) {
    const auto& enc = doc["input_encoding"];
    if (enc == "one_hot") {
      one_hot = true;
    } else if (enc != "probabilities") {
      throw FormatError(a.model + ": unknown input_encoding " + enc.dump());
    }
  }
  if (automl::n_features(model) != kFusedDim) {
    throw FormatError(a.model + ": model expects " + std::to_string(automl::n_features(model)) +
                      " inputs, fused vectors have " + std::to_string(kFusedDim));
  }

  const auto img = fusion::read_predictions(a.img, fusion::Modality::Image);
  const auto text = fusion::read_predictions(a.text, fusion::Modality::Text);
  auto joined = fusion::join_modalities(img, text);
  if (joined.missing() > 0) {
    err << "predict: " << joined.image_only << " ids only in image predictions, "
        << joined.text_only << " only in text predictions; skipped\n";
  }
  const auto features = one_hot ? fusion::to_one_hot(joined.features) : joined.features;

  auto out = open_out(a.out);
  for (const auto& f : features) {
    const ClassVector p = automl::predict_proba(model, f.x);
    out << json{{"id", f.id}, {"label", to_int(argmax_class(p))}, {"probs", p.probs()}}.dump()
        << '\n';
  }
  if (!out) throw FormatError("cannot write " + a.out);
  err << "predict: " << features.size() << " predictions written to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Args a;
  auto app = build_app(a);
  const std::string cmd = args.empty() ? "" : args[0];
  try {
    std::vector<std::string> expanded = expand_config(*app, args);
    std::reverse(expanded.begin(), expanded.end());
    app->parse(expanded);
  } catch (const CLI::CallForHelp& e) {
    out << app->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "latefuse: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "latefuse: usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (cmd == "clean-text") return cmd_clean_text(a.clean, err);
    if (cmd == "lexicon-classify") return cmd_lexicon_classify(a.lexicon, err);
    if (cmd == "image-prep") return cmd_image_prep(a.image, err);
    if (cmd == "synth") return cmd_synth(a.synth, err);
    if (cmd == "fuse") return cmd_fuse(a.fuse, out, err);
    if (cmd == "predict") return cmd_predict(a.predict, err);
  } catch (const UsageError& e) {
    err << "latefuse " << cmd << ": usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "latefuse " << cmd << ": error: " << e.what() << "\n";
    return kExitError;
  }
  err << "latefuse: unknown command '" << cmd << "'\n";
  return kExitUsage;
}

}  // namespace latefuse::cli
