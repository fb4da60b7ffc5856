#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "latefuse/core.hpp"
#include "latefuse/fusion.hpp"
#include "latefuse/rng.hpp"

namespace latefuse::testing {

inline std::filesystem::path data_dir() { return LATEFUSE_DATA_DIR; }

/// Fresh directory named after the running test.
inline std::filesystem::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = std::filesystem::temp_directory_path() / "latefuse_tests" /
             (std::string(info->test_suite_name()) + "." + info->name());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Random simplex point.
inline std::array<double, 3> random_probs(Rng& rng) {
  std::array<double, 3> p{};
  double s = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - uniform01(rng));
    s += v;
  }
  for (auto& v : p) v /= s;
  return p;
}

/// Fused feature rows with random simplex blocks; values from `rng`.
inline std::vector<double> random_fused_x(Rng& rng) {
  const auto a = random_probs(rng);
  const auto b = random_probs(rng);
  return {a[0], a[1], a[2], b[0], b[1], b[2]};
}

/// The bundled synthetic dataset split into train/valid/test.
inline DatasetSplit bundled_split() {
  const auto dir = data_dir() / "bundled";
  const auto img = fusion::read_predictions(dir / "img.jsonl", fusion::Modality::Image);
  const auto text = fusion::read_predictions(dir / "text.jsonl", fusion::Modality::Text);
  const auto gold = fusion::read_gold(dir / "gold.jsonl");
  const auto joined = fusion::join_modalities(img, text, gold);
  return fusion::partition(joined.features, fusion::read_splits(dir / "splits.jsonl")).split;
}

/// A small synthetic split generated in memory.
inline DatasetSplit small_split(std::uint64_t seed, std::size_t n = 300) {
  fusion::SynthConfig c;
  c.n_train = n;
  c.n_valid = n / 2 < 90 ? 90 : n / 2;
  c.n_test = 90;
  c.seed = seed;
  const auto data = fusion::generate_synthetic(c);
  fusion::GoldLabels gold(data.gold.begin(), data.gold.end());
  fusion::SplitAssignment splits(data.splits.begin(), data.splits.end());
  const auto joined = fusion::join_modalities(data.img, data.text, gold);
  return fusion::partition(joined.features, splits).split;
}

}  // namespace latefuse::testing
