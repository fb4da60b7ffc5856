#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "latefuse/core.hpp"

namespace latefuse::text {

/// Lowercase stopwords; matching against them is case-insensitive.
class StopwordSet {
 public:
  StopwordSet() = default;
  StopwordSet(std::initializer_list<std::string_view> words);

  void insert(std::string_view word);
  bool contains(std::string_view lowercase_word) const {
    return words_.contains(std::string(lowercase_word));
  }
  std::size_t size() const { return words_.size(); }

  /// One word per line, '#' starts a comment.
  static StopwordSet load(const std::filesystem::path& path);

 private:
  std::unordered_set<std::string> words_;
};

/// Word -> polarity score in [-1, 1].
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::initializer_list<std::pair<std::string_view, double>> entries);

  void insert(std::string_view word, double score);
  /// 0 for words not in the lexicon.
  double score(std::string_view word) const;
  bool contains(std::string_view word) const;
  std::size_t size() const { return entries_.size(); }

  /// "word<TAB>score" per line; '#' lines and blank lines are skipped.
  static Lexicon load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, double> entries_;
};

// The six cleaning steps. Each is total over UTF-8 input.

/// Named and numeric (&#38; &#x26;) entities, one pass, unknown left verbatim.
std::string decode_html_entities(std::string_view text);
std::string lowercase(std::string_view text);
/// Drops retweet markers, @mentions and links.
std::string strip_social_tokens(std::string_view text);
/// Every run of three or more identical code points becomes two.
std::string squeeze_repeats(std::string_view text);
/// Anything outside [a-z0-9] and whitespace becomes a space; whitespace is
/// then collapsed and trimmed.
std::string remove_punctuation(std::string_view text);
std::string remove_stopwords(std::string_view text, const StopwordSet& stopwords);

/// All six steps in the reference order: entities, stopwords, lowercase,
/// repeats, social tokens, punctuation.
std::string clean_pipeline(std::string_view text, const StopwordSet& stopwords);

inline constexpr double kPolarityThreshold = 0.1;

struct PolarityResult {
  double score = 0.0;
  Polarity polarity = Polarity::Neutral;
};

/// Mean lexicon score over whitespace tokens (unknown words count as 0);
/// strictly below -0.1 is negative, strictly above 0.1 positive.
PolarityResult lexicon_polarity(std::string_view text, const Lexicon& lexicon);
Polarity classify_score(double score);

}  // namespace latefuse::text
