#include "latefuse/textprep.hpp"

#include <charconv>
#include <fstream>
#include <vector>

namespace latefuse::text {

namespace {

// One decoded UTF-8 unit. Invalid bytes are carried through untouched as
// single-byte units with valid == false.
struct Unit {
  char32_t cp = 0;
  bool valid = false;
  std::string_view bytes;
};

std::vector<Unit> decode_utf8(std::string_view s) {
  std::vector<Unit> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (ok) {
      // reject overlong forms, surrogates and out-of-range values
      static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
      ok = cp >= kMin[len] && cp <= 0x10FFFF && (cp < 0xD800 || cp > 0xDFFF);
    }
    if (!ok) len = 1;
    out.push_back({ok ? cp : char32_t{0}, ok, s.substr(i, len)});
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Simple (1:1) lowercase mapping for Latin, Greek, Cyrillic and fullwidth
// Latin. Scripts without case pass through.
char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x130) return U'i';
    if (c == 0x178) return 0xFF;
    const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    const bool even_upper = (c >= 0x100 && c <= 0x12F) || (c >= 0x132 && c <= 0x137) ||
                            (c >= 0x14A && c <= 0x177);
    if (odd_upper && (c % 2 == 1)) return c + 1;
    if (even_upper && (c % 2 == 0)) return c + 1;
    return c;
  }
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 0x25;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 0x3F;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0xFF21 && c <= 0xFF3A) return c + 0x20;
  return c;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; }

std::string ascii_lowered(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename Range>
std::string join(const Range& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out.append(t);
  }
  return out;
}

struct NamedEntity {
  std::string_view name;
  char32_t cp;
};

constexpr NamedEntity kEntities[] = {
    {"amp", U'&'},      {"lt", U'<'},       {"gt", U'>'},       {"quot", U'"'},
    {"apos", U'\''},    {"nbsp", 0xA0},     {"iexcl", 0xA1},    {"cent", 0xA2},
    {"pound", 0xA3},    {"yen", 0xA5},      {"sect", 0xA7},     {"copy", 0xA9},
    {"laquo", 0xAB},    {"reg", 0xAE},      {"deg", 0xB0},      {"plusmn", 0xB1},
    {"para", 0xB6},     {"middot", 0xB7},   {"raquo", 0xBB},    {"iquest", 0xBF},
    {"agrave", 0xE0},   {"aacute", 0xE1},   {"auml", 0xE4},     {"ccedil", 0xE7},
    {"egrave", 0xE8},   {"eacute", 0xE9},   {"iacute", 0xED},   {"ntilde", 0xF1},
    {"oacute", 0xF3},   {"ouml", 0xF6},     {"uacute", 0xFA},   {"uuml", 0xFC},
    {"szlig", 0xDF},    {"times", 0xD7},    {"divide", 0xF7},   {"ndash", 0x2013},
    {"mdash", 0x2014},  {"lsquo", 0x2018},  {"rsquo", 0x2019},  {"ldquo", 0x201C},
    {"rdquo", 0x201D},  {"bull", 0x2022},   {"hellip", 0x2026}, {"euro", 0x20AC},
    {"trade", 0x2122},  {"hearts", 0x2665},
};

// Decodes the entity body between '&' and ';'. Returns false when unknown.
bool decode_entity(std::string_view body, char32_t& cp) {
  if (body.empty()) return false;
  if (body[0] == '#') {
    std::string_view digits = body.substr(1);
    int base = 10;
    if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
      base = 16;
      digits.remove_prefix(1);
    }
    if (digits.empty()) return false;
    std::uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return false;
    if (value == 0 || value > 0x10FFFF || (value >= 0xD800 && value <= 0xDFFF)) return false;
    cp = value;
    return true;
  }
  for (const auto& e : kEntities) {
    if (e.name == body) {
      cp = e.cp;
      return true;
    }
  }
  return false;
}

std::string trim_copy(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

bool starts_with_link_or_mention(std::string_view lower) {
  // leading brackets and quotes do not hide a link or mention
  std::size_t i = 0;
  while (i < lower.size() && !is_word_char(lower[i]) && lower[i] != '@') ++i;
  const auto rest = lower.substr(i);
  return rest.starts_with("@") || rest.starts_with("http://") ||
         rest.starts_with("https://") || rest.starts_with("www.");
}

// Removes [a-z0-9] runs that would surface as "rt" or "http..." words once
// punctuation is gone.
std::string drop_marker_words(std::string_view token) {
  std::string out;
  std::size_t i = 0;
  while (i < token.size()) {
    if (!is_word_char(token[i])) {
      out.push_back(token[i++]);
      continue;
    }
    const std::size_t start = i;
    while (i < token.size() && is_word_char(token[i])) ++i;
    const auto word = ascii_lowered(token.substr(start, i - start));
    if (word == "rt" || word.starts_with("http")) continue;
    out.append(token.substr(start, i - start));
  }
  return out;
}

}  // namespace

StopwordSet::StopwordSet(std::initializer_list<std::string_view> words) {
  for (auto w : words) insert(w);
}

void StopwordSet::insert(std::string_view word) {
  const auto w = lowercase(trim_copy(word));
  if (w.empty()) return;
  for (char c : w) {
    if (is_space(c)) throw ContractError("stopword contains whitespace: '" + w + "'");
  }
  words_.insert(w);
}

StopwordSet StopwordSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open stopword file " + path.string());
  StopwordSet set;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim_copy(line);
    if (t.empty() || t[0] == '#') continue;
    set.insert(t);
  }
  return set;
}

Lexicon::Lexicon(std::initializer_list<std::pair<std::string_view, double>> entries) {
  for (const auto& [w, s] : entries) insert(w, s);
}

void Lexicon::insert(std::string_view word, double score) {
  if (!(score >= -1.0 && score <= 1.0)) {
    throw ContractError("lexicon score out of [-1, 1] for '" + std::string(word) + "'");
  }
  const auto w = lowercase(trim_copy(word));
  if (w.empty()) throw ContractError("empty lexicon word");
  entries_[w] = score;
}

double Lexicon::score(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  return it == entries_.end() ? 0.0 : it->second;
}

bool Lexicon::contains(std::string_view word) const {
  return entries_.contains(std::string(word));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open lexicon file " + path.string());
  Lexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_copy(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (tab == std::string::npos) throw FormatError(where + ": expected word<TAB>score");
    const auto num = trim_copy(std::string_view(line).substr(tab + 1));
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), score);
    if (ec != std::errc{} || ptr != num.data() + num.size()) {
      throw FormatError(where + ": bad score '" + num + "'");
    }
    try {
      lex.insert(std::string_view(line).substr(0, tab), score);
    } catch (const ContractError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return lex;
}

std::string decode_html_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '&') {
      const auto semi = text.find(';', i + 1);
      char32_t cp = 0;
      if (semi != std::string_view::npos && semi - i <= 12 &&
          decode_entity(text.substr(i + 1, semi - i - 1), cp)) {
        append_utf8(out, cp);
        i = semi + 1;
        continue;
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const auto& u : decode_utf8(text)) {
    if (u.valid) {
      append_utf8(out, to_lower(u.cp));
    } else {
      out.append(u.bytes);
    }
  }
  return out;
}

std::string strip_social_tokens(std::string_view text) {
  std::vector<std::string> kept;
  for (auto tok : split_ws(text)) {
    std::string cur(tok);
    // iterate to a fixed point so removing "rt" from "rt@bob" still drops
    // the mention that surfaces
    while (!cur.empty()) {
      if (starts_with_link_or_mention(ascii_lowered(cur))) {
        cur.clear();
        break;
      }
      auto next = drop_marker_words(cur);
      if (next == cur) break;
      cur = std::move(next);
    }
    if (!cur.empty()) kept.push_back(std::move(cur));
  }
  return join(kept);
}

std::string squeeze_repeats(std::string_view text) {
  const auto units = decode_utf8(text);
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < units.size()) {
    std::size_t j = i + 1;
    while (j < units.size() && units[j].bytes == units[i].bytes) ++j;
    const std::size_t run = j - i;
    const std::size_t copies = run >= 3 ? 2 : run;
    for (std::size_t k = 0; k < copies; ++k) out.append(units[i].bytes);
    i = j;
  }
  return out;
}

std::string remove_punctuation(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (!keep) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string remove_stopwords(std::string_view text, const StopwordSet& stopwords) {
  std::vector<std::string_view> kept;
  for (auto tok : split_ws(text)) {
    if (!stopwords.contains(lowercase(tok))) kept.push_back(tok);
  }
  return join(kept);
}

std::string clean_pipeline(std::string_view text, const StopwordSet& stopwords) {
  auto s = decode_html_entities(text);
  s = remove_stopwords(s, stopwords);
  s = lowercase(s);
  s = squeeze_repeats(s);
  s = strip_social_tokens(s);
  return remove_punctuation(s);
}

Polarity classify_score(double score) {
  if (score < -kPolarityThreshold) return Polarity::Negative;
  if (score > kPolarityThreshold) return Polarity::Positive;
  return Polarity::Neutral;
}

PolarityResult lexicon_polarity(std::string_view text, const Lexicon& lexicon) {
  const auto tokens = split_ws(text);
  if (tokens.empty()) return {};
  double sum = 0.0;
  for (auto t : tokens) sum += lexicon.score(lowercase(t));
  const double score = sum / static_cast<double>(tokens.size());
  return {score, classify_score(score)};
}

}  // namespace latefuse::text
