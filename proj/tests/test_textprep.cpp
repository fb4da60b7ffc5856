#include <gtest/gtest.h>

#include "latefuse/rng.hpp"
#include "latefuse/textprep.hpp"
#include "test_util.hpp"

namespace latefuse::text {
namespace {

struct Golden {
  std::string input;
  std::vector<std::string_view> stopwords;
  std::string expected;
};

const std::vector<Golden>& goldens() {
  static const std::vector<Golden> g = {
      {"RT @u GREAT daaaay http://x.co &amp; the best!!!", {"the"}, "great daay best"},
      {"", {}, ""},
      {"hello", {}, "hello"},
      {"a &amp; b", {}, "a b"},
      {"so happy!!!", {}, "so happy"},
      {"c'mon", {}, "c mon"},
      {"The THE the cat", {"the"}, "cat"},
      {"sooo happppyy", {}, "soo happyy"},
      {"see https://t.co/x now", {}, "see now"},
      {"RT @bob hello", {}, "hello"},
      {"I LOVE it &lt;3", {"i", "it"}, "love 3"},
      {"Check www.example.com NOW!!!", {}, "check ww example com now"},
      {"&#38;&#x26; yes", {}, "yes"},
      {"Nooooo!!!! :( so sad", {"so"}, "noo sad"},
      {"caf\xc3\xa9 au lait", {}, "caf au lait"},
      {"hello\tworld\n", {}, "hello world"},
      {"@Alice: thanks!", {}, "thanks"},
      {"WOW 100000 likes", {}, "wow 100 likes"},
      {"&amp;amp; done", {}, "amp done"},
      {"rt RT Rt hello", {}, "hello"},
      {"Don't stop", {"don't"}, "stop"},
      {"link (http://x.co) here", {}, "link here"},
  };
  return g;
}

TEST(TextPrep, GoldenPairs) {
  for (const auto& g : goldens()) {
    StopwordSet sw;
    for (auto w : g.stopwords) sw.insert(w);
    EXPECT_EQ(clean_pipeline(g.input, sw), g.expected) << g.input;
  }
}

TEST(TextPrep, StepExamples) {
  EXPECT_EQ(decode_html_entities("a &amp; b"), "a & b");
  EXPECT_EQ(decode_html_entities("&#38;"), "&");
  EXPECT_EQ(decode_html_entities("&#x26;"), "&");
  EXPECT_EQ(decode_html_entities("&amp;amp;"), "&amp;");
  EXPECT_EQ(decode_html_entities("&bogus; &"), "&bogus; &");
  EXPECT_EQ(decode_html_entities("&quot;hi&quot; &lt;3"), "\"hi\" <3");

  EXPECT_EQ(lowercase("SoOO"), "sooo");
  EXPECT_EQ(lowercase("abc"), "abc");
  EXPECT_EQ(lowercase("RT"), "rt");
  EXPECT_EQ(lowercase("\xc3\x89T\xc3\x89"), "\xc3\xa9t\xc3\xa9");  // ÉTÉ

  EXPECT_EQ(strip_social_tokens("RT @bob hello"), "hello");
  EXPECT_EQ(strip_social_tokens("see https://t.co/x now"), "see now");
  EXPECT_EQ(strip_social_tokens("hello world"), "hello world");
  EXPECT_EQ(strip_social_tokens("WWW.site.org ok"), "ok");

  EXPECT_EQ(squeeze_repeats("aaaa"), "aa");
  EXPECT_EQ(squeeze_repeats("abc"), "abc");
  EXPECT_EQ(squeeze_repeats("sooo happppyy"), "soo happyy");
  EXPECT_EQ(squeeze_repeats("\xc3\xa9\xc3\xa9\xc3\xa9"), "\xc3\xa9\xc3\xa9");

  EXPECT_EQ(remove_punctuation("so happy!!!"), "so happy");
  EXPECT_EQ(remove_punctuation("a & b"), "a b");
  EXPECT_EQ(remove_punctuation("c'mon"), "c mon");
  EXPECT_EQ(remove_punctuation("  x \xf0\x9f\x98\x80 y  "), "x y");

  const StopwordSet the{"the"};
  EXPECT_EQ(remove_stopwords("the cat", the), "cat");
  EXPECT_EQ(remove_stopwords("cat", the), "cat");
  EXPECT_EQ(remove_stopwords("The THE the", the), "");
}

/// Random text mixing the constructs the cleaner targets.
std::string fuzz_text(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "RT",     "rt",      "@user",   "@",     "http://a.b/c", "https://t.co/X", "www.x.org",
      "&amp;",  "&#38;",   "&lt;",    "&#x1F600;", "&bogus;", "HELLO",  "hello", "sooooo",
      "!!!!",   "...",     "'",       "\"",    "(",            ")",      "#tag",  "123",
      "0000",   "\xc3\xa9", "\xc3\x89", "\xf0\x9f\x98\x80", "\xce\xa3", "\xff", "  ",
      "\t",     "\n",      "the",     "The",   "AAAA",         "aaA",    "x",     "rt@bob",
      "(http",  "Https",   "_",       "-",     "caf\xc3\xa9",  "www",    "httpx", "R",
      "T",
  };
  const auto n = uniform_int(rng, 0, 25);
  std::string s;
  for (std::int64_t i = 0; i < n; ++i) {
    s += pieces[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(pieces.size()) - 1))];
    if (uniform01(rng) < 0.5) s += ' ';
  }
  return s;
}

void expect_clean_invariants(const std::string& out, const std::string& input) {
  std::size_t run = 0;
  char prev = '\0';
  for (char c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ';
    ASSERT_TRUE(ok) << "bad char in '" << out << "' from '" << input << "'";
    run = (c == prev) ? run + 1 : 1;
    prev = c;
    ASSERT_LT(run, 3u) << out;
  }
  ASSERT_TRUE(out.empty() || (out.front() != ' ' && out.back() != ' ')) << out;
  ASSERT_EQ(out.find("  "), std::string::npos) << out;
  std::size_t start = 0;
  while (start < out.size()) {
    auto end = out.find(' ', start);
    if (end == std::string::npos) end = out.size();
    const auto tok = out.substr(start, end - start);
    ASSERT_NE(tok, "rt") << "from '" << input << "'";
    ASSERT_FALSE(tok.starts_with("@")) << out;
    ASSERT_FALSE(tok.starts_with("http")) << "token '" << tok << "' from '" << input << "'";
    ASSERT_FALSE(tok.starts_with("www.")) << out;
    start = end + 1;
  }
}

TEST(TextPrep, FuzzedPipelineInvariants) {
  const StopwordSet sw{"the", "a", "is"};
  Rng rng(2024);
  for (int i = 0; i < 3000; ++i) {
    const auto s = fuzz_text(rng);
    expect_clean_invariants(clean_pipeline(s, sw), s);
  }
}

TEST(TextPrep, StepsAreIdempotent) {
  const StopwordSet sw{"the", "a", "is"};
  Rng rng(77);
  for (int i = 0; i < 2000; ++i) {
    const auto s = fuzz_text(rng);
    const auto low = lowercase(s);
    EXPECT_EQ(lowercase(low), low);
    const auto sq = squeeze_repeats(s);
    EXPECT_EQ(squeeze_repeats(sq), sq) << s;
    const auto pu = remove_punctuation(low);
    EXPECT_EQ(remove_punctuation(pu), pu);
    const auto st = remove_stopwords(s, sw);
    EXPECT_EQ(remove_stopwords(st, sw), st);
    const auto so = strip_social_tokens(s);
    EXPECT_EQ(strip_social_tokens(so), so) << s;
  }
}

TEST(TextPrep, EntityDecodingIsSinglePass) {
  const std::string once = decode_html_entities("&amp;amp;");
  EXPECT_NE(decode_html_entities(once), once);
}

TEST(TextPrep, StopwordFileLoads) {
  const auto set = StopwordSet::load(testing::data_dir() / "stopwords_en.txt");
  EXPECT_EQ(set.size(), 179u);
  EXPECT_TRUE(set.contains("the"));
  EXPECT_TRUE(set.contains("don't"));
  EXPECT_FALSE(set.contains("happy"));
  EXPECT_THROW(StopwordSet::load("/nonexistent/stopwords"), FormatError);
  EXPECT_THROW(StopwordSet({"two words"}), ContractError);
}

TEST(TextPrep, LexiconExamples) {
  const Lexicon lex{{"happy", 0.8}, {"good", 0.7}, {"bad", -0.7}};
  auto r = lexicon_polarity("happy", lex);
  EXPECT_DOUBLE_EQ(r.score, 0.8);
  EXPECT_EQ(r.polarity, Polarity::Positive);
  r = lexicon_polarity("good bad", lex);
  EXPECT_DOUBLE_EQ(r.score, 0.0);
  EXPECT_EQ(r.polarity, Polarity::Neutral);
  r = lexicon_polarity("", Lexicon{});
  EXPECT_DOUBLE_EQ(r.score, 0.0);
  EXPECT_EQ(r.polarity, Polarity::Neutral);
  r = lexicon_polarity("happy day", lex);  // unknown words count as 0
  EXPECT_DOUBLE_EQ(r.score, 0.4);
  EXPECT_THROW(Lexicon({{"x", 1.5}}), ContractError);
}

TEST(TextPrep, ThresholdsAreStrict) {
  EXPECT_EQ(classify_score(0.1), Polarity::Neutral);
  EXPECT_EQ(classify_score(-0.1), Polarity::Neutral);
  EXPECT_EQ(classify_score(0.10001), Polarity::Positive);
  EXPECT_EQ(classify_score(-0.10001), Polarity::Negative);
  EXPECT_EQ(classify_score(0.0), Polarity::Neutral);
}

TEST(TextPrep, LexiconScoreStaysBounded) {
  const auto lex = Lexicon::load(testing::data_dir() / "lexicon_en.tsv");
  EXPECT_GT(lex.size(), 100u);
  Rng rng(3);
  const std::vector<std::string> words = {"good", "bad", "worst", "excellent", "table", "happy",
                                          "sad", "zzz"};
  for (int i = 0; i < 500; ++i) {
    std::string s;
    const auto n = uniform_int(rng, 0, 12);
    for (std::int64_t k = 0; k < n; ++k) {
      s += words[static_cast<std::size_t>(uniform_int(rng, 0, 7))] + " ";
    }
    const auto r = lexicon_polarity(s, lex);
    EXPECT_GE(r.score, -1.0);
    EXPECT_LE(r.score, 1.0);
    EXPECT_EQ(r.polarity, classify_score(r.score));
  }
}

TEST(TextPrep, LexiconFileErrorsNameTheLine) {
  const auto dir = testing::scratch_dir();
  testing::spit(dir / "lex.tsv", "# header\ngood\t0.5\nbroken line\n");
  try {
    Lexicon::load(dir / "lex.tsv");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace latefuse::text
