#include <gtest/gtest.h>

#include "quadcode/text_encoding.hpp"
#include "quadcode/unicode.hpp"
#include "test_support.hpp"

namespace quadcode {
namespace {

using Indices = std::vector<std::int32_t>;

SentenceRecord rec(const std::string& text) {
  SentenceRecord r;
  r.id = text;
  r.lang = "en";
  r.text = text;
  return r;
}

TEST(Vocabulary, RankingAndReserved) {
  const std::vector<SentenceRecord> corpus = {rec("a b"), rec("a")};
  const auto v = build_vocab(corpus, 100, 1);
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.index_of("a"), 2);
  EXPECT_EQ(v.index_of("b"), 3);
  EXPECT_EQ(v.index_of("zzz"), kUnkIndex);

  const auto v2 = build_vocab(corpus, 100, 2);
  EXPECT_EQ(v2.size(), 3u);
  EXPECT_TRUE(v2.contains("a"));
  EXPECT_FALSE(v2.contains("b"));
}

TEST(Vocabulary, TiesAreLexicographic) {
  const std::vector<SentenceRecord> corpus = {rec("pear apple fig"), rec("fig apple pear")};
  const auto v = build_vocab(corpus, 100);
  EXPECT_EQ(v.index_of("apple"), 2);
  EXPECT_EQ(v.index_of("fig"), 3);
  EXPECT_EQ(v.index_of("pear"), 4);
}

TEST(Vocabulary, MaxSizeIncludesReserved) {
  const std::vector<SentenceRecord> corpus = {rec("a a a b b c")};
  const auto v = build_vocab(corpus, 4);
  EXPECT_EQ(v.size(), 4u);
  EXPECT_TRUE(v.contains("b"));
  EXPECT_FALSE(v.contains("c"));
}

TEST(Vocabulary, ReservedNamesNeverIndexed) {
  const std::vector<SentenceRecord> corpus = {rec("<pad> <unk> x")};
  const auto v = build_vocab(corpus, 100);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.index_of("x"), 2);
}

TEST(Vocabulary, SerializationRoundTrip) {
  const std::vector<SentenceRecord> corpus = {rec("the cat sat on the mat"), rec("قصف الجيش")};
  const auto v = build_vocab(corpus, 100);
  EXPECT_EQ(Vocabulary::from_json(nlohmann::json::parse(v.to_json().dump())), v);
  const std::string lines = v.to_jsonl();
  const auto back = Vocabulary::from_jsonl(lines);
  EXPECT_EQ(back, v);
  EXPECT_EQ(back.to_jsonl(), lines);
}

TEST(EncodeWords, PadUnkTruncate) {
  const std::vector<SentenceRecord> corpus = {rec("a b"), rec("a")};
  const auto v = build_vocab(corpus, 100);
  EXPECT_EQ(encode_words(v, std::vector<std::string>{"a"}, 3), (Indices{2, 0, 0}));
  EXPECT_EQ(encode_words(v, std::vector<std::string>{"q"}, 3), (Indices{1, 0, 0}));
  EXPECT_EQ(encode_words(v, std::vector<std::string>{"a", "b", "b", "a", "a"}, 3), (Indices{2, 3, 3}));
  EXPECT_EQ(encode_words(v, std::vector<std::string>{}, 3), (Indices{0, 0, 0}));
}

TEST(EncodeChars, Basic) {
  const std::vector<SentenceRecord> corpus = {rec("aab")};
  const auto a = build_alphabet(corpus, 100);
  EXPECT_EQ(a.index_of(U'a'), 2);
  EXPECT_EQ(a.index_of(U'b'), 3);
  EXPECT_EQ(encode_chars(a, "ab", 4), (Indices{2, 3, 0, 0}));
  EXPECT_EQ(encode_chars(a, "AB", 4), (Indices{2, 3, 0, 0}));
  EXPECT_EQ(encode_chars(a, "abzab", 3), (Indices{2, 3, 1}));
  EXPECT_EQ(encode_chars(a, "", 2), (Indices{0, 0}));
}

TEST(EncodeChars, ArabicIsByCodepoint) {
  const std::string text = "قصف الجيش";
  const std::vector<SentenceRecord> corpus = {rec(text)};
  const auto a = build_alphabet(corpus, 100);
  const auto cps = decode_utf8(text);
  const auto enc = encode_chars(a, text, 20);
  ASSERT_EQ(cps.size(), 9u);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    ASSERT_GE(enc[i], 2);
    EXPECT_EQ(a.entries()[static_cast<std::size_t>(enc[i] - 2)].key, cps[i]);
  }
  for (std::size_t i = cps.size(); i < enc.size(); ++i) EXPECT_EQ(enc[i], kPadIndex);
}

TEST(EncodeChars, RandomUnicodeRoundTrip) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::u32string cps;
    const std::size_t n = rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      char32_t cp;
      do {
        cp = static_cast<char32_t>(0x21 + rng.below(0x2FFFF));
      } while ((cp >= 0xD800 && cp <= 0xDFFF) || to_lower(cp) != cp);
      cps.push_back(cp);
    }
    const std::string text = encode_utf8(cps);
    ASSERT_EQ(decode_utf8(text), cps);
    const std::vector<SentenceRecord> corpus = {rec(text.empty() ? "x" : text)};
    const auto a = build_alphabet(corpus, 1000);
    const auto enc = encode_chars(a, text, 40);
    ASSERT_EQ(enc.size(), 40u);
    std::u32string decoded;
    for (auto idx : enc) {
      if (idx == kPadIndex) break;
      decoded.push_back(a.entries()[static_cast<std::size_t>(idx - 2)].key);
    }
    EXPECT_EQ(decoded, cps);
  }
}

TEST(TextEncoder, JsonRoundTrip) {
  const std::vector<SentenceRecord> corpus = {rec("Rebels attacked the village."), rec("قصف")};
  for (InputKind kind : {InputKind::kWord, InputKind::kChar}) {
    TextEncoder e;
    e.kind = kind;
    e.seq_len = 12;
    e.vocab = build_vocab(corpus, 50);
    e.alphabet = build_alphabet(corpus, 50);
    const auto back = TextEncoder::from_json(nlohmann::json::parse(e.to_json().dump()));
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(back.seq_len, 12u);
    EXPECT_EQ(back.encode("Rebels bombed the village"), e.encode("Rebels bombed the village"));
  }
}

TEST(Embeddings, LoadFromFile) {
  testing::TempDir dir("emb");
  const std::vector<SentenceRecord> corpus = {rec("a b c")};
  const auto v = build_vocab(corpus, 100);
  write_file(dir.file("full.txt"), "3 2\na 1 2\nb 3 4\nc 5 6\nzz 9 9\n");
  const auto t = load_embeddings(dir.file("full.txt"), v, 2, 1);
  EXPECT_EQ(t(0, 0), 0.0);
  EXPECT_EQ(t(0, 1), 0.0);
  EXPECT_EQ(t(static_cast<std::size_t>(v.index_of("a")), 1), 2.0);
  EXPECT_EQ(t(static_cast<std::size_t>(v.index_of("c")), 0), 5.0);

  write_file(dir.file("empty.txt"), "");
  const auto r = load_embeddings(dir.file("empty.txt"), v, 2, 1);
  EXPECT_EQ(r, random_embeddings(v.size(), 2, 1));
  for (std::size_t row = 1; row < v.size(); ++row) {
    EXPECT_NE(r(row, 0), 0.0);
    EXPECT_LE(std::abs(r(row, 0)), 0.25);
  }
  EXPECT_EQ(r(0, 0), 0.0);

  write_file(dir.file("bad.txt"), "a 1 2 3\n");
  try {
    load_embeddings(dir.file("bad.txt"), v, 2, 1);
    FAIL();
  } catch (const EncodingError& e) {
    EXPECT_EQ(e.kind(), EncodingErrorKind::kDimensionMismatch);
  }
  write_file(dir.file("nan.txt"), "a 1 x\n");
  EXPECT_THROW(load_embeddings(dir.file("nan.txt"), v, 2, 1), EncodingError);
}

}  // namespace
}  // namespace quadcode
