#pragma once

// Word vocabularies, character alphabets and fixed-length index encodings.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/corpus.hpp"
#include "quadcode/error.hpp"
#include "quadcode/nn/tensor.hpp"
#include "quadcode/rng.hpp"
#include "quadcode/softlabel.hpp"
#include "quadcode/unicode.hpp"

namespace quadcode {

inline constexpr std::int32_t kPadIndex = 0;
inline constexpr std::int32_t kUnkIndex = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

enum class EncodingErrorKind { kDimensionMismatch, kParseError, kInvalidConfig };
using EncodingError = KindedError<EncodingErrorKind>;

namespace detail {
inline std::string key_text(const std::string& s) { return s; }
inline std::string key_text(char32_t cp) { return encode_utf8(std::u32string_view(&cp, 1)); }
}  // namespace detail

// Dense index over symbols (word tokens or codepoints). Index 0 is PAD and 1
// is UNK; the rest are ranked by (count desc, symbol asc).
template <typename Key>
class Lexicon {
 public:
  struct Entry {
    Key key;
    std::size_t count;
  };

  Lexicon() = default;

  static Lexicon from_counts(const std::unordered_map<Key, std::size_t>& counts,
                             std::size_t max_size, std::size_t min_count) {
    std::vector<Entry> ranked;
    for (const auto& [key, count] : counts) {
      if (count >= min_count) ranked.push_back({key, count});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Entry& a, const Entry& b) {
      return a.count != b.count ? a.count > b.count : a.key < b.key;
    });
    const std::size_t keep = max_size > 2 ? max_size - 2 : 0;
    if (ranked.size() > keep) ranked.resize(keep);
    Lexicon lex;
    for (auto& e : ranked) lex.push(std::move(e));
    return lex;
  }

  std::size_t size() const noexcept { return entries_.size() + 2; }

  std::int32_t index_of(const Key& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? kUnkIndex : it->second;
  }

  bool contains(const Key& key) const { return index_.contains(key); }

  // Non-reserved entries in index order (index = position + 2).
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  // JSONL lines of {token, index, count}, reserved entries first.
  std::string to_jsonl() const {
    std::string out;
    auto line = [&](std::string token, std::size_t index, std::size_t count) {
      nlohmann::ordered_json j;
      j["token"] = std::move(token);
      j["index"] = index;
      j["count"] = count;
      out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) + "\n";
    };
    line(std::string(kPadToken), 0, 0);
    line(std::string(kUnkToken), 1, 0);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      line(detail::key_text(entries_[i].key), i + 2, entries_[i].count);
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (const auto& e : entries_) {
      tokens.push_back(nlohmann::ordered_json::array({detail::key_text(e.key), e.count}));
    }
    return tokens;
  }

  static Lexicon from_json(const nlohmann::json& tokens) {
    Lexicon lex;
    for (const auto& item : tokens) {
      const std::string text = item.at(0).get<std::string>();
      lex.push({parse_key(text), item.at(1).get<std::size_t>()});
    }
    return lex;
  }

  static Lexicon from_jsonl(std::string_view text) {
    Lexicon lex;
    std::size_t line_no = 0;
    for (std::string_view line : split_lines(text)) {
      ++line_no;
      if (trim(line).empty()) continue;
      auto fail = [&](const std::string& why) {
        return EncodingError(EncodingErrorKind::kParseError,
                             "lexicon line " + std::to_string(line_no) + ": " + why);
      };
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        const auto index = j.at("index").get<std::size_t>();
        const auto token = j.at("token").get<std::string>();
        const auto count = j.at("count").get<std::size_t>();
        if (index < 2) {
          const std::string_view expected = index == 0 ? kPadToken : kUnkToken;
          if (token != expected) throw fail("reserved index must hold " + std::string(expected));
          continue;
        }
        if (index != lex.size()) throw fail("indices must be dense and ascending");
        lex.push({parse_key(token), count});
      } catch (const nlohmann::json::exception& e) {
        throw fail(e.what());
      }
    }
    return lex;
  }

  friend bool operator==(const Lexicon& a, const Lexicon& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].key != b.entries_[i].key || a.entries_[i].count != b.entries_[i].count) {
        return false;
      }
    }
    return true;
  }

 private:
  static Key parse_key(const std::string& text) {
    if constexpr (std::is_same_v<Key, char32_t>) {
      const auto cps = decode_utf8(text);
      if (cps.size() != 1) {
        throw EncodingError(EncodingErrorKind::kParseError,
                            "alphabet entry \"" + text + "\" is not a single codepoint");
      }
      return cps[0];
    } else {
      return text;
    }
  }

  void push(Entry e) {
    const auto index = static_cast<std::int32_t>(size());
    if (!index_.emplace(e.key, index).second) {
      throw EncodingError(EncodingErrorKind::kParseError,
                          "duplicate lexicon entry \"" + detail::key_text(e.key) + "\"");
    }
    entries_.push_back(std::move(e));
  }

  std::vector<Entry> entries_;
  std::unordered_map<Key, std::int32_t> index_;
};

using Vocabulary = Lexicon<std::string>;
using CharAlphabet = Lexicon<char32_t>;

// Tokens are ranked over the training split only; the reserved names never
// become ordinary entries.
inline Vocabulary build_vocab(std::span<const SentenceRecord> records, std::size_t max_size,
                              std::size_t min_count = 1) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    for (auto& t : tokenize(r.text)) {
      if (t != kPadToken && t != kUnkToken) ++counts[std::move(t)];
    }
  }
  return Vocabulary::from_counts(counts, max_size, std::max<std::size_t>(min_count, 1));
}

inline CharAlphabet build_alphabet(std::span<const SentenceRecord> records, std::size_t max_size) {
  std::unordered_map<char32_t, std::size_t> counts;
  for (const auto& r : records) {
    for (char32_t cp : decode_utf8(r.text)) ++counts[to_lower(cp)];
  }
  return CharAlphabet::from_counts(counts, max_size, 1);
}

// OOV -> UNK, truncate right, pad right with PAD.
inline std::vector<std::int32_t> encode_words(const Vocabulary& vocab,
                                              std::span<const std::string> tokens,
                                              std::size_t length) {
  std::vector<std::int32_t> out(length, kPadIndex);
  const std::size_t n = std::min(length, tokens.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = vocab.index_of(tokens[i]);
  return out;
}

// Codepoints of the lowercased text, whitespace included.
inline std::vector<std::int32_t> encode_chars(const CharAlphabet& alphabet, std::string_view text,
                                              std::size_t length) {
  std::vector<std::int32_t> out(length, kPadIndex);
  const std::u32string cps = decode_utf8(text);
  const std::size_t n = std::min(length, cps.size());
  for (std::size_t i = 0; i < n; ++i) out[i] = alphabet.index_of(to_lower(cps[i]));
  return out;
}

struct EncodedExample {
  std::vector<std::int32_t> indices;
  int label = 0;
};

enum class InputKind { kWord, kChar };

inline std::string_view to_string(InputKind k) { return k == InputKind::kWord ? "word" : "char"; }

inline InputKind parse_input_kind(std::string_view s) {
  if (s == "word") return InputKind::kWord;
  if (s == "char") return InputKind::kChar;
  throw EncodingError(EncodingErrorKind::kInvalidConfig,
                      "model kind must be \"word\" or \"char\", got \"" + std::string(s) + "\"");
}

// Turns raw text into model input for one model kind.
struct TextEncoder {
  InputKind kind = InputKind::kChar;
  std::size_t seq_len = 512;
  Vocabulary vocab;       // word models
  CharAlphabet alphabet;  // char models

  std::size_t symbol_count() const {
    return kind == InputKind::kWord ? vocab.size() : alphabet.size();
  }

  std::vector<std::int32_t> encode(std::string_view text) const {
    if (kind == InputKind::kWord) return encode_words(vocab, tokenize(text), seq_len);
    return encode_chars(alphabet, text, seq_len);
  }

  // Labelled records only; unlabelled records are an error.
  std::vector<EncodedExample> encode_all(std::span<const SentenceRecord> records) const {
    std::vector<EncodedExample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      if (!r.label) {
        throw CorpusError(CorpusErrorKind::kUnlabelledRecord, "record \"" + r.id + "\" has no label");
      }
      out.push_back({encode(r.text), class_index(*r.label)});
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(kind));
    j["seq_len"] = seq_len;
    j["symbols"] = kind == InputKind::kWord ? vocab.to_json() : alphabet.to_json();
    return j;
  }

  static TextEncoder from_json(const nlohmann::json& j) {
    TextEncoder e;
    e.kind = parse_input_kind(j.at("kind").get<std::string>());
    e.seq_len = j.at("seq_len").get<std::size_t>();
    if (e.kind == InputKind::kWord) {
      e.vocab = Vocabulary::from_json(j.at("symbols"));
    } else {
      e.alphabet = CharAlphabet::from_json(j.at("symbols"));
    }
    return e;
  }
};

// Row r of a fresh table draws from its own stream, so rows do not depend on
// which other rows were loaded from a file.
inline nn::Tensor random_embeddings(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  nn::Tensor table({rows, dim});
  const Rng root(seed);
  for (std::size_t r = 1; r < rows; ++r) {
    Rng rng = root.split(r);
    for (std::size_t j = 0; j < dim; ++j) table(r, j) = rng.uniform(-0.25, 0.25);
  }
  return table;
}

// Text vectors, one `token v1 ... vd` per line. A leading `count dim` header
// line is skipped. Tokens outside the vocabulary are ignored.
inline nn::Tensor load_embeddings(const std::string& path, const Vocabulary& vocab,
                                  std::size_t dim, std::uint64_t seed) {
  nn::Tensor table = random_embeddings(vocab.size(), dim, seed);
  std::vector<bool> loaded(vocab.size(), false);
  std::size_t line_no = 0;
  const std::string text = read_file(path);
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && dim != 1) {
      std::size_t a = 0;
      if (std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a).ec == std::errc{}) {
        continue;
      }
    }
    if (fields.size() != dim + 1) {
      throw EncodingError(EncodingErrorKind::kDimensionMismatch,
                          path + " line " + std::to_string(line_no) + ": expected " +
                              std::to_string(dim) + " values, got " +
                              std::to_string(fields.size() - 1));
    }
    std::vector<double> values(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[j + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[j]);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(values[j])) {
        throw EncodingError(EncodingErrorKind::kParseError,
                            path + " line " + std::to_string(line_no) + ": bad number \"" +
                                std::string(f) + "\"");
      }
    }
    const std::string token(fields[0]);
    if (!vocab.contains(token)) continue;
    const auto row = static_cast<std::size_t>(vocab.index_of(token));
    if (loaded[row]) continue;
    loaded[row] = true;
    for (std::size_t j = 0; j < dim; ++j) table(row, j) = values[j];
  }
  return table;
}

}  // namespace quadcode
