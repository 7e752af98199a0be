#pragma once

// Dictionary-based soft labeling. Sentences are tokenized and scanned for
// verb phrases from a pattern dictionary; the leftmost-longest match supplies
// the sentence's CAMEO code and QuadClass. This is surface phrase matching,
// not parse-tree coding: there is no source/target attribution and no verb
// morphology.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "quadcode/corpus.hpp"
#include "quadcode/error.hpp"
#include "quadcode/ontology.hpp"
#include "quadcode/strings.hpp"
#include "quadcode/unicode.hpp"

namespace quadcode {

// Lowercases, splits on Unicode whitespace and strips leading and trailing
// punctuation (general category P*) from every token. Empty tokens vanish.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const std::u32string cps = decode_utf8(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_punctuation(cps[b])) ++b;
    while (e > b && is_punctuation(cps[e - 1])) --e;
    if (e > b) {
      std::string token;
      for (std::size_t k = b; k < e; ++k) append_utf8(token, to_lower(cps[k]));
      tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

struct VerbPattern {
  std::vector<std::string> tokens;
  CameoCode code;
};

struct MatchSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  CameoCode code;

  friend bool operator==(const MatchSpan&, const MatchSpan&) = default;
};

enum class DictionaryErrorKind { kDuplicatePattern, kInvalidPattern, kParseError };
using DictionaryError = KindedError<DictionaryErrorKind>;

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Token trie over verb phrases. Immutable once compiled.
class PatternDictionary {
 public:
  PatternDictionary() : nodes_(1) {}

  static PatternDictionary compile(std::span<const VerbPattern> patterns) {
    PatternDictionary dict;
    for (const auto& p : patterns) dict.insert(p);
    return dict;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  // Length of the longest pattern starting at `start`, with its code.
  std::optional<MatchSpan> longest_at(std::span<const std::string> tokens,
                                      std::size_t start) const {
    std::optional<MatchSpan> best;
    std::uint32_t node = 0;
    for (std::size_t i = start; i < tokens.size(); ++i) {
      const auto& children = nodes_[node].children;
      auto it = children.find(tokens[i]);
      if (it == children.end()) break;
      node = it->second;
      if (nodes_[node].code) {
        best = MatchSpan{start, i - start + 1, *nodes_[node].code};
      }
    }
    return best;
  }

  // Longest match at the leftmost position where any pattern matches.
  std::optional<MatchSpan> first_match(std::span<const std::string> tokens) const {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (auto m = longest_at(tokens, i)) return m;
    }
    return std::nullopt;
  }

  // Leftmost-longest, non-overlapping scan.
  std::vector<MatchSpan> match(std::span<const std::string> tokens) const {
    std::vector<MatchSpan> spans;
    std::size_t i = 0;
    while (i < tokens.size()) {
      if (auto m = longest_at(tokens, i)) {
        i += m->length;
        spans.push_back(std::move(*m));
      } else {
        ++i;
      }
    }
    return spans;
  }

 private:
  struct Node {
    std::unordered_map<std::string, std::uint32_t> children;
    std::optional<CameoCode> code;
  };

  void insert(const VerbPattern& p) {
    if (p.tokens.empty()) {
      throw DictionaryError(DictionaryErrorKind::kInvalidPattern,
                            "pattern for code " + p.code.digits() + " has no tokens");
    }
    std::uint32_t node = 0;
    for (const auto& token : p.tokens) {
      const bool bad = token.empty() ||
                       std::any_of(token.begin(), token.end(), is_ascii_space) ||
                       std::ranges::any_of(decode_utf8(token), is_space);
      if (bad) {
        throw DictionaryError(DictionaryErrorKind::kInvalidPattern,
                              "pattern token \"" + token + "\" is empty or has whitespace");
      }
      auto it = nodes_[node].children.find(token);
      if (it == nodes_[node].children.end()) {
        const auto next = static_cast<std::uint32_t>(nodes_.size());
        nodes_[node].children.emplace(token, next);
        nodes_.emplace_back();
        node = next;
      } else {
        node = it->second;
      }
    }
    if (nodes_[node].code) {
      throw DictionaryError(DictionaryErrorKind::kDuplicatePattern,
                            "duplicate pattern \"" + join_tokens(p.tokens) + "\"");
    }
    nodes_[node].code = p.code;
    ++size_;
  }

  std::vector<Node> nodes_;
  std::size_t size_ = 0;
};

inline PatternDictionary compile_dictionary(std::span<const VerbPattern> patterns) {
  return PatternDictionary::compile(patterns);
}

inline std::vector<MatchSpan> match_patterns(const PatternDictionary& dict,
                                             std::span<const std::string> tokens) {
  return dict.match(tokens);
}

// Reads `phrase tokens... -> CODE` lines. Phrases go through tokenize() so
// they normalize exactly like sentence text.
inline std::vector<VerbPattern> parse_dictionary_patterns(std::string_view text) {
  std::vector<VerbPattern> patterns;
  int line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    if (trim(line).empty()) continue;
    auto fail = [&](const std::string& why) {
      return DictionaryError(DictionaryErrorKind::kParseError,
                             "dictionary line " + std::to_string(line_no) + ": " + why);
    };
    const auto arrow = line.rfind("->");
    if (arrow == std::string_view::npos) throw fail("missing \"->\"");
    VerbPattern p{tokenize(line.substr(0, arrow)), CameoCode::parse("01")};
    if (p.tokens.empty()) throw fail("empty phrase");
    try {
      p.code = CameoCode::parse(line.substr(arrow + 2));
    } catch (const CameoError& e) {
      throw fail(e.what());
    }
    patterns.push_back(std::move(p));
  }
  return patterns;
}

inline PatternDictionary load_dictionary(const std::string& path) {
  const auto patterns = parse_dictionary_patterns(read_file(path));
  return PatternDictionary::compile(patterns);
}

struct SoftLabel {
  QuadClass quad;
  CameoCode code;

  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

struct LabelOptions {
  // When set, a sentence is labelled only if it contains one of these tokens.
  const std::unordered_set<std::string>* actor_words = nullptr;
};

// The first (leftmost) span decides the label.
inline std::optional<SoftLabel> label_sentence(const PatternDictionary& dict,
                                               const QuadClassMap& map,
                                               std::string_view text,
                                               const LabelOptions& options = {}) {
  const auto tokens = tokenize(text);
  if (options.actor_words) {
    const bool has_actor = std::any_of(tokens.begin(), tokens.end(), [&](const auto& t) {
      return options.actor_words->contains(t);
    });
    if (!has_actor) return std::nullopt;
  }
  const auto first = dict.first_match(tokens);
  if (!first) return std::nullopt;
  return SoftLabel{map.quad_of(first->code), first->code};
}

inline std::unordered_set<std::string> load_actor_words(const std::string& path) {
  std::unordered_set<std::string> words;
  const std::string text = read_file(path);
  for (std::string_view line : split_lines(text)) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    for (auto& t : tokenize(line)) words.insert(std::move(t));
  }
  return words;
}

// Labels a JSONL corpus. Only labelled records are written, in input order;
// any label or code already on a record is replaced.
inline ClassHistogram code_records(const PatternDictionary& dict,
                                   const QuadClassMap& map,
                                   std::span<const SentenceRecord> input,
                                   std::vector<SentenceRecord>& output,
                                   const LabelOptions& options = {}) {
  ClassHistogram histogram;
  for (const auto& record : input) {
    const auto label = label_sentence(dict, map, record.text, options);
    histogram.add(label ? std::optional(label->quad) : std::nullopt);
    if (!label) continue;
    SentenceRecord out = record;
    out.label = label->quad;
    out.cameo = label->code;
    output.push_back(std::move(out));
  }
  return histogram;
}

inline ClassHistogram code_corpus(const PatternDictionary& dict,
                                  const QuadClassMap& map,
                                  const std::string& input_path,
                                  const std::string& output_path,
                                  const LabelOptions& options = {}) {
  const std::vector<SentenceRecord> input = read_jsonl(input_path, map);
  std::vector<SentenceRecord> output;
  const ClassHistogram histogram = code_records(dict, map, input, output, options);
  write_jsonl(output, output_path);
  return histogram;
}

}  // namespace quadcode
