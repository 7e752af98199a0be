#pragma once

// Sentence corpora: JSONL I/O, cross-lingual label transfer over sentence
// alignments, stratified splitting and class histograms.

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/error.hpp"
#include "quadcode/ontology.hpp"
#include "quadcode/rng.hpp"
#include "quadcode/strings.hpp"

namespace quadcode {

struct SentenceRecord {
  std::string id;
  std::string lang;
  std::string text;
  std::optional<QuadClass> label;
  std::optional<CameoCode> cameo;
  std::optional<std::string> source;

  friend bool operator==(const SentenceRecord&, const SentenceRecord&) = default;
};

struct AlignmentPair {
  std::string src_id;
  std::string tgt_id;

  friend bool operator==(const AlignmentPair&, const AlignmentPair&) = default;
};

enum class CorpusErrorKind {
  kMalformedRecord,
  kDuplicateId,
  kUnknownId,
  kUnlabelledSource,
  kUnlabelledRecord,
  kInvalidFractions,
};
using CorpusError = KindedError<CorpusErrorKind>;

struct ClassHistogram {
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t unlabelled = 0;

  void add(std::optional<QuadClass> label) {
    if (label) {
      ++counts[class_index(*label)];
    } else {
      ++unlabelled;
    }
  }

  std::size_t labelled() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  }
  std::size_t total() const { return labelled() + unlabelled; }

  std::size_t operator[](QuadClass q) const { return counts[class_index(q)]; }

  friend bool operator==(const ClassHistogram&, const ClassHistogram&) = default;
};

inline ClassHistogram class_histogram(std::span<const SentenceRecord> records) {
  ClassHistogram h;
  for (const auto& r : records) h.add(r.label);
  return h;
}

// ---------------------------------------------------------------------------
// JSONL

inline nlohmann::ordered_json record_to_json(const SentenceRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["lang"] = r.lang;
  j["text"] = r.text;
  if (r.label) j["label"] = std::string(to_string(*r.label));
  if (r.cameo) j["cameo"] = r.cameo->digits();
  if (r.source) j["source"] = *r.source;
  return j;
}

namespace detail {

inline CorpusError malformed(const std::string& path, std::size_t line,
                             const std::string& why) {
  return CorpusError(CorpusErrorKind::kMalformedRecord,
                     path + ": malformed record at line " +
                         std::to_string(line) + ": " + why);
}

inline std::string required_string(const nlohmann::json& j, const char* key,
                                   const std::string& path, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw malformed(path, line, std::string("missing \"") + key + "\"");
  if (!it->is_string()) {
    throw malformed(path, line, std::string("\"") + key + "\" must be a string");
  }
  return it->get<std::string>();
}

inline bool is_language_code(const std::string& lang) {
  if (lang.size() != 2) return false;
  for (char c : lang) {
    if (c < 'a' || c > 'z') return false;
  }
  return true;
}

// Calls fn(line_number, parsed_object) for every non-blank line.
template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
  const std::string data = read_file(path);
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(data)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw malformed(path, line_no, e.what());
    }
    if (!j.is_object()) throw malformed(path, line_no, "not a JSON object");
    fn(line_no, j);
  }
}

}  // namespace detail

// Parses one record and checks its per-record invariants.
inline SentenceRecord record_from_json(const nlohmann::json& j,
                                       const QuadClassMap& map,
                                       const std::string& path = "<memory>",
                                       std::size_t line = 0) {
  SentenceRecord r;
  r.id = detail::required_string(j, "id", path, line);
  r.lang = detail::required_string(j, "lang", path, line);
  r.text = detail::required_string(j, "text", path, line);
  if (r.id.empty()) throw detail::malformed(path, line, "empty \"id\"");
  if (!detail::is_language_code(r.lang)) {
    throw detail::malformed(path, line,
                            "\"lang\" must be a two-letter ISO 639-1 code");
  }
  if (r.text.empty()) throw detail::malformed(path, line, "empty \"text\"");
  if (j.contains("label") && !j["label"].is_null()) {
    const std::string name = detail::required_string(j, "label", path, line);
    r.label = parse_quad_class(name);
    if (!r.label) throw detail::malformed(path, line, "unknown label \"" + name + "\"");
  }
  if (j.contains("cameo") && !j["cameo"].is_null()) {
    const std::string code = detail::required_string(j, "cameo", path, line);
    try {
      r.cameo = CameoCode::parse(code);
    } catch (const CameoError& e) {
      throw detail::malformed(path, line, e.what());
    }
  }
  if (j.contains("source") && !j["source"].is_null()) {
    r.source = detail::required_string(j, "source", path, line);
  }
  if (r.label && r.cameo && *r.label != map.quad_of(*r.cameo)) {
    throw detail::malformed(path, line,
                            "label disagrees with the QuadClass of cameo " +
                                r.cameo->digits());
  }
  return r;
}

inline std::vector<SentenceRecord> read_jsonl(
    const std::string& path,
    const QuadClassMap& map = QuadClassMap::default_map()) {
  std::vector<SentenceRecord> records;
  std::unordered_set<std::string> seen;
  detail::for_each_json_line(path, [&](std::size_t line, const nlohmann::json& j) {
    SentenceRecord r = record_from_json(j, map, path, line);
    if (!seen.insert(r.id).second) {
      throw CorpusError(CorpusErrorKind::kDuplicateId,
                        path + ": duplicate id \"" + r.id + "\" at line " +
                            std::to_string(line));
    }
    records.push_back(std::move(r));
  });
  return records;
}

inline std::string dump_line(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) + "\n";
}

inline std::string to_jsonl(std::span<const SentenceRecord> records) {
  std::string out;
  for (const auto& r : records) out += dump_line(record_to_json(r));
  return out;
}

inline void write_jsonl(std::span<const SentenceRecord> records,
                        const std::string& path) {
  write_file(path, to_jsonl(records));
}

inline std::vector<AlignmentPair> read_alignments(const std::string& path) {
  std::vector<AlignmentPair> pairs;
  detail::for_each_json_line(path, [&](std::size_t line, const nlohmann::json& j) {
    pairs.push_back({detail::required_string(j, "src_id", path, line),
                     detail::required_string(j, "tgt_id", path, line)});
  });
  return pairs;
}

inline void write_alignments(std::span<const AlignmentPair> pairs,
                             const std::string& path) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["src_id"] = p.src_id;
    j["tgt_id"] = p.tgt_id;
    out += dump_line(j);
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Label transfer

struct TransferReport {
  std::size_t pairs = 0;
  std::size_t targets_labelled = 0;
  // Pairs whose target already received a label from an earlier pair.
  std::size_t extra_pairs = 0;
  // Targets aligned to sources carrying more than one distinct label.
  std::size_t conflicting_targets = 0;
  std::size_t unaligned_targets = 0;

  friend bool operator==(const TransferReport&, const TransferReport&) = default;
};

struct TransferResult {
  std::vector<SentenceRecord> records;
  TransferReport report;
};

namespace detail {

inline std::unordered_map<std::string, std::size_t> index_by_id(
    std::span<const SentenceRecord> records, const char* what) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!index.emplace(records[i].id, i).second) {
      throw CorpusError(CorpusErrorKind::kDuplicateId,
                        std::string("duplicate id \"") + records[i].id +
                            "\" in " + what + " records");
    }
  }
  return index;
}

}  // namespace detail

// Copies each aligned source label (and CAMEO code) onto its target. A source
// aligned to several targets labels all of them; a target aligned to several
// sources keeps the label of the first pair in order. Targets that no pair
// mentions are dropped. Output keeps the target file order.
inline TransferResult transfer_labels(std::span<const SentenceRecord> src,
                                      std::span<const SentenceRecord> tgt,
                                      std::span<const AlignmentPair> pairs) {
  const auto src_index = detail::index_by_id(src, "source");
  const auto tgt_index = detail::index_by_id(tgt, "target");

  struct Assignment {
    std::optional<QuadClass> label;
    std::optional<CameoCode> cameo;
    bool conflicting = false;
  };
  std::vector<std::optional<Assignment>> assigned(tgt.size());
  TransferReport report;
  report.pairs = pairs.size();

  for (const auto& pair : pairs) {
    auto s = src_index.find(pair.src_id);
    if (s == src_index.end()) {
      throw CorpusError(CorpusErrorKind::kUnknownId,
                        "alignment references unknown source id \"" + pair.src_id + "\"");
    }
    auto t = tgt_index.find(pair.tgt_id);
    if (t == tgt_index.end()) {
      throw CorpusError(CorpusErrorKind::kUnknownId,
                        "alignment references unknown target id \"" + pair.tgt_id + "\"");
    }
    const SentenceRecord& source = src[s->second];
    if (!source.label) {
      throw CorpusError(CorpusErrorKind::kUnlabelledSource,
                        "aligned source \"" + source.id + "\" has no label");
    }
    auto& slot = assigned[t->second];
    if (!slot) {
      slot = Assignment{source.label, source.cameo, false};
      ++report.targets_labelled;
      continue;
    }
    ++report.extra_pairs;
    if (slot->label != source.label && !slot->conflicting) {
      slot->conflicting = true;
      ++report.conflicting_targets;
    }
  }

  TransferResult result;
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    if (!assigned[i]) {
      ++report.unaligned_targets;
      continue;
    }
    SentenceRecord r = tgt[i];
    r.label = assigned[i]->label;
    r.cameo = assigned[i]->cameo;
    result.records.push_back(std::move(r));
  }
  result.report = report;
  return result;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<SentenceRecord> train;
  std::vector<SentenceRecord> dev;
  std::vector<SentenceRecord> test;
  std::uint64_t seed = 0;
  SplitFractions fractions;
};

inline void validate_fractions(const SplitFractions& f) {
  const bool finite = std::isfinite(f.train) && std::isfinite(f.dev) &&
                      std::isfinite(f.test);
  if (!finite || f.train < 0 || f.dev < 0 || f.test < 0 ||
      std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw CorpusError(CorpusErrorKind::kInvalidFractions,
                      "split fractions must be non-negative and sum to 1");
  }
}

// Per-class shuffle, then cumulative rounding of the class size. Each split's
// share of every class is within one record of exact. Records keep their
// input order inside each split.
inline DatasetSplit stratified_split(std::span<const SentenceRecord> records,
                                     const SplitFractions& fractions,
                                     std::uint64_t seed) {
  validate_fractions(fractions);
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label) {
      throw CorpusError(CorpusErrorKind::kUnlabelledRecord,
                        "cannot split unlabelled record \"" + records[i].id + "\"");
    }
    by_class[class_index(*records[i].label)].push_back(i);
  }

  // 0 = train, 1 = dev, 2 = test
  std::vector<int> destination(records.size(), 0);
  const Rng root(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[c];
    Rng rng = root.split(static_cast<std::uint64_t>(c));
    rng.shuffle(std::span(members));
    const double n = static_cast<double>(members.size());
    const auto train_end = static_cast<std::size_t>(std::llround(fractions.train * n));
    const auto dev_end = std::max(
        train_end,
        static_cast<std::size_t>(std::llround((fractions.train + fractions.dev) * n)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      destination[members[k]] = k < train_end ? 0 : (k < dev_end ? 1 : 2);
    }
  }

  DatasetSplit split;
  split.seed = seed;
  split.fractions = fractions;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& bucket = destination[i] == 0 ? split.train
                   : destination[i] == 1 ? split.dev
                                         : split.test;
    bucket.push_back(records[i]);
  }
  return split;
}

}  // namespace quadcode
