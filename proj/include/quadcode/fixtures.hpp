#pragma once

// Synthetic corpora with a known decision rule. Every sentence carries one
// class-specific verb among shared actor and object phrases, so the label is
// recoverable from a single token (word models) or character n-gram (char
// models). English-like and Arabic-like vocabularies are provided.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "quadcode/corpus.hpp"
#include "quadcode/ontology.hpp"
#include "quadcode/rng.hpp"

namespace quadcode::fixtures {

struct Keyword {
  std::string_view text;
  std::string_view code;
};

struct Lexicon {
  std::string_view lang;
  // Indexed by class index.
  std::array<std::array<Keyword, 3>, kNumClasses> verbs;
  std::array<std::string_view, 8> actors;
  std::array<std::string_view, 8> objects;
  std::array<std::string_view, 6> tails;
  bool verb_first;  // VSO order
};

inline constexpr Lexicon kEnglish{
    "en",
    {{{{{"praised", "051"}, {"welcomed", "050"}, {"consulted", "040"}}},
      {{{"donated", "070"}, {"delivered", "073"}, {"freed", "0841"}}},
      {{{"condemned", "111"}, {"threatened", "130"}, {"accused", "112"}}},
      {{{"attacked", "190"}, {"bombed", "195"}, {"besieged", "191"}}}}},
    {"the minister", "rebels", "police", "the president", "protesters", "the government",
     "officials", "troops"},
    {"the village", "the capital", "the opposition", "the council", "the envoy", "the city",
     "local leaders", "the army"},
    {"on monday", "near the border", "in the north", "late on friday", "this week", "again"},
    false};

inline constexpr Lexicon kArabic{
    "ar",
    {{{{{"أشاد", "051"}, {"رحب", "050"}, {"تشاور", "040"}}},
      {{{"تبرع", "070"}, {"سلم", "073"}, {"أفرج", "0841"}}},
      {{{"أدان", "111"}, {"هدد", "130"}, {"اتهم", "112"}}},
      {{{"هاجم", "190"}, {"قصف", "195"}, {"حاصر", "191"}}}}},
    {"الوزير", "المتمردون", "الشرطة", "الرئيس", "المحتجون", "الحكومة", "المسؤولون", "القوات"},
    {"القرية", "العاصمة", "المعارضة", "المجلس", "المبعوث", "المدينة", "القادة المحليين", "الجيش"},
    {"يوم الاثنين", "قرب الحدود", "في الشمال", "مساء الجمعة", "هذا الأسبوع", "مجددا"},
    true};

inline const Lexicon& lexicon_for(std::string_view lang) {
  return lang == "ar" ? kArabic : kEnglish;
}

struct Sentence {
  std::string text;
  int label;
  std::string code;
};

// Sentence i has class i % 4; all other choices come from the stream.
inline Sentence make_sentence(const Lexicon& lex, int label, Rng& rng) {
  const auto& verb = lex.verbs[label][rng.below(3)];
  const std::string_view actor = lex.actors[rng.below(lex.actors.size())];
  const std::string_view object = lex.objects[rng.below(lex.objects.size())];
  std::string text;
  if (lex.verb_first) {
    text = std::string(verb.text) + " " + std::string(actor) + " " + std::string(object);
  } else {
    text = std::string(actor) + " " + std::string(verb.text) + " " + std::string(object);
  }
  if (rng.below(2) == 0) text += " " + std::string(lex.tails[rng.below(lex.tails.size())]);
  text += lex.lang == "ar" ? "." : ".";
  if (!lex.verb_first && text[0] >= 'a' && text[0] <= 'z') text[0] = static_cast<char>(text[0] - 32);
  return {std::move(text), label, std::string(verb.code)};
}

struct CorpusOptions {
  std::size_t count = 100;
  std::string lang = "en";
  std::uint64_t seed = 1;
  std::string id_prefix = "s";
  std::string source = "fixture";
  bool with_labels = true;
};

// Balanced when count is a multiple of 4.
inline std::vector<SentenceRecord> separable_corpus(const CorpusOptions& o) {
  const Lexicon& lex = lexicon_for(o.lang);
  const Rng root(o.seed);
  std::vector<SentenceRecord> out;
  out.reserve(o.count);
  for (std::size_t i = 0; i < o.count; ++i) {
    Rng rng = root.split(i);
    Sentence s = make_sentence(lex, static_cast<int>(i % kNumClasses), rng);
    SentenceRecord r;
    r.id = o.id_prefix + std::to_string(i);
    r.lang = std::string(lex.lang);
    r.text = std::move(s.text);
    if (o.with_labels) {
      r.label = class_from_index(s.label);
      r.cameo = CameoCode::parse(s.code);
    }
    r.source = o.source;
    out.push_back(std::move(r));
  }
  return out;
}

struct AlignedCorpus {
  std::vector<SentenceRecord> source;  // labelled English
  std::vector<SentenceRecord> target;  // unlabelled Arabic
  std::vector<AlignmentPair> pairs;
  std::vector<SentenceRecord> target_gold;  // target with the labels transfer must produce
};

// Each English sentence aligns to one Arabic sentence of the same class;
// every fifth aligns to two (a split translation); every seventh Arabic
// sentence is left unaligned.
inline AlignedCorpus aligned_corpus(std::size_t count, std::uint64_t seed) {
  AlignedCorpus c;
  const Rng root(seed);
  std::size_t next_target = 0;
  auto add_target = [&](int label, const std::string& code, Rng& rng, bool aligned) {
    Sentence s = make_sentence(kArabic, label, rng);
    SentenceRecord r;
    r.id = "ar" + std::to_string(next_target++);
    r.lang = "ar";
    r.text = std::move(s.text);
    r.source = "aligned_ar";
    c.target.push_back(r);
    if (aligned) {
      r.label = class_from_index(label);
      r.cameo = CameoCode::parse(code);
      c.target_gold.push_back(r);
    }
    return c.target.back().id;
  };
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = root.split(i);
    const int label = static_cast<int>(i % kNumClasses);
    Sentence s = make_sentence(kEnglish, label, rng);
    SentenceRecord src;
    src.id = "en" + std::to_string(i);
    src.lang = "en";
    src.text = s.text;
    src.label = class_from_index(label);
    src.cameo = CameoCode::parse(s.code);
    src.source = "soft_en";
    c.source.push_back(src);
    const std::size_t fan_out = i % 5 == 4 ? 2 : 1;
    for (std::size_t k = 0; k < fan_out; ++k) {
      c.pairs.push_back({src.id, add_target(label, s.code, rng, true)});
    }
    if (i % 7 == 6) add_target(label, s.code, rng, false);
  }
  return c;
}

}  // namespace quadcode::fixtures
