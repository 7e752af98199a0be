#pragma once

// Run configuration (flat `key = value` files) and the glue that turns a
// labelled corpus into a trained checkpoint.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/checkpoint.hpp"
#include "quadcode/corpus.hpp"
#include "quadcode/digest.hpp"
#include "quadcode/error.hpp"
#include "quadcode/models.hpp"
#include "quadcode/strings.hpp"
#include "quadcode/text_encoding.hpp"
#include "quadcode/train_eval.hpp"

namespace quadcode {

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

struct PipelineConfig {
  TrainConfig train;
  double dropout = 0.5;

  std::size_t word_seq_len = 64;
  std::size_t word_embed_dim = 128;
  std::size_t word_frames = 256;
  std::size_t word_hidden = 150;
  std::size_t vocab_max_size = 50000;
  std::size_t vocab_min_count = 1;
  std::string embeddings;  // optional pre-trained vectors

  std::size_t char_seq_len = 512;
  std::size_t char_embed_dim = 32;
  std::size_t char_frames = 256;
  std::size_t char_hidden = 1024;
  std::size_t alphabet_max_size = 256;
  bool one_hot = false;

  // Applies one `key = value` setting.
  void set(const std::string& key, const std::string& raw) {
    const std::string value(trim(raw));
    auto as_size = [&]() -> std::size_t {
      try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size() || v < 0) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a non-negative integer, got \"" + value + "\"");
      }
    };
    auto as_double = [&]() -> double {
      try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a number, got \"" + value + "\"");
      }
    };
    auto as_bool = [&]() -> bool {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw ConfigError("config key " + key + ": expected true or false, got \"" + value + "\"");
    };

    if (key == "seed") train.seed = as_size();
    else if (key == "epochs") train.epochs = as_size();
    else if (key == "batch_size") train.batch_size = as_size();
    else if (key == "patience") train.patience = as_size();
    else if (key == "shuffle") train.shuffle = as_bool();
    else if (key == "optimizer") {
      if (value == "adam") train.optimizer.kind = OptimizerKind::kAdam;
      else if (value == "sgd") train.optimizer.kind = OptimizerKind::kSgd;
      else throw ConfigError("config key optimizer: expected adam or sgd, got \"" + value + "\"");
    }
    else if (key == "lr") train.optimizer.lr = as_double();
    else if (key == "momentum") train.optimizer.momentum = as_double();
    else if (key == "beta1") train.optimizer.beta1 = as_double();
    else if (key == "beta2") train.optimizer.beta2 = as_double();
    else if (key == "epsilon") train.optimizer.epsilon = as_double();
    else if (key == "dropout") dropout = as_double();
    else if (key == "word_seq_len") word_seq_len = as_size();
    else if (key == "word_embed_dim") word_embed_dim = as_size();
    else if (key == "word_frames") word_frames = as_size();
    else if (key == "word_hidden") word_hidden = as_size();
    else if (key == "vocab_max_size") vocab_max_size = as_size();
    else if (key == "vocab_min_count") vocab_min_count = as_size();
    else if (key == "embeddings") embeddings = value;
    else if (key == "char_seq_len") char_seq_len = as_size();
    else if (key == "char_embed_dim") char_embed_dim = as_size();
    else if (key == "char_frames") char_frames = as_size();
    else if (key == "char_hidden") char_hidden = as_size();
    else if (key == "alphabet_max_size") alphabet_max_size = as_size();
    else if (key == "one_hot") one_hot = as_bool();
    else throw ConfigError("unknown config key \"" + key + "\"");
  }

  // Reads `key = value` lines; `#` starts a comment.
  void apply_text(std::string_view text, const std::string& origin = "config") {
    int line_no = 0;
    for (std::string_view line : split_lines(text)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(origin + " line " + std::to_string(line_no) + ": expected key = value");
      }
      set(std::string(trim(line.substr(0, eq))), std::string(line.substr(eq + 1)));
    }
  }

  void apply_file(const std::string& path) { apply_text(read_file(path), path); }

  // Accepts "key=value".
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("override \"" + std::string(assignment) + "\" is not key=value");
    }
    set(std::string(trim(assignment.substr(0, eq))), std::string(assignment.substr(eq + 1)));
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = train.to_json();
    j["dropout"] = dropout;
    j["word_seq_len"] = word_seq_len;
    j["word_embed_dim"] = word_embed_dim;
    j["word_frames"] = word_frames;
    j["word_hidden"] = word_hidden;
    j["vocab_max_size"] = vocab_max_size;
    j["vocab_min_count"] = vocab_min_count;
    j["embeddings"] = embeddings;
    j["char_seq_len"] = char_seq_len;
    j["char_embed_dim"] = char_embed_dim;
    j["char_frames"] = char_frames;
    j["char_hidden"] = char_hidden;
    j["alphabet_max_size"] = alphabet_max_size;
    j["one_hot"] = one_hot;
    return j;
  }
};

// Builds the encoder from the training split and an untrained model sized to
// it.
inline Checkpoint prepare_model(InputKind kind, std::span<const SentenceRecord> train_records,
                                const PipelineConfig& cfg) {
  Checkpoint ckpt;
  ckpt.encoder.kind = kind;
  if (kind == InputKind::kWord) {
    ckpt.encoder.seq_len = cfg.word_seq_len;
    ckpt.encoder.vocab = build_vocab(train_records, cfg.vocab_max_size, cfg.vocab_min_count);
    WordCnnConfig mc;
    mc.vocab_size = ckpt.encoder.vocab.size();
    mc.embed_dim = cfg.word_embed_dim;
    mc.seq_len = cfg.word_seq_len;
    for (auto& b : mc.branches) b.frames = cfg.word_frames;
    mc.hidden = cfg.word_hidden;
    mc.dropout = cfg.dropout;
    if (cfg.embeddings.empty()) {
      ckpt.model = std::make_unique<WordCnn>(mc, cfg.train.seed);
    } else {
      const nn::Tensor table =
          load_embeddings(cfg.embeddings, ckpt.encoder.vocab, mc.embed_dim, cfg.train.seed);
      ckpt.model = std::make_unique<WordCnn>(mc, cfg.train.seed, &table);
    }
  } else {
    ckpt.encoder.seq_len = cfg.char_seq_len;
    ckpt.encoder.alphabet = build_alphabet(train_records, cfg.alphabet_max_size);
    CharCnnConfig mc;
    mc.alphabet_size = ckpt.encoder.alphabet.size();
    mc.embed_dim = cfg.char_embed_dim;
    mc.seq_len = cfg.char_seq_len;
    mc.one_hot = cfg.one_hot;
    for (auto& c : mc.convs) c.frames = cfg.char_frames;
    mc.hidden = {cfg.char_hidden, cfg.char_hidden};
    mc.dropout = cfg.dropout;
    ckpt.model = std::make_unique<CharCnn>(mc, cfg.train.seed);
  }
  return ckpt;
}

struct TrainedPipeline {
  Checkpoint checkpoint;
  TrainResult result;
};

inline TrainedPipeline train_pipeline(InputKind kind, std::span<const SentenceRecord> train_records,
                                      std::span<const SentenceRecord> dev_records,
                                      const PipelineConfig& cfg, const QuadClassMap& map,
                                      const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_records.empty()) throw TrainError(TrainErrorKind::kEmptyDataset, "training set is empty");
  TrainedPipeline out;
  out.checkpoint = prepare_model(kind, train_records, cfg);
  const auto train_set = out.checkpoint.encoder.encode_all(train_records);
  const auto dev_set = out.checkpoint.encoder.encode_all(dev_records);
  out.result = train(*out.checkpoint.model, train_set, dev_set, cfg.train, on_epoch);
  out.checkpoint.quad_map_digest = sha256_hex(map.serialize());
  nlohmann::ordered_json t;
  t["config"] = cfg.to_json();
  t["steps"] = out.result.steps;
  t["epochs_run"] = out.result.history.size();
  t["best_epoch"] = out.result.best_epoch;
  t["best_dev_accuracy"] = out.result.best_dev_accuracy;
  out.checkpoint.training = t;
  return out;
}

}  // namespace quadcode
