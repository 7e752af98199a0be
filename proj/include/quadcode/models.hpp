#pragma once

// The word-level and character-level 1-D ConvNet classifiers.
//
// Word model: embedding -> three parallel branches
//   [conv1d(256, k) -> relu -> maxpool(2) -> max over time], k in {3, 4, 5}
//   -> concat(768) -> dropout -> dense(150) -> relu -> dropout -> dense(4)
//
// Char model: char embedding -> conv(256,7)+relu+pool(3) -> conv(256,3)+relu
//   -> conv(256,3)+relu -> conv(256,3)+relu+pool(3) -> flatten -> dropout
//   -> dense(1024) -> relu -> dropout -> dense(1024) -> relu -> dense(4)

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/error.hpp"
#include "quadcode/nn/layers.hpp"
#include "quadcode/nn/tensor.hpp"
#include "quadcode/ontology.hpp"
#include "quadcode/rng.hpp"
#include "quadcode/text_encoding.hpp"

namespace quadcode {

enum class ModelErrorKind { kConfigInvalid, kSequenceTooShort };
using ModelError = KindedError<ModelErrorKind>;

struct ConvSpec {
  std::size_t frames = 256;
  std::size_t kernel = 3;
  std::size_t pool = 0;  // 0: no pooling

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct LayerTrace {
  std::string name;
  nn::Shape shape;

  friend bool operator==(const LayerTrace&, const LayerTrace&) = default;
};

namespace detail {

inline nlohmann::ordered_json conv_specs_to_json(const std::vector<ConvSpec>& specs) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& s : specs) a.push_back({s.frames, s.kernel, s.pool});
  return a;
}

inline std::vector<ConvSpec> conv_specs_from_json(const nlohmann::json& a) {
  std::vector<ConvSpec> specs;
  for (const auto& s : a) {
    specs.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(),
                     s.at(2).get<std::size_t>()});
  }
  return specs;
}

inline ModelError invalid(const std::string& why) {
  return ModelError(ModelErrorKind::kConfigInvalid, "invalid model config: " + why);
}

inline void check_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw invalid("dropout rate must be in [0, 1)");
}

}  // namespace detail

struct WordCnnConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  std::size_t seq_len = 64;
  std::vector<ConvSpec> branches = {{256, 3, 2}, {256, 4, 2}, {256, 5, 2}};
  std::size_t hidden = 150;
  std::size_t classes = kNumClasses;
  double dropout = 0.5;

  void validate() const {
    if (vocab_size < 2) throw detail::invalid("vocabulary needs at least PAD and UNK");
    if (embed_dim == 0 || hidden == 0) throw detail::invalid("dimensions must be positive");
    if (branches.size() != 3) throw detail::invalid("word model needs exactly three branches");
    std::set<std::size_t> kernels;
    for (const auto& b : branches) {
      if (b.frames == 0 || b.kernel == 0 || b.pool == 0) {
        throw detail::invalid("branch frames, kernel and pool must be positive");
      }
      kernels.insert(b.kernel);
      const std::size_t conv_len = nn::conv_output_length(seq_len, b.kernel);
      if (nn::pool_output_length(conv_len, b.pool) == 0) {
        throw ModelError(ModelErrorKind::kSequenceTooShort,
                         "sequence length " + std::to_string(seq_len) + " too short for branch k=" +
                             std::to_string(b.kernel) + " (conv then pool " +
                             std::to_string(b.pool) + " leaves no time steps)");
      }
    }
    if (kernels.size() != 3) throw detail::invalid("branch kernels must be distinct");
    if (classes != kNumClasses) throw detail::invalid("classes must be 4");
    detail::check_dropout(dropout);
  }

  std::size_t concat_width() const {
    std::size_t w = 0;
    for (const auto& b : branches) w += b.frames;
    return w;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = "word";
    j["vocab_size"] = vocab_size;
    j["embed_dim"] = embed_dim;
    j["seq_len"] = seq_len;
    j["branches"] = detail::conv_specs_to_json(branches);
    j["hidden"] = hidden;
    j["classes"] = classes;
    j["dropout"] = dropout;
    return j;
  }

  static WordCnnConfig from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "word") throw detail::invalid("not a word model config");
    WordCnnConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.branches = detail::conv_specs_from_json(j.at("branches"));
    c.hidden = j.at("hidden").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    return c;
  }
};

struct CharCnnConfig {
  std::size_t alphabet_size = 0;
  std::size_t embed_dim = 32;
  std::size_t seq_len = 512;
  // Frozen identity embedding (one-hot input); embed_dim becomes alphabet_size.
  bool one_hot = false;
  std::vector<ConvSpec> convs = {{256, 7, 3}, {256, 3, 0}, {256, 3, 0}, {256, 3, 3}};
  std::vector<std::size_t> hidden = {1024, 1024};
  std::size_t classes = kNumClasses;
  double dropout = 0.5;

  std::size_t input_channels() const { return one_hot ? alphabet_size : embed_dim; }

  // Time length after every conv and pool, in order. Throws
  // kSequenceTooShort naming the first layer that would be empty.
  std::vector<std::size_t> lengths() const {
    std::vector<std::size_t> out;
    std::size_t len = seq_len;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      const auto name = "conv" + std::to_string(i + 1);
      if (len < convs[i].kernel) {
        throw ModelError(ModelErrorKind::kSequenceTooShort,
                         "sequence length " + std::to_string(seq_len) + " too short: layer " +
                             name + " (kernel " + std::to_string(convs[i].kernel) +
                             ") receives length " + std::to_string(len));
      }
      len = nn::conv_output_length(len, convs[i].kernel);
      out.push_back(len);
      if (convs[i].pool > 0) {
        const std::size_t pooled = nn::pool_output_length(len, convs[i].pool);
        if (pooled == 0) {
          throw ModelError(ModelErrorKind::kSequenceTooShort,
                           "sequence length " + std::to_string(seq_len) + " too short: layer pool" +
                               std::to_string(i + 1) + " (width " + std::to_string(convs[i].pool) +
                               ") receives length " + std::to_string(len));
        }
        len = pooled;
        out.push_back(len);
      }
    }
    return out;
  }

  std::size_t flatten_width() const { return lengths().back() * convs.back().frames; }

  void validate() const {
    if (alphabet_size < 2) throw detail::invalid("alphabet needs at least PAD and UNK");
    if (input_channels() == 0) throw detail::invalid("embedding dimension must be positive");
    static constexpr std::array<std::size_t, 4> kKernels = {7, 3, 3, 3};
    static constexpr std::array<std::size_t, 4> kPools = {3, 0, 0, 3};
    if (convs.size() != kKernels.size()) throw detail::invalid("char model needs four conv layers");
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (convs[i].frames == 0) throw detail::invalid("conv frames must be positive");
      if (convs[i].kernel != kKernels[i] || convs[i].pool != kPools[i]) {
        throw detail::invalid("conv stack must be (7, pool 3), (3), (3), (3, pool 3)");
      }
    }
    if (hidden.size() != 2 || hidden[0] == 0 || hidden[1] == 0) {
      throw detail::invalid("char model needs two positive hidden layer widths");
    }
    if (classes != kNumClasses) throw detail::invalid("classes must be 4");
    detail::check_dropout(dropout);
    (void)lengths();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = "char";
    j["alphabet_size"] = alphabet_size;
    j["embed_dim"] = embed_dim;
    j["seq_len"] = seq_len;
    j["one_hot"] = one_hot;
    j["convs"] = detail::conv_specs_to_json(convs);
    j["hidden"] = hidden;
    j["classes"] = classes;
    j["dropout"] = dropout;
    return j;
  }

  static CharCnnConfig from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "char") throw detail::invalid("not a char model config");
    CharCnnConfig c;
    c.alphabet_size = j.at("alphabet_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.seq_len = j.at("seq_len").get<std::size_t>();
    c.one_hot = j.at("one_hot").get<bool>();
    c.convs = detail::conv_specs_from_json(j.at("convs"));
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.classes = j.at("classes").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    return c;
  }
};

// Gradient buffers aligned with Classifier::parameters().
using GradientSet = std::vector<nn::Tensor>;

struct PassOptions {
  // Training-mode dropout stream; null means evaluation mode.
  const Rng* dropout = nullptr;
  // When set, receives every relu on/off bit and pooling argmax so callers
  // can detect that two passes crossed a kink.
  std::vector<std::uint8_t>* activation_pattern = nullptr;
  // When set, receives the output shape of every layer.
  std::vector<LayerTrace>* trace = nullptr;
  // Scales conv weight gradients; only negative-control tests change it.
  double conv_weight_grad_scale = 1.0;
};

struct PassResult {
  nn::Tensor logits;
  double loss = 0.0;
};

struct Prediction {
  int label = 0;
  std::array<double, kNumClasses> probs{};
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual InputKind kind() const = 0;
  virtual std::size_t input_length() const = 0;
  virtual nlohmann::ordered_json config_json() const = 0;
  // Layer output shapes derived from the configuration alone.
  virtual std::vector<LayerTrace> shape_trace() const = 0;

  // Forward pass; with `label` and `grads`, also backpropagates the
  // cross-entropy loss and accumulates parameter gradients into `grads`.
  virtual PassResult run(std::span<const std::int32_t> input, const PassOptions& options,
                         std::optional<int> label = std::nullopt,
                         GradientSet* grads = nullptr) const = 0;

  std::vector<nn::Parameter>& parameters() noexcept { return params_; }
  const std::vector<nn::Parameter>& parameters() const noexcept { return params_; }

  std::vector<nn::Parameter*> parameter_ptrs() {
    std::vector<nn::Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  GradientSet zero_gradients() const {
    GradientSet g;
    for (const auto& p : params_) g.emplace_back(p.value.shape());
    return g;
  }

  // Evaluation-mode logits.
  nn::Tensor logits(std::span<const std::int32_t> input) const { return run(input, {}).logits; }

 protected:
  std::size_t add_parameter(std::string name, nn::Tensor value, bool frozen = false) {
    params_.emplace_back(std::move(name), std::move(value), frozen);
    return params_.size() - 1;
  }

  const nn::Tensor& value(std::size_t i) const { return params_[i].value; }

  void check_input(std::span<const std::int32_t> input) const {
    if (input.size() != input_length()) {
      throw nn::ShapeMismatch("model expects " + std::to_string(input_length()) +
                              " input indices, got " + std::to_string(input.size()));
    }
  }

  static void record(const PassOptions& o, std::string name, const nn::Tensor& t) {
    if (o.trace) o.trace->push_back({std::move(name), t.shape()});
  }

  static void record_relu(const PassOptions& o, const nn::Tensor& t) {
    if (!o.activation_pattern) return;
    for (double v : t.values()) o.activation_pattern->push_back(v > 0.0 ? 1 : 0);
  }

  static void record_argmax(const PassOptions& o, const std::vector<std::uint32_t>& argmax) {
    if (!o.activation_pattern) return;
    for (auto a : argmax) {
      for (int b = 0; b < 4; ++b) o.activation_pattern->push_back(static_cast<std::uint8_t>(a >> (8 * b)));
    }
  }

  // Loss and its gradient w.r.t. the logits, when a label is given.
  static std::optional<nn::SoftmaxCrossEntropy> head(const nn::Tensor& logits,
                                                     std::optional<int> label) {
    nn::require_finite(logits, "forward pass");
    if (!label) return std::nullopt;
    if (*label < 0 || *label >= kNumClasses) throw nn::ShapeMismatch("label outside 0..3");
    return nn::softmax_cross_entropy(logits, static_cast<std::size_t>(*label));
  }

  std::vector<nn::Parameter> params_;
};

// Evaluation mode; ties go to the lowest class index.
inline Prediction predict(const Classifier& model, std::span<const std::int32_t> input) {
  const nn::Tensor probs = nn::softmax(model.logits(input));
  Prediction p;
  p.label = static_cast<int>(nn::argmax(probs));
  for (int c = 0; c < kNumClasses; ++c) p.probs[c] = probs[static_cast<std::size_t>(c)];
  return p;
}

// ---------------------------------------------------------------------------

class WordCnn final : public Classifier {
 public:
  WordCnn(WordCnnConfig config, std::uint64_t seed, const nn::Tensor* pretrained = nullptr)
      : config_(std::move(config)) {
    config_.validate();
    const Rng root(seed);
    nn::Tensor table = pretrained ? *pretrained
                                  : random_embeddings(config_.vocab_size, config_.embed_dim,
                                                      root.split(0).at(0));
    nn::require_shape(table, {config_.vocab_size, config_.embed_dim}, "embedding table");
    for (std::size_t j = 0; j < config_.embed_dim; ++j) table(0, j) = 0.0;
    embedding_ = add_parameter("embedding", std::move(table));
    std::uint64_t tag = 1;
    for (std::size_t b = 0; b < config_.branches.size(); ++b) {
      const auto& s = config_.branches[b];
      Rng rng = root.split(tag++);
      const std::string name = "branch" + std::to_string(b + 1);
      conv_w_.push_back(add_parameter(
          name + ".weight",
          nn::glorot_uniform({s.frames, config_.embed_dim, s.kernel}, config_.embed_dim * s.kernel,
                             s.frames * s.kernel, rng)));
      conv_b_.push_back(add_parameter(name + ".bias", nn::Tensor({s.frames})));
    }
    const std::size_t width = config_.concat_width();
    Rng r1 = root.split(tag++);
    fc1_w_ = add_parameter("fc1.weight",
                           nn::glorot_uniform({config_.hidden, width}, width, config_.hidden, r1));
    fc1_b_ = add_parameter("fc1.bias", nn::Tensor({config_.hidden}));
    Rng r2 = root.split(tag++);
    fc2_w_ = add_parameter("fc2.weight", nn::glorot_uniform({config_.classes, config_.hidden},
                                                            config_.hidden, config_.classes, r2));
    fc2_b_ = add_parameter("fc2.bias", nn::Tensor({config_.classes}));
  }

  const WordCnnConfig& config() const noexcept { return config_; }
  InputKind kind() const override { return InputKind::kWord; }
  std::size_t input_length() const override { return config_.seq_len; }
  nlohmann::ordered_json config_json() const override { return config_.to_json(); }

  std::vector<LayerTrace> shape_trace() const override {
    std::vector<LayerTrace> t;
    t.push_back({"embedding", {config_.embed_dim, config_.seq_len}});
    for (std::size_t b = 0; b < config_.branches.size(); ++b) {
      const auto& s = config_.branches[b];
      const std::string name = "branch" + std::to_string(b + 1);
      const std::size_t conv_len = nn::conv_output_length(config_.seq_len, s.kernel);
      t.push_back({name + ".conv", {s.frames, conv_len}});
      t.push_back({name + ".pool", {s.frames, nn::pool_output_length(conv_len, s.pool)}});
      t.push_back({name + ".max_over_time", {s.frames}});
    }
    t.push_back({"concat", {config_.concat_width()}});
    t.push_back({"fc1", {config_.hidden}});
    t.push_back({"logits", {config_.classes}});
    return t;
  }

  PassResult run(std::span<const std::int32_t> input, const PassOptions& o,
                 std::optional<int> label, GradientSet* grads) const override {
    check_input(input);
    const nn::Tensor emb = nn::embedding_forward(input, value(embedding_));
    record(o, "embedding", emb);

    struct Branch {
      nn::Tensor relu;
      nn::PoolResult pool;
      nn::PoolResult global;
    };
    std::vector<Branch> branches;
    std::vector<nn::Tensor> features;
    for (std::size_t b = 0; b < config_.branches.size(); ++b) {
      const std::string name = "branch" + std::to_string(b + 1);
      Branch br;
      br.relu = nn::relu_forward(nn::conv1d_forward(emb, value(conv_w_[b]), value(conv_b_[b])));
      record(o, name + ".conv", br.relu);
      record_relu(o, br.relu);
      br.pool = nn::maxpool1d_forward(br.relu, config_.branches[b].pool);
      record(o, name + ".pool", br.pool.output);
      record_argmax(o, br.pool.argmax);
      br.global = nn::maxpool1d_forward(br.pool.output, br.pool.output.dim(1));
      features.push_back(nn::flatten(br.global.output));
      record(o, name + ".max_over_time", features.back());
      record_argmax(o, br.global.argmax);
      branches.push_back(std::move(br));
    }
    const nn::Tensor joined = nn::concat(features);
    record(o, "concat", joined);
    const Rng* stream = o.dropout;
    std::optional<Rng> s0, s1;
    if (stream) {
      s0 = stream->split(0);
      s1 = stream->split(1);
    }
    const auto d0 = nn::dropout_forward(joined, config_.dropout, s0 ? &*s0 : nullptr, stream != nullptr);
    const nn::Tensor a1 = nn::relu_forward(nn::dense_forward(d0.output, value(fc1_w_), value(fc1_b_)));
    record(o, "fc1", a1);
    record_relu(o, a1);
    const auto d1 = nn::dropout_forward(a1, config_.dropout, s1 ? &*s1 : nullptr, stream != nullptr);
    PassResult result{nn::dense_forward(d1.output, value(fc2_w_), value(fc2_b_)), 0.0};
    record(o, "logits", result.logits);

    const auto loss = head(result.logits, label);
    if (!loss) return result;
    result.loss = loss->loss;
    if (!grads) return result;
    GradientSet& g = *grads;

    nn::Tensor g_d1(d1.output.shape());
    nn::dense_backward(d1.output, value(fc2_w_), loss->grad, &g_d1, g[fc2_w_], g[fc2_b_]);
    const nn::Tensor g_z1 = nn::relu_backward(a1, nn::dropout_backward(d1.mask, std::move(g_d1)));
    nn::Tensor g_d0(d0.output.shape());
    nn::dense_backward(d0.output, value(fc1_w_), g_z1, &g_d0, g[fc1_w_], g[fc1_b_]);
    const nn::Tensor g_joined = nn::dropout_backward(d0.mask, std::move(g_d0));
    const auto g_features = nn::concat_backward(features, g_joined);

    nn::Tensor g_emb(emb.shape());
    for (std::size_t b = 0; b < branches.size(); ++b) {
      const Branch& br = branches[b];
      nn::Tensor g_pool(br.pool.output.shape());
      nn::maxpool1d_backward(br.global, g_features[b].reshaped(br.global.output.shape()), g_pool);
      nn::Tensor g_relu(br.relu.shape());
      nn::maxpool1d_backward(br.pool, g_pool, g_relu);
      const nn::Tensor g_conv = nn::relu_backward(br.relu, std::move(g_relu));
      nn::conv1d_backward(emb, value(conv_w_[b]), g_conv, &g_emb, g[conv_w_[b]], g[conv_b_[b]],
                          o.conv_weight_grad_scale);
    }
    if (!params_[embedding_].frozen) nn::embedding_backward(input, g_emb, g[embedding_]);
    return result;
  }

 private:
  WordCnnConfig config_;
  std::size_t embedding_ = 0;
  std::vector<std::size_t> conv_w_, conv_b_;
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
};

// ---------------------------------------------------------------------------

class CharCnn final : public Classifier {
 public:
  CharCnn(CharCnnConfig config, std::uint64_t seed) : config_(std::move(config)) {
    if (config_.one_hot) config_.embed_dim = config_.alphabet_size;
    config_.validate();
    const Rng root(seed);
    nn::Tensor table;
    if (config_.one_hot) {
      table = nn::Tensor({config_.alphabet_size, config_.alphabet_size});
      for (std::size_t r = 1; r < config_.alphabet_size; ++r) table(r, r) = 1.0;
    } else {
      table = random_embeddings(config_.alphabet_size, config_.embed_dim, root.split(0).at(0));
    }
    embedding_ = add_parameter("embedding", std::move(table), config_.one_hot);
    std::uint64_t tag = 1;
    std::size_t channels = config_.input_channels();
    for (std::size_t i = 0; i < config_.convs.size(); ++i) {
      const auto& s = config_.convs[i];
      Rng rng = root.split(tag++);
      const std::string name = "conv" + std::to_string(i + 1);
      conv_w_.push_back(add_parameter(
          name + ".weight", nn::glorot_uniform({s.frames, channels, s.kernel}, channels * s.kernel,
                                               s.frames * s.kernel, rng)));
      conv_b_.push_back(add_parameter(name + ".bias", nn::Tensor({s.frames})));
      channels = s.frames;
    }
    std::size_t width = config_.flatten_width();
    const std::array<std::size_t, 3> units = {config_.hidden[0], config_.hidden[1], config_.classes};
    for (std::size_t i = 0; i < units.size(); ++i) {
      Rng rng = root.split(tag++);
      const std::string name = "fc" + std::to_string(i + 1);
      fc_w_.push_back(add_parameter(name + ".weight",
                                    nn::glorot_uniform({units[i], width}, width, units[i], rng)));
      fc_b_.push_back(add_parameter(name + ".bias", nn::Tensor({units[i]})));
      width = units[i];
    }
  }

  const CharCnnConfig& config() const noexcept { return config_; }
  InputKind kind() const override { return InputKind::kChar; }
  std::size_t input_length() const override { return config_.seq_len; }
  nlohmann::ordered_json config_json() const override { return config_.to_json(); }

  std::vector<LayerTrace> shape_trace() const override {
    std::vector<LayerTrace> t;
    t.push_back({"embedding", {config_.input_channels(), config_.seq_len}});
    const auto lengths = config_.lengths();
    std::size_t k = 0;
    for (std::size_t i = 0; i < config_.convs.size(); ++i) {
      const auto& s = config_.convs[i];
      t.push_back({"conv" + std::to_string(i + 1), {s.frames, lengths[k++]}});
      if (s.pool > 0) t.push_back({"pool" + std::to_string(i + 1), {s.frames, lengths[k++]}});
    }
    t.push_back({"flatten", {config_.flatten_width()}});
    t.push_back({"fc1", {config_.hidden[0]}});
    t.push_back({"fc2", {config_.hidden[1]}});
    t.push_back({"logits", {config_.classes}});
    return t;
  }

  PassResult run(std::span<const std::int32_t> input, const PassOptions& o,
                 std::optional<int> label, GradientSet* grads) const override {
    check_input(input);
    struct Stage {
      nn::Tensor input;  // conv input
      nn::Tensor relu;
      std::optional<nn::PoolResult> pool;
    };
    std::vector<Stage> stages;
    nn::Tensor h = nn::embedding_forward(input, value(embedding_));
    record(o, "embedding", h);
    for (std::size_t i = 0; i < config_.convs.size(); ++i) {
      Stage st;
      st.input = std::move(h);
      st.relu = nn::relu_forward(nn::conv1d_forward(st.input, value(conv_w_[i]), value(conv_b_[i])));
      record(o, "conv" + std::to_string(i + 1), st.relu);
      record_relu(o, st.relu);
      if (config_.convs[i].pool > 0) {
        st.pool = nn::maxpool1d_forward(st.relu, config_.convs[i].pool);
        record(o, "pool" + std::to_string(i + 1), st.pool->output);
        record_argmax(o, st.pool->argmax);
        h = st.pool->output;
      } else {
        h = st.relu;
      }
      stages.push_back(std::move(st));
    }
    const nn::Shape conv_out_shape = h.shape();
    const nn::Tensor flat = nn::flatten(h);
    record(o, "flatten", flat);

    const Rng* stream = o.dropout;
    std::optional<Rng> s0, s1;
    if (stream) {
      s0 = stream->split(0);
      s1 = stream->split(1);
    }
    const bool training = stream != nullptr;
    const auto d0 = nn::dropout_forward(flat, config_.dropout, s0 ? &*s0 : nullptr, training);
    const nn::Tensor a1 = nn::relu_forward(nn::dense_forward(d0.output, value(fc_w_[0]), value(fc_b_[0])));
    record(o, "fc1", a1);
    record_relu(o, a1);
    const auto d1 = nn::dropout_forward(a1, config_.dropout, s1 ? &*s1 : nullptr, training);
    const nn::Tensor a2 = nn::relu_forward(nn::dense_forward(d1.output, value(fc_w_[1]), value(fc_b_[1])));
    record(o, "fc2", a2);
    record_relu(o, a2);
    PassResult result{nn::dense_forward(a2, value(fc_w_[2]), value(fc_b_[2])), 0.0};
    record(o, "logits", result.logits);

    const auto loss = head(result.logits, label);
    if (!loss) return result;
    result.loss = loss->loss;
    if (!grads) return result;
    GradientSet& g = *grads;

    nn::Tensor g_a2(a2.shape());
    nn::dense_backward(a2, value(fc_w_[2]), loss->grad, &g_a2, g[fc_w_[2]], g[fc_b_[2]]);
    nn::Tensor g_d1(d1.output.shape());
    nn::dense_backward(d1.output, value(fc_w_[1]), nn::relu_backward(a2, std::move(g_a2)), &g_d1,
                       g[fc_w_[1]], g[fc_b_[1]]);
    const nn::Tensor g_z1 = nn::relu_backward(a1, nn::dropout_backward(d1.mask, std::move(g_d1)));
    nn::Tensor g_d0(d0.output.shape());
    nn::dense_backward(d0.output, value(fc_w_[0]), g_z1, &g_d0, g[fc_w_[0]], g[fc_b_[0]]);
    nn::Tensor g_h = nn::dropout_backward(d0.mask, std::move(g_d0)).reshaped(conv_out_shape);

    const bool need_embedding_grad = !params_[embedding_].frozen;
    for (std::size_t i = stages.size(); i-- > 0;) {
      const Stage& st = stages[i];
      nn::Tensor g_relu;
      if (st.pool) {
        g_relu = nn::Tensor(st.relu.shape());
        nn::maxpool1d_backward(*st.pool, g_h, g_relu);
      } else {
        g_relu = std::move(g_h);
      }
      const nn::Tensor g_conv = nn::relu_backward(st.relu, std::move(g_relu));
      const bool need_input_grad = i > 0 || need_embedding_grad;
      nn::Tensor g_in = need_input_grad ? nn::Tensor(st.input.shape()) : nn::Tensor();
      nn::conv1d_backward(st.input, value(conv_w_[i]), g_conv, need_input_grad ? &g_in : nullptr,
                          g[conv_w_[i]], g[conv_b_[i]], o.conv_weight_grad_scale);
      g_h = std::move(g_in);
    }
    if (need_embedding_grad) nn::embedding_backward(input, g_h, g[embedding_]);
    return result;
  }

 private:
  CharCnnConfig config_;
  std::size_t embedding_ = 0;
  std::vector<std::size_t> conv_w_, conv_b_, fc_w_, fc_b_;
};

inline WordCnn build_word_cnn(const WordCnnConfig& config, std::uint64_t seed) {
  return WordCnn(config, seed);
}

inline CharCnn build_char_cnn(const CharCnnConfig& config, std::uint64_t seed) {
  return CharCnn(config, seed);
}

// Builds either architecture from its config JSON (the "kind" key decides).
inline std::unique_ptr<Classifier> build_model(const nlohmann::json& config, std::uint64_t seed) {
  const std::string kind = config.at("kind").get<std::string>();
  if (kind == "word") return std::make_unique<WordCnn>(WordCnnConfig::from_json(config), seed);
  if (kind == "char") return std::make_unique<CharCnn>(CharCnnConfig::from_json(config), seed);
  throw detail::invalid("unknown model kind \"" + kind + "\"");
}

}  // namespace quadcode
