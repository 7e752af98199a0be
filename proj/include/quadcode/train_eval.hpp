#pragma once

// Mini-batch training with early stopping, and classification metrics.

#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/error.hpp"
#include "quadcode/models.hpp"
#include "quadcode/nn/optim.hpp"
#include "quadcode/parallel.hpp"
#include "quadcode/rng.hpp"
#include "quadcode/text_encoding.hpp"

namespace quadcode {

enum class TrainErrorKind { kEmptyDataset, kInvalidConfig };
using TrainError = KindedError<TrainErrorKind>;

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t step)
      : Error("non-finite training loss at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  // Training stops after this many consecutive epochs without a strict dev
  // accuracy improvement (a value of 0 behaves like 1).
  std::size_t patience = 5;
  bool shuffle = true;

  void validate() const {
    auto bad = [](const std::string& why) { return TrainError(TrainErrorKind::kInvalidConfig, why); };
    if (batch_size < 1) throw bad("batch_size must be >= 1");
    if (epochs < 1) throw bad("epochs must be >= 1");
    if (!(optimizer.lr > 0.0)) throw bad("learning rate must be positive");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["optimizer"] = optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd";
    j["lr"] = optimizer.lr;
    if (optimizer.kind == OptimizerKind::kAdam) {
      j["beta1"] = optimizer.beta1;
      j["beta2"] = optimizer.beta2;
      j["epsilon"] = optimizer.epsilon;
    } else {
      j["momentum"] = optimizer.momentum;
    }
    j["seed"] = seed;
    j["patience"] = patience;
    j["shuffle"] = shuffle;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  // confusion[true][predicted]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
  std::size_t total = 0;
  double accuracy = 0.0;
  // Zero when the denominator is zero.
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["accuracy"] = accuracy;
    j["total"] = total;
    j["confusion"] = confusion;
    nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
    for (QuadClass q : kAllQuadClasses) {
      const int c = class_index(q);
      per_class[std::string(to_string(q))] = {{"precision", precision[c]}, {"recall", recall[c]}};
    }
    j["per_class"] = per_class;
    return j;
  }
};

inline Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error("metrics: length mismatch");
  Metrics m;
  m.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) ++m.confusion[truth[i]][predicted[i]];
  std::size_t correct = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    correct += m.confusion[c][c];
    std::size_t row = 0, col = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      row += m.confusion[c][k];
      col += m.confusion[k][c];
    }
    m.precision[c] = col ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(col) : 0.0;
    m.recall[c] = row ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(row) : 0.0;
  }
  m.accuracy = m.total ? static_cast<double>(correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

// Aligned-column text: headline accuracy, per-class precision/recall and the
// confusion matrix (rows = true class).
inline std::string metrics_text(const Metrics& m) {
  std::ostringstream out;
  out << "examples: " << m.total << "\n";
  out << "accuracy: " << std::fixed << std::setprecision(4) << m.accuracy << "\n\n";
  out << std::left << std::setw(24) << "class" << std::right << std::setw(10) << "precision"
      << std::setw(10) << "recall" << "\n";
  for (QuadClass q : kAllQuadClasses) {
    const int c = class_index(q);
    out << std::left << std::setw(24) << to_string(q) << std::right << std::setw(10) << m.precision[c]
        << std::setw(10) << m.recall[c] << "\n";
  }
  out << "\nconfusion (rows true, columns predicted)\n" << std::setw(24) << "";
  for (int c = 0; c < kNumClasses; ++c) out << std::setw(10) << c;
  out << "\n";
  for (QuadClass q : kAllQuadClasses) {
    const int c = class_index(q);
    out << std::left << std::setw(24) << (std::to_string(c) + " " + std::string(to_string(q)))
        << std::right;
    for (int k = 0; k < kNumClasses; ++k) out << std::setw(10) << m.confusion[c][k];
    out << "\n";
  }
  return out.str();
}

inline std::vector<int> predict_all(const Classifier& model, std::span<const EncodedExample> data) {
  std::vector<int> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) { out[i] = predict(model, data[i].indices).label; });
  return out;
}

inline Metrics evaluate(const Classifier& model, std::span<const EncodedExample> test) {
  if (test.empty()) throw TrainError(TrainErrorKind::kEmptyDataset, "evaluation set is empty");
  std::vector<int> truth;
  truth.reserve(test.size());
  for (const auto& e : test) truth.push_back(e.label);
  const std::vector<int> predicted = predict_all(model, test);
  return metrics_from_predictions(truth, predicted);
}

// ---------------------------------------------------------------------------
// Training

// Owns the optimizer state and performs deterministic mini-batch steps.
//
// A batch is cut into fixed chunks of kChunkSize examples. Each chunk sums its
// examples' gradients in order into a private buffer; buffers are then added
// to the parameter gradients in chunk order. The arithmetic is therefore the
// same for any number of worker threads.
class Trainer {
 public:
  static constexpr std::size_t kChunkSize = 8;

  Trainer(Classifier& model, const TrainConfig& config)
      : model_(model), config_(config), root_(config.seed), params_(model.parameter_ptrs()) {
    config_.validate();
    if (config_.optimizer.kind == OptimizerKind::kAdam) {
      optimizer_.emplace<nn::Adam>(config_.optimizer.lr, config_.optimizer.beta1,
                                   config_.optimizer.beta2, config_.optimizer.epsilon);
    } else {
      optimizer_.emplace<nn::Sgd>(config_.optimizer.lr, config_.optimizer.momentum);
    }
  }

  // One optimizer step on the mean loss of `batch`. Returns the mean loss.
  double step(std::span<const EncodedExample* const> batch) {
    if (batch.empty()) throw TrainError(TrainErrorKind::kEmptyDataset, "empty batch");
    const Rng dropout_root = root_.split(kDropoutTag).split(steps_);
    const std::size_t chunks = (batch.size() + kChunkSize - 1) / kChunkSize;
    const std::size_t wave = std::max<std::size_t>(1, std::min<std::size_t>(thread_count(), chunks));
    while (buffers_.size() < wave) buffers_.push_back(model_.zero_gradients());
    std::vector<double> losses(batch.size());

    for (std::size_t first = 0; first < chunks; first += wave) {
      const std::size_t count = std::min(wave, chunks - first);
      parallel_for(count, [&](std::size_t w) {
        const std::size_t chunk = first + w;
        GradientSet& buffer = buffers_[w];
        for (std::size_t i = chunk * kChunkSize; i < std::min(batch.size(), (chunk + 1) * kChunkSize); ++i) {
          const Rng stream = dropout_root.split(i);
          PassOptions o;
          o.dropout = &stream;
          losses[i] = model_.run(batch[i]->indices, o, batch[i]->label, &buffer).loss;
        }
      }, static_cast<unsigned>(count));
      for (std::size_t w = 0; w < count; ++w) {
        for (std::size_t p = 0; p < params_.size(); ++p) {
          params_[p]->grad += buffers_[w][p];
          buffers_[w][p].fill(0.0);
        }
      }
    }

    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss)) throw NonFiniteLoss(steps_);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (auto* p : params_) p->grad *= scale;
    std::visit([&](auto& opt) { opt.step(params_); }, optimizer_);
    ++steps_;
    return loss;
  }

  std::size_t steps() const noexcept { return steps_; }
  const Rng& root() const noexcept { return root_; }

 private:
  static constexpr std::uint64_t kDropoutTag = 0xd70;

  Classifier& model_;
  TrainConfig config_;
  Rng root_;
  std::vector<nn::Parameter*> params_;
  std::variant<nn::Adam, nn::Sgd> optimizer_;
  std::vector<GradientSet> buffers_;
  std::size_t steps_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;

  nlohmann::ordered_json to_json() const {
    return {{"epoch", epoch}, {"train_loss", train_loss}, {"dev_accuracy", dev_accuracy}};
  }
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
  std::size_t steps = 0;

  std::string history_jsonl() const {
    std::string out;
    for (const auto& r : history) out += r.to_json().dump() + "\n";
    return out;
  }
};

// Trains in place and leaves the model at its best-dev-accuracy epoch.
inline TrainResult train(Classifier& model, std::span<const EncodedExample> train_set,
                         std::span<const EncodedExample> dev_set, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_set.empty()) throw TrainError(TrainErrorKind::kEmptyDataset, "training set is empty");
  if (dev_set.empty()) throw TrainError(TrainErrorKind::kEmptyDataset, "dev set is empty");
  for (const auto* set : {&train_set, &dev_set}) {
    for (const auto& e : *set) {
      if (e.label < 0 || e.label >= kNumClasses) {
        throw TrainError(TrainErrorKind::kInvalidConfig, "label outside 0..3");
      }
    }
  }
  Trainer trainer(model, config);
  const Rng shuffle_root = trainer.root().split(0x5f1);

  TrainResult result;
  std::vector<nn::Tensor> best;
  std::size_t since_best = 0;
  std::vector<const EncodedExample*> order;
  for (const auto& e : train_set) order.push_back(&e);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) {
      Rng rng = shuffle_root.split(epoch);
      rng.shuffle(std::span(order));
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      loss_sum += trainer.step(std::span(order).subspan(start, n)) * static_cast<double>(n);
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(order.size()),
                       evaluate(model, dev_set).accuracy};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (best.empty() || record.dev_accuracy > result.best_dev_accuracy) {
      result.best_dev_accuracy = record.dev_accuracy;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& p : model.parameters()) best.push_back(p.value);
      since_best = 0;
    } else if (++since_best >= std::max<std::size_t>(config.patience, 1)) {
      break;
    }
  }
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = std::move(best[i]);
  result.steps = trainer.steps();
  return result;
}

}  // namespace quadcode
