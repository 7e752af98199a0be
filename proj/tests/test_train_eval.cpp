#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "quadcode/experiment.hpp"
#include "quadcode/fixtures.hpp"
#include "quadcode/gradcheck.hpp"
#include "quadcode/parallel.hpp"
#include "quadcode/pipeline.hpp"
#include "quadcode/train_eval.hpp"
#include "test_support.hpp"

namespace quadcode {
namespace {

TEST(Metrics, PerfectPredictions) {
  const std::vector<int> truth{0, 1, 2, 3, 3, 2};
  const auto m = metrics_from_predictions(truth, truth);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  for (int c = 0; c < kNumClasses; ++c) {
    EXPECT_DOUBLE_EQ(m.precision[c], 1.0);
    EXPECT_DOUBLE_EQ(m.recall[c], 1.0);
  }
}

TEST(Metrics, ConstantPredictorOnBalancedData) {
  std::vector<int> truth, predicted;
  for (int i = 0; i < 400; ++i) {
    truth.push_back(i % 4);
    predicted.push_back(2);
  }
  const auto m = metrics_from_predictions(truth, predicted);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.25);
  EXPECT_DOUBLE_EQ(m.precision[2], 0.25);
  EXPECT_DOUBLE_EQ(m.recall[2], 1.0);
  EXPECT_DOUBLE_EQ(m.precision[0], 0.0);
  EXPECT_DOUBLE_EQ(m.recall[0], 0.0);
}

TEST(Metrics, HandComputedExample) {
  const std::vector<int> truth{0, 0, 1, 1, 2, 3};
  const std::vector<int> predicted{0, 1, 1, 1, 3, 3};
  const auto m = metrics_from_predictions(truth, predicted);
  EXPECT_DOUBLE_EQ(m.accuracy, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(m.precision[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall[0], 0.5);
  EXPECT_DOUBLE_EQ(m.precision[2], 0.0);
  EXPECT_DOUBLE_EQ(m.recall[2], 0.0);
  EXPECT_DOUBLE_EQ(m.precision[3], 0.5);
  EXPECT_EQ(m.confusion[2][3], 1u);
}

TEST(Metrics, RandomConfusionInvariants) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<int> truth(n), predicted(n);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(4));
      predicted[i] = static_cast<int>(rng.below(4));
      correct += truth[i] == predicted[i];
    }
    const auto m = metrics_from_predictions(truth, predicted);
    std::size_t total = 0, trace = 0;
    for (int a = 0; a < 4; ++a) {
      trace += m.confusion[a][a];
      for (int b = 0; b < 4; ++b) total += m.confusion[a][b];
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(trace, correct);
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(correct) / static_cast<double>(n));
  }
}

TEST(Metrics, LengthMismatchAndText) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_ANY_THROW(metrics_from_predictions(a, b));
  const auto m = metrics_from_predictions(a, a);
  const std::string text = metrics_text(m);
  EXPECT_NE(text.find("accuracy"), std::string::npos);
  EXPECT_NE(text.find("material_conflict"), std::string::npos);
}

// ---------------------------------------------------------------------------

struct SmallTask {
  TextEncoder encoder;
  std::vector<EncodedExample> train, dev;
};

SmallTask small_word_task(std::size_t n_train = 64, std::size_t n_dev = 16) {
  const auto train = fixtures::separable_corpus({.count = n_train, .seed = 3});
  const auto dev = fixtures::separable_corpus({.count = n_dev, .seed = 4});
  SmallTask t;
  t.encoder.kind = InputKind::kWord;
  t.encoder.seq_len = tiny_word_config().seq_len;
  t.encoder.vocab = build_vocab(train, tiny_word_config().vocab_size);
  t.train = t.encoder.encode_all(train);
  t.dev = t.encoder.encode_all(dev);
  return t;
}

WordCnnConfig small_word_model(const SmallTask& t) {
  auto c = tiny_word_config();
  c.vocab_size = t.encoder.vocab.size();
  return c;
}

TrainConfig quick_config(std::uint64_t seed = 5) {
  TrainConfig c;
  c.batch_size = 16;
  c.epochs = 4;
  c.seed = seed;
  c.optimizer.lr = 5e-3;
  return c;
}

std::vector<std::uint64_t> weight_bits(const Classifier& m) {
  std::vector<std::uint64_t> out;
  for (const auto& p : m.parameters()) {
    for (double v : p.value.values()) out.push_back(std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

TEST(Train, DeterministicForSeed) {
  const auto task = small_word_task();
  WordCnn a(small_word_model(task), 1), b(small_word_model(task), 1), c(small_word_model(task), 1);
  const auto ra = train(a, task.train, task.dev, quick_config(5));
  const auto rb = train(b, task.train, task.dev, quick_config(5));
  const auto rc = train(c, task.train, task.dev, quick_config(6));
  EXPECT_EQ(weight_bits(a), weight_bits(b));
  EXPECT_EQ(ra.history_jsonl(), rb.history_jsonl());
  EXPECT_NE(weight_bits(a), weight_bits(c));
}

TEST(Train, IndependentOfThreadCount) {
  const auto task = small_word_task();
  auto cfg = quick_config();
  cfg.batch_size = 32;
  std::vector<std::vector<std::uint64_t>> results;
  for (unsigned threads : {1u, 2u, 4u}) {
    set_thread_count(threads);
    WordCnn m(small_word_model(task), 1);
    train(m, task.train, task.dev, cfg);
    results.push_back(weight_bits(m));
  }
  set_thread_count(0);
  EXPECT_EQ(results[0], results[1]);
  EXPECT_EQ(results[0], results[2]);
}

TEST(Train, CharModelIndependentOfThreadCount) {
  const auto train_records = fixtures::separable_corpus({.count = 64, .seed = 3});
  const auto dev_records = fixtures::separable_corpus({.count = 16, .seed = 4});
  TextEncoder enc;
  enc.kind = InputKind::kChar;
  enc.seq_len = 40;
  enc.alphabet = build_alphabet(train_records, 64);
  const auto train_set = enc.encode_all(train_records);
  const auto dev_set = enc.encode_all(dev_records);
  auto c = tiny_char_config();
  c.seq_len = enc.seq_len;
  c.alphabet_size = enc.alphabet.size();
  auto cfg = quick_config();
  cfg.epochs = 2;
  std::vector<std::vector<std::uint64_t>> results;
  for (unsigned threads : {1u, 2u, 3u}) {
    set_thread_count(threads);
    CharCnn m(c, 1);
    train(m, train_set, dev_set, cfg);
    results.push_back(weight_bits(m));
  }
  set_thread_count(0);
  EXPECT_EQ(results[0], results[1]);
  EXPECT_EQ(results[0], results[2]);
}

TEST(Train, OverfitsOneBatch) {
  for (InputKind kind : {InputKind::kWord, InputKind::kChar}) {
    const auto records = fixtures::separable_corpus({.count = 8, .seed = 12});
    TextEncoder enc;
    enc.kind = kind;
    std::unique_ptr<Classifier> model;
    if (kind == InputKind::kWord) {
      auto c = tiny_word_config();
      enc.vocab = build_vocab(records, c.vocab_size);
      c.vocab_size = enc.vocab.size();
      c.dropout = 0.0;
      enc.seq_len = c.seq_len;
      model = std::make_unique<WordCnn>(c, 2);
    } else {
      auto c = tiny_char_config();
      c.seq_len = 64;
      enc.alphabet = build_alphabet(records, 64);
      c.alphabet_size = enc.alphabet.size();
      c.dropout = 0.0;
      enc.seq_len = c.seq_len;
      model = std::make_unique<CharCnn>(c, 2);
    }
    const auto batch = enc.encode_all(records);
    std::vector<const EncodedExample*> ptrs;
    for (const auto& e : batch) ptrs.push_back(&e);
    TrainConfig cfg;
    cfg.optimizer.lr = 1e-2;
    Trainer trainer(*model, cfg);
    double loss = 1e9;
    std::size_t step = 0;
    for (; step < 500 && loss >= 0.01; ++step) loss = trainer.step(ptrs);
    EXPECT_LT(loss, 0.01) << to_string(kind) << " after " << step << " steps";
  }
}

TEST(Train, EarlyStoppingInvariants) {
  const auto task = small_word_task();
  for (std::size_t patience : {1u, 2u}) {
    auto cfg = quick_config();
    cfg.epochs = 12;
    cfg.patience = patience;
    WordCnn m(small_word_model(task), 1);
    const auto r = train(m, task.train, task.dev, cfg);
    ASSERT_FALSE(r.history.empty());
    EXPECT_LE(r.history.size(), cfg.epochs);
    double best = -1.0;
    std::size_t best_epoch = 0;
    for (const auto& e : r.history) {
      if (e.dev_accuracy > best) {
        best = e.dev_accuracy;
        best_epoch = e.epoch;
      }
    }
    EXPECT_EQ(r.best_epoch, best_epoch);
    EXPECT_DOUBLE_EQ(r.best_dev_accuracy, best);
    if (r.history.size() < cfg.epochs) {
      EXPECT_EQ(r.history.size() - r.best_epoch, patience);
    }
    // The returned model is the best-epoch model.
    EXPECT_DOUBLE_EQ(evaluate(m, task.dev).accuracy, best);
  }
}

TEST(Train, LearnsSeparableFixture) {
  const auto task = small_word_task(200, 40);
  WordCnn m(small_word_model(task), 1);
  auto cfg = quick_config();
  cfg.epochs = 10;
  const auto r = train(m, task.train, task.dev, cfg);
  EXPECT_GE(r.best_dev_accuracy, 0.9);
}

TEST(Train, EmptyDatasetsAndBadConfig) {
  const auto task = small_word_task(8, 4);
  WordCnn m(small_word_model(task), 1);
  const std::vector<EncodedExample> none;
  try {
    train(m, none, task.dev, quick_config());
    FAIL();
  } catch (const TrainError& e) {
    EXPECT_EQ(e.kind(), TrainErrorKind::kEmptyDataset);
  }
  EXPECT_THROW(train(m, task.train, none, quick_config()), TrainError);
  EXPECT_THROW(evaluate(m, none), TrainError);
  auto bad = quick_config();
  bad.batch_size = 0;
  try {
    train(m, task.train, task.dev, bad);
    FAIL();
  } catch (const TrainError& e) {
    EXPECT_EQ(e.kind(), TrainErrorKind::kInvalidConfig);
  }
}

TEST(Train, PadEmbeddingStaysZero) {
  const auto task = small_word_task();
  WordCnn m(small_word_model(task), 1);
  auto cfg = quick_config();
  cfg.epochs = 3;
  train(m, task.train, task.dev, cfg);
  const auto& table = m.parameters().front().value;
  for (std::size_t j = 0; j < table.dim(1); ++j) EXPECT_EQ(table(0, j), 0.0);
}

TEST(Train, SgdOptimizerRuns) {
  const auto task = small_word_task(32, 8);
  WordCnn m(small_word_model(task), 1);
  auto cfg = quick_config();
  cfg.optimizer.kind = OptimizerKind::kSgd;
  cfg.optimizer.lr = 0.05;
  cfg.epochs = 2;
  const auto r = train(m, task.train, task.dev, cfg);
  EXPECT_EQ(r.steps, 4u);
  for (const auto& e : r.history) EXPECT_TRUE(std::isfinite(e.train_loss));
}

// ---------------------------------------------------------------------------

TEST(PipelineConfig, ParsesTextAndOverrides) {
  PipelineConfig c;
  c.apply_text("# comment\nepochs = 7\nlr=0.01  # inline\n\noptimizer = sgd\none_hot = true\n");
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_DOUBLE_EQ(c.train.optimizer.lr, 0.01);
  EXPECT_EQ(c.train.optimizer.kind, OptimizerKind::kSgd);
  EXPECT_TRUE(c.one_hot);
  c.apply_override("epochs=3");
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.to_json()["epochs"], 3);
}

TEST(PipelineConfig, Errors) {
  PipelineConfig c;
  EXPECT_THROW(c.set("nope", "1"), ConfigError);
  EXPECT_THROW(c.set("epochs", "-1"), ConfigError);
  EXPECT_THROW(c.set("epochs", "3x"), ConfigError);
  EXPECT_THROW(c.set("lr", "fast"), ConfigError);
  EXPECT_THROW(c.set("shuffle", "maybe"), ConfigError);
  EXPECT_THROW(c.apply_override("epochs"), ConfigError);
  try {
    c.apply_text("epochs = 2\nbroken line\n", "my.conf");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("my.conf line 2"), std::string::npos) << e.what();
  }
}

TEST(PipelineConfig, ShippedConfigsParse) {
  for (const char* name : {"fixture.conf", "default.conf"}) {
    PipelineConfig c;
    EXPECT_NO_THROW(c.apply_file(std::string(QUADCODE_SOURCE_DIR) + "/configs/" + name)) << name;
  }
}

TEST(Pipeline, TrainsAndRecordsProvenance) {
  const auto train_records = fixtures::separable_corpus({.count = 40, .seed = 1});
  const auto dev_records = fixtures::separable_corpus({.count = 12, .seed = 2});
  PipelineConfig cfg;
  cfg.apply_text("epochs=2\nword_seq_len=12\nword_embed_dim=8\nword_frames=6\nword_hidden=10\n");
  const auto out = train_pipeline(InputKind::kWord, train_records, dev_records, cfg,
                                  QuadClassMap::default_map());
  EXPECT_EQ(out.checkpoint.model->input_length(), 12u);
  EXPECT_EQ(out.checkpoint.quad_map_digest, sha256_hex(QuadClassMap::default_map().serialize()));
  EXPECT_EQ(out.checkpoint.training["epochs_run"], out.result.history.size());
  EXPECT_THROW(train_pipeline(InputKind::kWord, {}, dev_records, cfg, QuadClassMap::default_map()),
               TrainError);
}

// ---------------------------------------------------------------------------

TEST(Experiment, EmptySuiteGivesEmptyReport) {
  const auto suite = SuiteConfig::from_json(nlohmann::json::parse(R"({"experiments": []})"));
  const auto report = run_experiment(suite);
  EXPECT_TRUE(report.rows.empty());
  EXPECT_NE(report.to_text().find("Word-based models"), std::string::npos);
  EXPECT_NE(report.to_text().find("Character-based models"), std::string::npos);
}

TEST(Experiment, SmallSuite) {
  testing::TempDir dir("suite");
  write_jsonl(fixtures::separable_corpus({.count = 40, .seed = 1}), dir.file("train.jsonl"));
  write_jsonl(fixtures::separable_corpus({.count = 12, .seed = 2}), dir.file("dev.jsonl"));
  write_jsonl(fixtures::separable_corpus({.count = 12, .seed = 3}), dir.file("test.jsonl"));
  const auto suite = SuiteConfig::from_json(nlohmann::json::parse(R"({
    "config": {"epochs": 2, "word_seq_len": 12, "word_embed_dim": 8, "word_frames": 6,
               "word_hidden": 10},
    "experiments": [{"model": "word", "condition": "English input",
                     "train": "train.jsonl", "dev": "dev.jsonl", "test": "test.jsonl"}]})"),
                                            dir.path());
  const auto report = run_experiment(suite);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].condition, "English input");
  EXPECT_EQ(report.rows[0].metrics.total, 12u);
  EXPECT_EQ(report.to_json()["rows"][0]["model"], "word");
  EXPECT_THROW(SuiteConfig::from_json(nlohmann::json::parse(R"({"experiments": [{"model": "word"}]})")),
               ConfigError);
}

}  // namespace
}  // namespace quadcode
