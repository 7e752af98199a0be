#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "quadcode/corpus.hpp"
#include "quadcode/digest.hpp"
#include "quadcode/fixtures.hpp"
#include "quadcode/strings.hpp"
#include "test_support.hpp"

namespace quadcode {
namespace {

using testing::data_file;
using testing::run_cli;
using testing::TempDir;

std::string q(const std::string& s) { return "'" + s + "'"; }

// Word-model settings small enough for a few seconds of training.
const std::string kSmallWord =
    "--set epochs=2 --set word_seq_len=12 --set word_embed_dim=8 --set word_frames=6 "
    "--set word_hidden=10 --set batch_size=16";

TEST(Cli, HelpAndVersion) {
  EXPECT_EQ(run_cli("--help").exit_code, 0);
  const auto v = run_cli("--version");
  EXPECT_EQ(v.exit_code, 0);
  EXPECT_FALSE(v.output.empty());
}

TEST(Cli, BadArgumentsExitTwo) {
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("softlabel --in x.jsonl").exit_code, 2);
  EXPECT_EQ(run_cli("gradcheck --model rnn").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
}

TEST(Cli, SoftlabelFixture) {
  TempDir dir("cli-softlabel");
  const std::string out = dir.file("out.jsonl");
  const auto r = run_cli("softlabel --dict " + q(data_file("softlabel_dict.txt")) + " --in " +
                         q(data_file("softlabel_corpus.jsonl")) + " --out " + q(out));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(read_file(out), read_file(data_file("softlabel_expected.jsonl")));
  const auto expected = nlohmann::json::parse(read_file(data_file("softlabel_histogram.json")));
  for (const auto& [name, count] : expected.items()) {
    EXPECT_NE(r.output.find(name + "\t" + std::to_string(count.get<int>())), std::string::npos)
        << name << "\n" << r.output;
  }
  const auto manifest = nlohmann::json::parse(read_file(out + ".manifest.json"));
  EXPECT_EQ(manifest["command"], "softlabel");
  EXPECT_EQ(manifest["outputs"][0]["sha256"], sha256_hex(read_file(out)));
  EXPECT_EQ(manifest["inputs"].size(), 2u);
}

TEST(Cli, SoftlabelMissingDictionary) {
  TempDir dir("cli-missing");
  const std::string missing = dir.file("no-such-dict.txt");
  const auto r = run_cli("softlabel --dict " + q(missing) + " --in " +
                         q(data_file("softlabel_corpus.jsonl")) + " --out " + q(dir.file("o.jsonl")));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
}

TEST(Cli, SoftlabelEmptyCorpus) {
  TempDir dir("cli-empty");
  write_file(dir.file("empty.jsonl"), "");
  const auto r = run_cli("softlabel --dict " + q(data_file("softlabel_dict.txt")) + " --in " +
                         q(dir.file("empty.jsonl")) + " --out " + q(dir.file("o.jsonl")));
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(read_file(dir.file("o.jsonl")), "");
}

TEST(Cli, MalformedCorpusExitsTwo) {
  TempDir dir("cli-bad");
  write_file(dir.file("bad.jsonl"), "{not json}\n");
  const auto r = run_cli("softlabel --dict " + q(data_file("softlabel_dict.txt")) + " --in " +
                         q(dir.file("bad.jsonl")) + " --out " + q(dir.file("o.jsonl")));
  EXPECT_EQ(r.exit_code, 2) << r.output;
}

TEST(Cli, Gradcheck) {
  TempDir dir("cli-gradcheck");
  const auto ok = run_cli("gradcheck --model char --seed 7 --out " + q(dir.file("gc.json")));
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  const auto j = nlohmann::json::parse(read_file(dir.file("gc.json")));
  EXPECT_LT(j["max_relative_error"].get<double>(), 1e-4);
  const auto bad = run_cli("gradcheck --model word --seed 7 --corrupt-conv-backward 0.9");
  EXPECT_EQ(bad.exit_code, 1) << bad.output;
}

TEST(Cli, TransferAndSplit) {
  TempDir dir("cli-transfer");
  const auto c = fixtures::aligned_corpus(40, 3);
  write_jsonl(c.source, dir.file("src.jsonl"));
  write_jsonl(c.target, dir.file("tgt.jsonl"));
  write_alignments(c.pairs, dir.file("align.jsonl"));
  const auto r = run_cli("transfer --src " + q(dir.file("src.jsonl")) + " --tgt " + q(dir.file("tgt.jsonl")) +
                         " --align " + q(dir.file("align.jsonl")) + " --out " + q(dir.file("out.jsonl")));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(read_jsonl(dir.file("out.jsonl")), c.target_gold);

  const auto s = run_cli("split --in " + q(dir.file("out.jsonl")) + " --seed 3 --outdir " + q(dir.file("split")));
  ASSERT_EQ(s.exit_code, 0) << s.output;
  std::size_t total = 0;
  for (const char* part : {"train", "dev", "test"}) {
    total += read_jsonl(dir.file(std::string("split/") + part + ".jsonl")).size();
  }
  EXPECT_EQ(total, c.target_gold.size());
  EXPECT_TRUE(std::filesystem::exists(dir.file("split/split.manifest.json")));
  EXPECT_EQ(run_cli("split --in " + q(dir.file("out.jsonl")) + " --fractions 0.5,0.6,0.1 --outdir " +
                    q(dir.file("split2")))
                .exit_code,
            2);
}

TEST(Cli, TrainEvalPredict) {
  TempDir dir("cli-train");
  write_jsonl(fixtures::separable_corpus({.count = 80, .seed = 1}), dir.file("train.jsonl"));
  write_jsonl(fixtures::separable_corpus({.count = 20, .seed = 2}), dir.file("dev.jsonl"));
  write_jsonl(fixtures::separable_corpus({.count = 20, .seed = 3}), dir.file("test.jsonl"));
  write_jsonl(fixtures::separable_corpus({.count = 6, .seed = 4, .with_labels = false}),
              dir.file("raw.jsonl"));
  const std::string ckpt = dir.file("model.qcnn");

  const auto t = run_cli("train --model word --train " + q(dir.file("train.jsonl")) + " --dev " +
                         q(dir.file("dev.jsonl")) + " " + kSmallWord + " --out-checkpoint " + q(ckpt));
  ASSERT_EQ(t.exit_code, 0) << t.output;
  EXPECT_TRUE(std::filesystem::exists(ckpt + ".manifest.json"));
  EXPECT_EQ(split_lines(read_file(ckpt + ".history.jsonl")).size() >= 1, true);
  const auto manifest = nlohmann::json::parse(read_file(ckpt + ".manifest.json"));
  EXPECT_EQ(manifest["config"]["epochs"], 2);

  const auto e = run_cli("eval --checkpoint " + q(ckpt) + " --test " + q(dir.file("test.jsonl")) +
                         " --report " + q(dir.file("report.txt")));
  ASSERT_EQ(e.exit_code, 0) << e.output;
  EXPECT_NE(read_file(dir.file("report.txt")).find("accuracy"), std::string::npos);
  const auto report = nlohmann::json::parse(read_file(dir.file("report.txt.json")));
  EXPECT_EQ(report["total"], 20);

  const auto p = run_cli("predict --checkpoint " + q(ckpt) + " --in " + q(dir.file("raw.jsonl")) +
                         " --out " + q(dir.file("pred.jsonl")));
  ASSERT_EQ(p.exit_code, 0) << p.output;
  std::size_t lines = 0;
  const std::string predictions = read_file(dir.file("pred.jsonl"));
  for (auto line : split_lines(predictions)) {
    if (trim(line).empty()) continue;
    ++lines;
    const auto j = nlohmann::json::parse(line);
    double sum = 0.0;
    for (const auto& [k, v] : j["probabilities"].items()) sum += v.get<double>();
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_TRUE(j["probabilities"].contains(j["predicted"].get<std::string>()));
  }
  EXPECT_EQ(lines, 6u);
  EXPECT_TRUE(std::filesystem::exists(dir.file("pred.jsonl.manifest.json")));

  // A checkpoint trained under one quad map is refused under another.
  write_file(dir.file("other.map"),
             "01-04 verbal_cooperation\n05-08 material_cooperation\n09-13 verbal_conflict\n14-20 material_conflict\n");
  const auto mismatch = run_cli("eval --checkpoint " + q(ckpt) + " --test " + q(dir.file("test.jsonl")) +
                                " --report " + q(dir.file("r2.txt")) + " --quadmap " + q(dir.file("other.map")));
  EXPECT_NE(mismatch.exit_code, 0);

  write_file(dir.file("junk.qcnn"), "not a checkpoint");
  EXPECT_EQ(run_cli("eval --checkpoint " + q(dir.file("junk.qcnn")) + " --test " + q(dir.file("test.jsonl")) +
                    " --report " + q(dir.file("r3.txt")))
                .exit_code,
            2);
}

TEST(Cli, TrainRejectsBadConfig) {
  TempDir dir("cli-badconf");
  write_jsonl(fixtures::separable_corpus({.count = 8, .seed = 1}), dir.file("train.jsonl"));
  const auto r = run_cli("train --model word --train " + q(dir.file("train.jsonl")) + " --dev " +
                         q(dir.file("train.jsonl")) + " --set no_such_key=1 --out-checkpoint " +
                         q(dir.file("m.qcnn")));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("no_such_key"), std::string::npos) << r.output;
  const auto c = run_cli("train --model char --train " + q(dir.file("train.jsonl")) + " --dev " +
                         q(dir.file("train.jsonl")) + " --set char_seq_len=32 --out-checkpoint " +
                         q(dir.file("m.qcnn")));
  EXPECT_EQ(c.exit_code, 2) << c.output;
  EXPECT_NE(c.output.find("pool4"), std::string::npos) << c.output;
}

TEST(Cli, Fixtures) {
  TempDir dir("cli-fixtures");
  const auto r = run_cli("fixtures --outdir " + q(dir.file("fx")) + " --train 40 --dev 8 --test 8 --parallel 20");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  for (const char* f : {"en_train.jsonl", "ar_test.jsonl", "parallel_align.jsonl", "suite.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.file(std::string("fx/") + f))) << f;
  }
  EXPECT_EQ(read_jsonl(dir.file("fx/en_train.jsonl")).size(), 40u);
}

}  // namespace
}  // namespace quadcode
