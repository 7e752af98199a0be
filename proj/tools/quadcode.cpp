// quadcode: command-line front end for the labelling, training and
// evaluation pipeline.
//
// Exit status: 0 success, 2 bad input (missing or malformed files, invalid
// options or config), 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quadcode/checkpoint.hpp"
#include "quadcode/corpus.hpp"
#include "quadcode/digest.hpp"
#include "quadcode/experiment.hpp"
#include "quadcode/fixtures.hpp"
#include "quadcode/gradcheck.hpp"
#include "quadcode/manifest.hpp"
#include "quadcode/ontology.hpp"
#include "quadcode/pipeline.hpp"
#include "quadcode/softlabel.hpp"
#include "quadcode/train_eval.hpp"

namespace fs = std::filesystem;
using namespace quadcode;

namespace {

std::vector<std::string> g_argv;

QuadClassMap quad_map_from(const std::string& path) {
  return path.empty() ? QuadClassMap::default_map() : load_quad_map(path);
}

RunManifest manifest_for(const std::string& command) {
  RunManifest m(command);
  m.set_argv(g_argv);
  return m;
}

void print_histogram(const ClassHistogram& h) {
  for (QuadClass q : kAllQuadClasses) {
    std::cout << to_string(q) << '\t' << h[q] << '\n';
  }
  std::cout << "unlabelled\t" << h.unlabelled << '\n';
}

// ---------------------------------------------------------------------------

struct SoftlabelArgs {
  std::string dict, quadmap, in, out, actors;
};

int run_softlabel(const SoftlabelArgs& a) {
  auto manifest = manifest_for("softlabel");
  const QuadClassMap map = quad_map_from(a.quadmap);
  const PatternDictionary dict = load_dictionary(a.dict);
  std::optional<std::unordered_set<std::string>> actors;
  LabelOptions options;
  if (!a.actors.empty()) {
    actors = load_actor_words(a.actors);
    options.actor_words = &*actors;
  }
  const ClassHistogram h = code_corpus(dict, map, a.in, a.out, options);
  print_histogram(h);

  nlohmann::ordered_json config;
  config["dictionary_patterns"] = dict.size();
  config["quad_map"] = map.serialize();
  config["actors"] = a.actors;
  manifest.set_config(config);
  for (const auto& p : {a.dict, a.in}) manifest.add_input(p);
  if (!a.quadmap.empty()) manifest.add_input(a.quadmap);
  if (!a.actors.empty()) manifest.add_input(a.actors);
  manifest.add_output(a.out);
  manifest.write(a.out);
  return 0;
}

struct TransferArgs {
  std::string src, tgt, align, out, quadmap;
};

int run_transfer(const TransferArgs& a) {
  auto manifest = manifest_for("transfer");
  const QuadClassMap map = quad_map_from(a.quadmap);
  const auto src = read_jsonl(a.src, map);
  const auto tgt = read_jsonl(a.tgt, map);
  const auto pairs = read_alignments(a.align);
  const TransferResult r = transfer_labels(src, tgt, pairs);
  write_jsonl(r.records, a.out);
  std::cout << "pairs\t" << r.report.pairs << "\n"
            << "targets_labelled\t" << r.report.targets_labelled << "\n"
            << "extra_pairs\t" << r.report.extra_pairs << "\n"
            << "conflicting_targets\t" << r.report.conflicting_targets << "\n"
            << "unaligned_targets\t" << r.report.unaligned_targets << "\n";
  manifest.set_config({{"quad_map", map.serialize()}});
  for (const auto& p : {a.src, a.tgt, a.align}) manifest.add_input(p);
  manifest.add_output(a.out);
  manifest.write(a.out);
  return 0;
}

struct SplitArgs {
  std::string in, fractions = "0.8,0.1,0.1", outdir, quadmap;
  std::uint64_t seed = 1;
};

SplitFractions parse_fractions(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stod(part, &pos));
      if (trim(part.substr(pos)).size() != 0) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw InputError("--fractions: \"" + text + "\" is not three comma-separated numbers");
    }
  }
  if (v.size() != 3) throw InputError("--fractions: expected train,dev,test");
  return {v[0], v[1], v[2]};
}

int run_split(const SplitArgs& a) {
  auto manifest = manifest_for("split");
  const SplitFractions f = parse_fractions(a.fractions);
  validate_fractions(f);
  const auto records = read_jsonl(a.in, quad_map_from(a.quadmap));
  const DatasetSplit split = stratified_split(records, f, a.seed);
  fs::create_directories(a.outdir);
  const fs::path dir(a.outdir);
  const std::pair<const char*, const std::vector<SentenceRecord>*> parts[] = {
      {"train.jsonl", &split.train}, {"dev.jsonl", &split.dev}, {"test.jsonl", &split.test}};
  for (const auto& [name, recs] : parts) {
    write_jsonl(*recs, (dir / name).string());
    std::cout << name << '\t' << recs->size() << '\n';
  }
  manifest.set_seed(a.seed);
  manifest.set_config({{"fractions", {f.train, f.dev, f.test}}});
  manifest.add_input(a.in);
  for (const auto& [name, recs] : parts) manifest.add_output((dir / name).string());
  manifest.write((dir / "split").string());
  return 0;
}

struct TrainArgs {
  std::string model, train, dev, config, out_checkpoint, history, quadmap;
  std::vector<std::string> overrides;
};

PipelineConfig resolve_config(const std::string& file, const std::vector<std::string>& overrides) {
  PipelineConfig cfg;
  if (!file.empty()) cfg.apply_file(file);
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

int run_train(const TrainArgs& a) {
  auto manifest = manifest_for("train");
  const InputKind kind = parse_input_kind(a.model);
  const PipelineConfig cfg = resolve_config(a.config, a.overrides);
  const QuadClassMap map = quad_map_from(a.quadmap);
  const auto train_records = read_jsonl(a.train, map);
  const auto dev_records = read_jsonl(a.dev, map);
  auto trained = train_pipeline(kind, train_records, dev_records, cfg, map, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "  train_loss " << r.train_loss << "  dev_accuracy "
              << r.dev_accuracy << "\n";
  });
  save_checkpoint(trained.checkpoint, a.out_checkpoint);
  const std::string history = a.history.empty() ? a.out_checkpoint + ".history.jsonl" : a.history;
  write_file(history, trained.result.history_jsonl());
  std::cout << "best_epoch\t" << trained.result.best_epoch << "\n"
            << "best_dev_accuracy\t" << trained.result.best_dev_accuracy << "\n"
            << "parameters\t" << trained.checkpoint.model->parameter_count() << "\n";

  nlohmann::ordered_json config = cfg.to_json();
  config["model"] = std::string(to_string(kind));
  config["quad_map"] = map.serialize();
  manifest.set_config(config);
  manifest.set_seed(cfg.train.seed);
  for (const auto& p : {a.train, a.dev}) manifest.add_input(p);
  if (!a.config.empty()) manifest.add_input(a.config);
  if (!a.quadmap.empty()) manifest.add_input(a.quadmap);
  if (!cfg.embeddings.empty()) manifest.add_input(cfg.embeddings);
  manifest.add_output(a.out_checkpoint);
  manifest.add_output(history);
  manifest.write(a.out_checkpoint);
  return 0;
}

void check_map_digest(const Checkpoint& ckpt, const QuadClassMap& map) {
  if (!ckpt.quad_map_digest.empty() && ckpt.quad_map_digest != sha256_hex(map.serialize())) {
    throw InputError("quad map differs from the one the checkpoint was trained with");
  }
}

struct EvalArgs {
  std::string checkpoint, test, report, quadmap;
};

int run_eval(const EvalArgs& a) {
  auto manifest = manifest_for("eval");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const QuadClassMap map = quad_map_from(a.quadmap);
  check_map_digest(ckpt, map);
  const auto records = read_jsonl(a.test, map);
  const Metrics m = evaluate(*ckpt.model, ckpt.encoder.encode_all(records));
  std::string text = "model: " + std::string(to_string(ckpt.encoder.kind)) + "\n" + metrics_text(m);
  write_file(a.report, text);
  const std::string json_path = a.report + ".json";
  nlohmann::ordered_json j = m.to_json();
  j["model"] = std::string(to_string(ckpt.encoder.kind));
  write_file(json_path, j.dump(2) + "\n");
  std::cout << text;
  manifest.set_config({{"model", std::string(to_string(ckpt.encoder.kind))}});
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.test);
  manifest.add_output(a.report);
  manifest.add_output(json_path);
  manifest.write(a.report);
  return 0;
}

struct PredictArgs {
  std::string checkpoint, in, out, quadmap;
};

int run_predict(const PredictArgs& a) {
  auto manifest = manifest_for("predict");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const QuadClassMap map = quad_map_from(a.quadmap);
  check_map_digest(ckpt, map);
  const auto records = read_jsonl(a.in, map);
  std::vector<Prediction> predictions(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    predictions[i] = predict(*ckpt.model, ckpt.encoder.encode(records[i].text));
  });
  std::string out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    nlohmann::ordered_json j = record_to_json(records[i]);
    j["predicted"] = std::string(to_string(class_from_index(predictions[i].label)));
    nlohmann::ordered_json probs = nlohmann::ordered_json::object();
    for (QuadClass q : kAllQuadClasses) probs[std::string(to_string(q))] = predictions[i].probs[class_index(q)];
    j["probabilities"] = probs;
    out += dump_line(j);
  }
  write_file(a.out, out);
  std::cout << "predicted\t" << records.size() << "\n";
  manifest.set_config({{"model", std::string(to_string(ckpt.encoder.kind))}});
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.in);
  manifest.add_output(a.out);
  manifest.write(a.out);
  return 0;
}

struct GradcheckArgs {
  std::string model, out;
  std::uint64_t seed = 0;
  double corrupt = 1.0;
};

int run_gradcheck(const GradcheckArgs& a) {
  const InputKind kind = parse_input_kind(a.model);
  const auto r = tiny_gradcheck(kind, a.seed, a.corrupt).result;
  std::printf("model %s seed %llu\n", std::string(to_string(kind)).c_str(),
              static_cast<unsigned long long>(a.seed));
  std::printf("max_relative_error %.6e (%s)\n", r.max_relative_error, r.worst_parameter.c_str());
  std::printf("checked %zu, skipped at kinks %zu, below resolution %zu, uncovered tensors %zu\n",
              r.checked, r.skipped_at_kinks, r.skipped_below_resolution, r.uncovered_parameters);
  const bool ok = r.max_relative_error < 1e-4 && r.uncovered_parameters == 0;
  if (!a.out.empty()) {
    auto manifest = manifest_for("gradcheck");
    nlohmann::ordered_json j;
    j["model"] = std::string(to_string(kind));
    j["seed"] = a.seed;
    j["conv_weight_grad_scale"] = a.corrupt;
    j["max_relative_error"] = r.max_relative_error;
    j["worst_parameter"] = r.worst_parameter;
    j["checked"] = r.checked;
    j["skipped_at_kinks"] = r.skipped_at_kinks;
    j["skipped_below_resolution"] = r.skipped_below_resolution;
    j["uncovered_parameters"] = r.uncovered_parameters;
    j["passed"] = ok;
    write_file(a.out, j.dump(2) + "\n");
    manifest.set_seed(a.seed);
    manifest.set_config({{"model", std::string(to_string(kind))}, {"conv_weight_grad_scale", a.corrupt}});
    manifest.add_output(a.out);
    manifest.write(a.out);
  }
  std::printf("%s\n", ok ? "ok" : "FAILED: max relative error >= 1e-4");
  return ok ? 0 : 1;
}

struct FixturesArgs {
  std::string outdir;
  std::uint64_t seed = 1;
  std::size_t train = 2000, dev = 400, test = 400, parallel = 200;
};

int run_fixtures(const FixturesArgs& a) {
  auto manifest = manifest_for("fixtures");
  fs::create_directories(a.outdir);
  const fs::path dir(a.outdir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::vector<SentenceRecord>& recs) {
    const std::string path = (dir / name).string();
    write_jsonl(recs, path);
    written.push_back(path);
    std::cout << name << '\t' << recs.size() << '\n';
  };
  const Rng root(a.seed);
  for (const char* lang : {"en", "ar"}) {
    const std::pair<const char*, std::size_t> splits[] = {{"train", a.train}, {"dev", a.dev}, {"test", a.test}};
    std::uint64_t tag = std::string(lang) == "en" ? 0 : 10;
    for (const auto& [part, count] : splits) {
      fixtures::CorpusOptions o;
      o.count = count;
      o.lang = lang;
      o.seed = root.split(tag++).next_u64();
      o.id_prefix = std::string(lang) + "-" + part + "-";
      o.source = "synthetic";
      emit(std::string(lang) + "_" + part + ".jsonl", fixtures::separable_corpus(o));
    }
  }
  fixtures::CorpusOptions raw;
  raw.count = a.parallel;
  raw.lang = "en";
  raw.seed = root.split(20).next_u64();
  raw.id_prefix = "raw-";
  raw.source = "synthetic";
  raw.with_labels = false;
  emit("raw_en.jsonl", fixtures::separable_corpus(raw));

  const auto aligned = fixtures::aligned_corpus(a.parallel, root.split(21).next_u64());
  emit("parallel_en.jsonl", aligned.source);
  emit("parallel_ar.jsonl", aligned.target);
  emit("parallel_ar_gold.jsonl", aligned.target_gold);
  const std::string align_path = (dir / "parallel_align.jsonl").string();
  write_alignments(aligned.pairs, align_path);
  written.push_back(align_path);
  std::cout << "parallel_align.jsonl\t" << aligned.pairs.size() << '\n';

  nlohmann::ordered_json suite;
  suite["config"] = {{"epochs", "20"}, {"patience", "3"}, {"word_seq_len", "16"}, {"char_seq_len", "64"}};
  suite["experiments"] = nlohmann::ordered_json::array();
  for (const char* model : {"word", "char"}) {
    for (const auto& [lang, condition] : {std::pair{"en", "English input"}, std::pair{"ar", "Arabic input"}}) {
      const std::string l = lang;
      suite["experiments"].push_back({{"model", model},
                                      {"condition", condition},
                                      {"train", l + "_train.jsonl"},
                                      {"dev", l + "_dev.jsonl"},
                                      {"test", l + "_test.jsonl"}});
    }
  }
  const std::string suite_path = (dir / "suite.json").string();
  write_file(suite_path, suite.dump(2) + "\n");
  written.push_back(suite_path);

  manifest.set_seed(a.seed);
  manifest.set_config({{"train", a.train}, {"dev", a.dev}, {"test", a.test}, {"parallel", a.parallel}});
  for (const auto& p : written) manifest.add_output(p);
  manifest.write((dir / "fixtures").string());
  return 0;
}

struct ExperimentArgs {
  std::string suite, report, quadmap;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  auto manifest = manifest_for("experiment");
  const SuiteConfig suite = SuiteConfig::load(a.suite);
  const ExperimentReport report = run_experiment(suite, quad_map_from(a.quadmap));
  const std::string text = report.to_text();
  write_file(a.report, text);
  const std::string json_path = a.report + ".json";
  write_file(json_path, report.to_json().dump(2) + "\n");
  std::cout << text;
  manifest.set_config(suite.config.to_json());
  manifest.set_seed(suite.config.train.seed);
  manifest.add_input(a.suite);
  for (const auto& x : suite.experiments) {
    for (const auto& p : {x.train_path, x.dev_path, x.test_path}) manifest.add_input(p);
  }
  manifest.add_output(a.report);
  manifest.add_output(json_path);
  manifest.write(a.report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"quadcode: QuadClass event-category labelling and CNN sentence classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QUADCODE_VERSION));
  app.footer(
      "Environment: QUADCODE_THREADS caps worker threads (default: all cores); results do not depend on it.\n"
      "Config precedence for train: --set overrides > --config file > built-in defaults.\n"
      "Exit status: 0 success, 2 input error, 1 internal error.");

  int rc = 0;

  SoftlabelArgs sl;
  auto* softlabel = app.add_subcommand("softlabel", "Label sentences by verb-phrase dictionary matching");
  softlabel->add_option("--dict", sl.dict, "Dictionary file: `phrase -> CAMEO` per line")->required();
  softlabel->add_option("--quadmap", sl.quadmap, "CAMEO top-level -> QuadClass map (default: built-in)");
  softlabel->add_option("--in", sl.in, "Input corpus (JSONL)")->required();
  softlabel->add_option("--out", sl.out, "Output corpus of labelled sentences (JSONL)")->required();
  softlabel->add_option("--actors", sl.actors, "Optional actor word list; sentences without one stay unlabelled");
  softlabel->callback([&] { rc = run_softlabel(sl); });

  TransferArgs tr;
  auto* transfer = app.add_subcommand("transfer", "Copy labels across sentence alignments");
  transfer->add_option("--src", tr.src, "Labelled source corpus (JSONL)")->required();
  transfer->add_option("--tgt", tr.tgt, "Target corpus (JSONL)")->required();
  transfer->add_option("--align", tr.align, "Alignment pairs (JSONL: src_id, tgt_id)")->required();
  transfer->add_option("--out", tr.out, "Labelled target corpus (JSONL)")->required();
  transfer->add_option("--quadmap", tr.quadmap, "Quad map used to validate records (default: built-in)");
  transfer->callback([&] { rc = run_transfer(tr); });

  SplitArgs sp;
  auto* split = app.add_subcommand("split", "Stratified train/dev/test split");
  split->add_option("--in", sp.in, "Labelled corpus (JSONL)")->required();
  split->add_option("--fractions", sp.fractions, "train,dev,test fractions summing to 1")->capture_default_str();
  split->add_option("--seed", sp.seed, "Shuffle seed")->capture_default_str();
  split->add_option("--outdir", sp.outdir, "Directory for train.jsonl, dev.jsonl, test.jsonl")->required();
  split->add_option("--quadmap", sp.quadmap, "Quad map used to validate records (default: built-in)");
  split->callback([&] { rc = run_split(sp); });

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a word or char CNN");
  train_cmd->add_option("--model", ta.model, "Model kind")->required()->check(CLI::IsMember({"word", "char"}));
  train_cmd->add_option("--train", ta.train, "Training corpus (JSONL)")->required();
  train_cmd->add_option("--dev", ta.dev, "Development corpus (JSONL)")->required();
  train_cmd->add_option("--config", ta.config, "Config file of `key = value` lines");
  train_cmd->add_option("--set", ta.overrides, "Override one config key (key=value); repeatable");
  train_cmd->add_option("--out-checkpoint", ta.out_checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--history", ta.history, "Per-epoch history JSONL (default: <checkpoint>.history.jsonl)");
  train_cmd->add_option("--quadmap", ta.quadmap, "Quad map (default: built-in)");
  train_cmd->callback([&] { rc = run_train(ta); });

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled corpus");
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval->add_option("--test", ev.test, "Labelled test corpus (JSONL)")->required();
  eval->add_option("--report", ev.report, "Text report; a JSON twin is written to <report>.json")->required();
  eval->add_option("--quadmap", ev.quadmap, "Quad map (default: built-in)");
  eval->callback([&] { rc = run_eval(ev); });

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Annotate sentences with predicted class and probabilities");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--in", pr.in, "Input corpus (JSONL)")->required();
  predict_cmd->add_option("--out", pr.out, "Annotated output (JSONL)")->required();
  predict_cmd->add_option("--quadmap", pr.quadmap, "Quad map (default: built-in)");
  predict_cmd->callback([&] { rc = run_predict(pr); });

  GradcheckArgs gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of a tiny model's gradients");
  gradcheck->add_option("--model", gc.model, "Model kind")->required()->check(CLI::IsMember({"word", "char"}));
  gradcheck->add_option("--seed", gc.seed, "Seed for weights, input and dropout mask")->capture_default_str();
  gradcheck->add_option("--corrupt-conv-backward", gc.corrupt,
                        "Scale conv weight gradients by this factor (negative control)")
      ->capture_default_str();
  gradcheck->add_option("--out", gc.out, "Optional JSON result file");
  gradcheck->callback([&] { rc = run_gradcheck(gc); });

  FixturesArgs fx;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write synthetic separable corpora and an experiment suite");
  fixtures_cmd->add_option("--outdir", fx.outdir, "Output directory")->required();
  fixtures_cmd->add_option("--seed", fx.seed, "Generator seed")->capture_default_str();
  fixtures_cmd->add_option("--train", fx.train, "Training sentences per language")->capture_default_str();
  fixtures_cmd->add_option("--dev", fx.dev, "Development sentences per language")->capture_default_str();
  fixtures_cmd->add_option("--test", fx.test, "Test sentences per language")->capture_default_str();
  fixtures_cmd->add_option("--parallel", fx.parallel, "Sentences in the aligned corpus")->capture_default_str();
  fixtures_cmd->callback([&] { rc = run_fixtures(fx); });

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Train and evaluate every entry of a suite file");
  experiment->add_option("--suite", ex.suite, "Suite JSON file")->required();
  experiment->add_option("--report", ex.report, "Text report; a JSON twin is written to <report>.json")->required();
  experiment->add_option("--quadmap", ex.quadmap, "Quad map (default: built-in)");
  experiment->callback([&] { rc = run_experiment_cmd(ex); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
