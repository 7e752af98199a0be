#pragma once

// Experiment suites: train and evaluate (model kind, input condition) pairs
// and report accuracies in a word-based / character-based two-section table.

#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/corpus.hpp"
#include "quadcode/pipeline.hpp"
#include "quadcode/train_eval.hpp"

namespace quadcode {

struct ExperimentSpec {
  InputKind model = InputKind::kChar;
  std::string condition;
  std::string train_path, dev_path, test_path;
};

struct SuiteConfig {
  PipelineConfig config;
  std::vector<ExperimentSpec> experiments;

  // {"config": {key: value, ...}, "experiments": [{model, condition, train,
  // dev, test}, ...]}. Relative paths resolve against `base_dir`.
  static SuiteConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    SuiteConfig s;
    try {
      if (j.contains("config")) {
        for (const auto& [key, value] : j.at("config").items()) {
          s.config.set(key, value.is_string() ? value.get<std::string>() : value.dump());
        }
      }
      auto resolve = [&](const nlohmann::json& e, const char* key) {
        std::filesystem::path p = e.at(key).get<std::string>();
        return (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
      };
      for (const auto& e : j.value("experiments", nlohmann::json::array())) {
        ExperimentSpec x;
        x.model = parse_input_kind(e.at("model").get<std::string>());
        x.condition = e.at("condition").get<std::string>();
        x.train_path = resolve(e, "train");
        x.dev_path = resolve(e, "dev");
        x.test_path = resolve(e, "test");
        s.experiments.push_back(std::move(x));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad suite file: ") + e.what());
    }
    return s;
  }

  static SuiteConfig load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(path + ": " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path());
  }
};

struct ReportRow {
  InputKind model = InputKind::kChar;
  std::string condition;
  double accuracy = 0.0;
  Metrics metrics;
  std::size_t epochs_run = 0;
};

// Published accuracies on the original (unavailable) corpora; printed for
// context next to fixture-scale results, never compared against them.
struct ReferenceRow {
  InputKind model;
  const char* condition;
  double accuracy;
};
inline constexpr ReferenceRow kReferenceAccuracies[] = {
    {InputKind::kWord, "English input", 0.85},
    {InputKind::kWord, "Native Arabic input", 0.25},
    {InputKind::kWord, "Machine-translated input", 0.60},
    {InputKind::kChar, "English input", 0.94},
    {InputKind::kChar, "Arabic input", 0.93},
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();

  std::string to_text() const {
    std::ostringstream out;
    const int width = 44;
    const std::string rule(width, '-'), double_rule(width, '=');
    out << "QuadClass category classifier accuracy\n";
    out << "settings: " << settings.dump() << "\n";
    out << double_rule << "\n";
    out << std::left << std::setw(width - 10) << "Model" << std::right << std::setw(10) << "Accuracy" << "\n";
    for (InputKind kind : {InputKind::kWord, InputKind::kChar}) {
      out << rule << "\n";
      const std::string title = kind == InputKind::kWord ? "Word-based models" : "Character-based models";
      out << std::string(static_cast<std::size_t>((width - static_cast<int>(title.size())) / 2), ' ')
          << title << "\n";
      out << rule << "\n";
      for (const auto& r : rows) {
        if (r.model != kind) continue;
        out << std::left << std::setw(width - 10) << r.condition << std::right << std::setw(10)
            << std::fixed << std::setprecision(4) << r.accuracy << "\n";
      }
    }
    out << double_rule << "\n";
    out << "Reference accuracies on the original corpora (not reproduced here):\n";
    for (const auto& ref : kReferenceAccuracies) {
      out << "  " << std::left << std::setw(6) << to_string(ref.model) << std::setw(28) << ref.condition
          << std::right << std::fixed << std::setprecision(2) << ref.accuracy << "\n";
    }
    return out.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["settings"] = settings;
    nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      nlohmann::ordered_json row;
      row["model"] = std::string(to_string(r.model));
      row["condition"] = r.condition;
      row["accuracy"] = r.accuracy;
      row["epochs_run"] = r.epochs_run;
      row["metrics"] = r.metrics.to_json();
      rows_json.push_back(row);
    }
    j["rows"] = rows_json;
    nlohmann::ordered_json refs = nlohmann::ordered_json::array();
    for (const auto& ref : kReferenceAccuracies) {
      refs.push_back({{"model", std::string(to_string(ref.model))},
                      {"condition", ref.condition},
                      {"accuracy", ref.accuracy}});
    }
    j["reference"] = {{"note", "original corpora unavailable; cited for context only"}, {"rows", refs}};
    return j;
  }
};

inline ExperimentReport run_experiment(const SuiteConfig& suite,
                                       const QuadClassMap& map = QuadClassMap::default_map()) {
  ExperimentReport report;
  report.settings = suite.config.to_json();
  for (const auto& x : suite.experiments) {
    const auto train_records = read_jsonl(x.train_path, map);
    const auto dev_records = read_jsonl(x.dev_path, map);
    const auto test_records = read_jsonl(x.test_path, map);
    auto trained = train_pipeline(x.model, train_records, dev_records, suite.config, map);
    const auto test_set = trained.checkpoint.encoder.encode_all(test_records);
    ReportRow row;
    row.model = x.model;
    row.condition = x.condition;
    row.metrics = evaluate(*trained.checkpoint.model, test_set);
    row.accuracy = row.metrics.accuracy;
    row.epochs_run = trained.result.history.size();
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace quadcode
