#pragma once

// Per-run provenance record written next to a command's primary output as
// `<output>.manifest.json`.

#include <chrono>
#include <ctime>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quadcode/digest.hpp"
#include "quadcode/strings.hpp"

#ifndef QUADCODE_VERSION
#define QUADCODE_VERSION "0.0.0"
#endif

namespace quadcode {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)), started_(utc_timestamp()) {}

  void set_config(nlohmann::ordered_json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_argv(std::vector<std::string> argv) { argv_ = std::move(argv); }
  void add_input(const std::string& path) { inputs_.emplace_back(path, file_sha256_hex(path)); }
  void add_output(const std::string& path) { outputs_.emplace_back(path, file_sha256_hex(path)); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["version"] = QUADCODE_VERSION;
    j["config"] = config_;
    if (seed_) j["seed"] = *seed_;
    else j["seed"] = nullptr;
    auto files = [](const auto& list) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& [path, digest] : list) a.push_back({{"path", path}, {"sha256", digest}});
      return a;
    };
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    j["started_at"] = started_;
    j["finished_at"] = utc_timestamp();
    return j;
  }

  // Writes `<primary_output>.manifest.json` and returns its path.
  std::string write(const std::string& primary_output) const {
    const std::string path = primary_output + ".manifest.json";
    write_file(path, to_json().dump(2) + "\n");
    return path;
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  std::optional<std::uint64_t> seed_;
  std::vector<std::pair<std::string, std::string>> inputs_, outputs_;
  std::string started_;
};

}  // namespace quadcode
