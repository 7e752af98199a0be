#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "quadcode/softlabel.hpp"

namespace quadcode::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("quadcode-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

inline std::string data_file(const std::string& name) {
  return std::string(QUADCODE_TEST_DATA) + "/" + name;
}

// Straightforward leftmost-longest scan over every (position, pattern) pair.
inline std::vector<MatchSpan> naive_match(std::span<const VerbPattern> patterns,
                                          std::span<const std::string> tokens) {
  std::vector<MatchSpan> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const VerbPattern* best = nullptr;
    for (const auto& p : patterns) {
      if (p.tokens.size() > tokens.size() - i) continue;
      bool ok = true;
      for (std::size_t k = 0; k < p.tokens.size() && ok; ++k) ok = tokens[i + k] == p.tokens[k];
      if (ok && (!best || p.tokens.size() > best->tokens.size())) best = &p;
    }
    if (best) {
      out.push_back({i, best->tokens.size(), best->code});
      i += best->tokens.size();
    } else {
      ++i;
    }
  }
  return out;
}

struct CommandResult {
  int exit_code;
  std::string output;
};

// Runs the CLI with stdout and stderr captured together.
inline CommandResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string capture = std::filesystem::temp_directory_path() /
                              ("quadcode-cli-" + std::to_string(::getpid()) + ".out");
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(QUADCODE_CLI) + " " + args +
                          " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::string out;
  if (std::FILE* f = std::fopen(capture.c_str(), "rb")) {
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
  }
  std::filesystem::remove(capture);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

}  // namespace quadcode::testing
