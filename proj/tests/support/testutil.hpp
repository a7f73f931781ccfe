// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_TESTS_TESTUTIL_HPP
#define DPA_TESTS_TESTUTIL_HPP

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace dpa_test {

/// Self-deleting unique temp directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dpa_test") {
    const auto base = std::filesystem::temp_directory_path();
    static std::atomic<unsigned> counter{0};
    for (;;) {
      auto candidate =
          base / (tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter.fetch_add(1)));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = {}) const {
    return rel.empty() ? path_.string() : (path_ / rel).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string golden_path(const std::string& name) {
  return std::string(DPA_GOLDEN_DIR) + "/" + name;
}

inline std::string golden(const std::string& name) {
  return read_file(golden_path(name));
}

}  // namespace dpa_test

#endif  // DPA_TESTS_TESTUTIL_HPP
