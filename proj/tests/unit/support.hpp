#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace effv::test {

inline std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path test_dir() { return EFFV_TEST_DIR; }

inline std::string corpus(const std::string &name) { return slurp(test_dir() / "corpus" / (name + ".eff")); }

inline std::vector<std::filesystem::path> corpus_files() {
  std::vector<std::filesystem::path> out;
  for (const auto &e : std::filesystem::directory_iterator(test_dir() / "corpus"))
    if (e.path().extension() == ".eff") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace effv::test
