#pragma once

#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <string>

#include "caire/seqcore/alphabet.hpp"
#include "caire/seqcore/rng.hpp"

namespace caire::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("caire_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline seqcore::AminoSequence random_sequence(seqcore::Rng& rng, std::size_t min_len, std::size_t max_len) {
  const std::size_t len = min_len + rng.index(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(seqcore::kAlphabet[rng.index(seqcore::kNumResidues)]);
  return seqcore::AminoSequence(s);
}

}  // namespace caire::testing
