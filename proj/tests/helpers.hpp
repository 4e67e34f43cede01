#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "adapt/corpus.hpp"

namespace testutil {

// Scoped temp directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("adapt_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline adapt::TokenizedDoc doc(std::vector<adapt::TokenId> ids, std::string label = "0") {
  return adapt::TokenizedDoc{std::move(ids), adapt::Label{std::move(label), false}};
}

inline std::vector<adapt::TokenizedDoc> corpus_of(
    std::initializer_list<std::vector<adapt::TokenId>> docs) {
  std::vector<adapt::TokenizedDoc> out;
  for (const auto& ids : docs) out.push_back(doc(ids));
  return out;
}

inline std::vector<adapt::TokenizedDoc> random_corpus(std::mt19937& rng, int max_docs,
                                                      int max_len, int alphabet) {
  std::uniform_int_distribution<int> n_docs(1, max_docs);
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<int> tok(0, alphabet - 1);
  std::vector<adapt::TokenizedDoc> corpus;
  const int n = n_docs(rng);
  for (int d = 0; d < n; ++d) {
    std::vector<adapt::TokenId> ids(static_cast<std::size_t>(len(rng)));
    for (auto& t : ids) t = static_cast<adapt::TokenId>(tok(rng));
    corpus.push_back(doc(std::move(ids)));
  }
  return corpus;
}

}  // namespace testutil
