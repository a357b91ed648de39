#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "al4rag/corpus.hpp"
#include "al4rag/vectorize.hpp"

namespace al4rag::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("al4rag_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline ConversationRecord make_record(std::string id, std::string query, std::string reference, std::string response,
                                      std::optional<int> h = std::nullopt) {
  ConversationRecord r;
  r.id = std::move(id);
  r.query = std::move(query);
  r.reference = std::move(reference);
  r.response = std::move(response);
  r.hallucination = h;
  return r;
}

inline std::string random_words(std::mt19937_64& rng, const std::vector<std::string>& vocab, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (!out.empty()) out += ' ';
    out += vocab[rng() % vocab.size()];
  }
  return out;
}

inline std::vector<std::string> word_list(const std::string& prefix, std::size_t n) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back(prefix + std::to_string(i));
  return words;
}

// Random sparse vector with non-negative weights over `dimension`, normalized.
inline SparseVector random_sparse(std::mt19937_64& rng, std::size_t dimension, double density) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SparseVector v;
  v.dimension = dimension;
  for (std::size_t i = 0; i < dimension; ++i) {
    if (unit(rng) < density) v.entries.push_back({static_cast<std::uint32_t>(i), 0.05 + unit(rng)});
  }
  return normalize(std::move(v));
}

}  // namespace al4rag::testing
