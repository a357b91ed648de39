#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "al4rag/corpus.hpp"

namespace al4rag {

// Lowercased ASCII-alphanumeric runs. Bytes >= 0x80 are kept inside tokens.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t document_count() const noexcept { return document_count_; }
  std::optional<std::uint32_t> index_of(std::string_view term) const;
  const std::string& term(std::uint32_t index) const { return terms_[index]; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t document_frequency(std::uint32_t index) const { return df_[index]; }
  std::optional<std::size_t> document_frequency(std::string_view term) const;

  // ln((1 + N) / (1 + df)) + 1
  double idf(std::uint32_t index) const { return idf_[index]; }

  bool operator==(const Vocabulary& other) const {
    return terms_ == other.terms_ && df_ == other.df_ && document_count_ == other.document_count_;
  }

 private:
  friend Vocabulary fit_vocabulary(const std::vector<std::string>& texts);

  std::vector<std::string> terms_;  // sorted; position is the index
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::size_t> df_;
  std::vector<double> idf_;
  std::size_t document_count_ = 0;
};

// Throws Error(empty_input) for an empty text list.
Vocabulary fit_vocabulary(const std::vector<std::string>& texts);

struct SparseEntry {
  std::uint32_t index;
  double weight;
  bool operator==(const SparseEntry&) const = default;
};

struct SparseVector {
  std::vector<SparseEntry> entries;  // strictly increasing index, non-zero finite weight
  std::size_t dimension = 0;
  bool normalized = false;

  bool empty() const noexcept { return entries.empty(); }
  double norm() const;
  // Checks the ordering/finiteness/normalization invariants.
  bool valid() const;
  bool operator==(const SparseVector&) const = default;
};

using DenseVector = std::vector<double>;

// Raw term frequency times smoothed idf, L2-normalized. Terms missing from
// the vocabulary are ignored; an all-OOV text gives the empty vector.
SparseVector tfidf_vector(std::string_view text, const Vocabulary& vocab);

// L2-normalize a sparse vector built from arbitrary non-negative weights.
SparseVector normalize(SparseVector v);

/// The four per-record views compared by the similarity kernels. `combined`
/// is the query and reference joined with a single space, with no template
/// text.
template <typename Vec>
struct BasicFieldVectors {
  std::string record_id;
  Vec query;
  Vec reference;
  Vec prompt;
  Vec combined;
};

using FieldVectors = BasicFieldVectors<SparseVector>;
using DenseFieldVectors = BasicFieldVectors<DenseVector>;

struct VectorizerConfig {
  // One vocabulary fitted over every view's texts instead of one per view.
  bool shared_vocabulary = false;
  std::size_t workers = 0;  // 0 = hardware concurrency
};

struct FieldVocabularies {
  Vocabulary query;
  Vocabulary reference;
  Vocabulary prompt;
  Vocabulary combined;
};

std::string combined_text(const ConversationRecord& record);

FieldVocabularies fit_field_vocabularies(const Corpus& corpus, const PromptTemplate& tmpl,
                                         const VectorizerConfig& config = {});

std::vector<FieldVectors> vectorize_corpus(const Corpus& corpus, const PromptTemplate& tmpl,
                                           const VectorizerConfig& config = {});

std::vector<FieldVectors> vectorize_with(const Corpus& corpus, const PromptTemplate& tmpl,
                                         const FieldVocabularies& vocabularies, std::size_t workers = 0);

/// Externally computed dense embeddings keyed by (record id, view name).
class EmbeddingTable {
 public:
  static constexpr std::string_view kViews[] = {"query", "reference", "prompt", "combined"};

  const std::map<std::string, std::size_t>& view_dimensions() const noexcept { return dims_; }
  bool has_view(std::string_view view) const { return dims_.count(std::string(view)) != 0; }
  std::size_t entry_count() const noexcept { return entries_.size(); }
  const DenseVector* find(std::string_view record_id, std::string_view view) const;

  // Throws malformed_line / dimension_mismatch / duplicate_id.
  void declare_view(const std::string& view, std::size_t dimension);
  void insert(const std::string& record_id, const std::string& view, DenseVector values);

  const std::map<std::pair<std::string, std::string>, DenseVector>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, std::size_t> dims_;
  std::map<std::pair<std::string, std::string>, DenseVector> entries_;
};

// Header line {"views": {name: dim, ...}} followed by {"id","view","vector"}
// lines. When `corpus` is given, ids it does not contain are rejected with
// unknown_record.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Corpus* corpus = nullptr);
EmbeddingTable parse_embeddings(std::string_view text, const Corpus* corpus = nullptr);
std::string serialize_embeddings(const EmbeddingTable& table);

// Views absent from the table are left empty; every corpus record must have
// every declared view.
std::vector<DenseFieldVectors> dense_field_vectors(const EmbeddingTable& table, const Corpus& corpus);

}  // namespace al4rag
