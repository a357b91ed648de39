#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "al4rag/error.hpp"
#include "al4rag/parallel.hpp"
#include "al4rag/vectorize.hpp"

namespace al4rag {

enum class Measure {
  query_only,   // cosine of query views
  prompt_only,  // cosine of rendered-prompt views
  qr_combined,  // cosine of "query reference" views
  ras,          // min(prompt cosine, mean of query and reference cosines)
};

enum class VectorSource { tfidf, embedding };

struct SimilarityKind {
  Measure measure = Measure::ras;
  VectorSource source = VectorSource::tfidf;
  bool operator==(const SimilarityKind&) const = default;
};

std::string_view to_string(Measure measure);
std::string_view to_string(VectorSource source);
std::optional<Measure> parse_measure(std::string_view text);
std::optional<VectorSource> parse_vector_source(std::string_view text);

// Views a measure reads; used to validate imported embedding tables.
std::vector<std::string_view> required_views(Measure measure);

inline constexpr double kSimilarityTolerance = 1e-9;

// Clamp into [0, 1]; negative dense cosines become 0.
inline double clamp_similarity(double value) { return value < 0.0 ? 0.0 : (value > 1.0 ? 1.0 : value); }

// Cosine similarity clamped to [0, 1]; 0 when either vector is empty or zero.
// Throws Error(dimension_mismatch).
double cosine(const SparseVector& u, const SparseVector& v);
double cosine(const DenseVector& u, const DenseVector& v);

// min(p, (q + r) / 2)
inline double ras_combine(double query_cos, double reference_cos, double prompt_cos) {
  const double mean_qr = 0.5 * (query_cos + reference_cos);
  return prompt_cos < mean_qr ? prompt_cos : mean_qr;
}

template <typename Vec>
double pair_similarity(const BasicFieldVectors<Vec>& x, const BasicFieldVectors<Vec>& y, Measure measure) {
  switch (measure) {
    case Measure::query_only: return cosine(x.query, y.query);
    case Measure::prompt_only: return cosine(x.prompt, y.prompt);
    case Measure::qr_combined: return cosine(x.combined, y.combined);
    case Measure::ras:
      return ras_combine(cosine(x.query, y.query), cosine(x.reference, y.reference), cosine(x.prompt, y.prompt));
  }
  return 0.0;
}

/// Dense row-major |rows| x |cols| matrix of similarities in [0, 1].
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids, std::vector<double> values);
  SimilarityMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids);

  std::size_t rows() const noexcept { return row_ids_.size(); }
  std::size_t cols() const noexcept { return col_ids_.size(); }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  const std::vector<std::string>& col_ids() const noexcept { return col_ids_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
  void set(std::size_t row, std::size_t col, double value) { values_[row * cols() + col] = clamp_similarity(value); }

  bool operator==(const SimilarityMatrix&) const = default;

 private:
  std::vector<std::string> row_ids_;
  std::vector<std::string> col_ids_;
  std::vector<double> values_;
};

// Every entry comes from pair_similarity. When rows and cols are the same
// list only the upper triangle is evaluated and mirrored.
template <typename Vec>
SimilarityMatrix build_matrix(std::span<const BasicFieldVectors<Vec>> rows, std::span<const BasicFieldVectors<Vec>> cols,
                              Measure measure, std::size_t workers = 0) {
  std::vector<std::string> row_ids, col_ids;
  row_ids.reserve(rows.size());
  col_ids.reserve(cols.size());
  for (const auto& r : rows) row_ids.push_back(r.record_id);
  for (const auto& c : cols) col_ids.push_back(c.record_id);
  SimilarityMatrix matrix(std::move(row_ids), std::move(col_ids));

  const bool same = rows.data() == cols.data() && rows.size() == cols.size();
  parallel_for(
      rows.size(),
      [&](std::size_t i) {
        for (std::size_t j = same ? i : 0; j < cols.size(); ++j) {
          matrix.set(i, j, pair_similarity(rows[i], cols[j], measure));
        }
      },
      workers);
  if (same) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) matrix.set(i, j, matrix(j, i));
    }
  }
  return matrix;
}

template <typename Vec>
SimilarityMatrix build_matrix(const std::vector<BasicFieldVectors<Vec>>& rows,
                              const std::vector<BasicFieldVectors<Vec>>& cols, Measure measure,
                              std::size_t workers = 0) {
  return build_matrix(std::span<const BasicFieldVectors<Vec>>(rows), std::span<const BasicFieldVectors<Vec>>(cols),
                      measure, workers);
}

// Mean of (1 - sim(x, s)) over the selected set. Throws empty_selected_set.
template <typename Vec>
double diversity_distance(const BasicFieldVectors<Vec>& x, std::span<const BasicFieldVectors<Vec>> selected,
                          Measure measure) {
  if (selected.empty()) throw Error(ErrorCode::empty_selected_set, "diversity distance needs a selected sample");
  double sum = 0.0;
  for (const auto& s : selected) sum += 1.0 - pair_similarity(x, s, measure);
  return sum / static_cast<double>(selected.size());
}

template <typename Vec>
double diversity_distance(const BasicFieldVectors<Vec>& x, const std::vector<BasicFieldVectors<Vec>>& selected,
                          Measure measure) {
  return diversity_distance(x, std::span<const BasicFieldVectors<Vec>>(selected), measure);
}

/// Identity of a cached matrix. A cache whose header disagrees with the
/// requested key is rejected.
struct MatrixCacheKey {
  std::string corpus_hash;
  SimilarityKind kind;
  std::string template_hash;
  std::string vectorizer;  // e.g. "tfidf/per-view" or the embedding file hash

  std::string digest() const;
};

// Header line of JSON (key, shape, ids) then rows*cols little-endian doubles.
void save_matrix_cache(const std::filesystem::path& path, const SimilarityMatrix& matrix, const MatrixCacheKey& key);
SimilarityMatrix load_matrix_cache(const std::filesystem::path& path, const MatrixCacheKey& expected);

}  // namespace al4rag
