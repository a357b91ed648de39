#include "al4rag/similarity.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "al4rag/hashing.hpp"
#include "json.hpp"

namespace al4rag {

static_assert(std::endian::native == std::endian::little, "matrix cache assumes a little-endian host");

std::string_view to_string(Measure measure) {
  switch (measure) {
    case Measure::query_only: return "query";
    case Measure::prompt_only: return "prompt";
    case Measure::qr_combined: return "qr";
    case Measure::ras: return "ras";
  }
  return "ras";
}

std::string_view to_string(VectorSource source) {
  return source == VectorSource::tfidf ? "tfidf" : "embedding";
}

std::optional<Measure> parse_measure(std::string_view text) {
  if (text == "query" || text == "query_only") return Measure::query_only;
  if (text == "prompt" || text == "prompt_only") return Measure::prompt_only;
  if (text == "qr" || text == "qr_combined") return Measure::qr_combined;
  if (text == "ras") return Measure::ras;
  return std::nullopt;
}

std::optional<VectorSource> parse_vector_source(std::string_view text) {
  if (text == "tfidf") return VectorSource::tfidf;
  if (text == "embedding") return VectorSource::embedding;
  return std::nullopt;
}

std::vector<std::string_view> required_views(Measure measure) {
  switch (measure) {
    case Measure::query_only: return {"query"};
    case Measure::prompt_only: return {"prompt"};
    case Measure::qr_combined: return {"combined"};
    case Measure::ras: return {"query", "reference", "prompt"};
  }
  return {};
}

double cosine(const SparseVector& u, const SparseVector& v) {
  if (u.dimension != v.dimension) {
    throw Error(ErrorCode::dimension_mismatch, "sparse vectors of dimension " + std::to_string(u.dimension) +
                                                   " and " + std::to_string(v.dimension));
  }
  if (u.empty() || v.empty()) return 0.0;
  double dot = 0.0;
  auto a = u.entries.begin();
  auto b = v.entries.begin();
  while (a != u.entries.end() && b != v.entries.end()) {
    if (a->index < b->index) {
      ++a;
    } else if (b->index < a->index) {
      ++b;
    } else {
      dot += a->weight * b->weight;
      ++a;
      ++b;
    }
  }
  const double denom = u.norm() * v.norm();
  if (denom == 0.0) return 0.0;
  return clamp_similarity(dot / denom);
}

double cosine(const DenseVector& u, const DenseVector& v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "dense vectors of dimension " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return clamp_similarity(dot / (std::sqrt(uu) * std::sqrt(vv)));
}

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids,
                                   std::vector<double> values)
    : row_ids_(std::move(row_ids)), col_ids_(std::move(col_ids)), values_(std::move(values)) {
  if (values_.size() != row_ids_.size() * col_ids_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "similarity matrix value count does not match its shape");
  }
}

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_ids)
    : row_ids_(std::move(row_ids)), col_ids_(std::move(col_ids)), values_(row_ids_.size() * col_ids_.size(), 0.0) {}

namespace {

constexpr std::string_view kCacheFormat = "al4rag-similarity-cache";
constexpr int kCacheVersion = 1;

nlohmann::json key_json(const MatrixCacheKey& key) {
  return {{"corpus_hash", key.corpus_hash},
          {"measure", std::string(to_string(key.kind.measure))},
          {"source", std::string(to_string(key.kind.source))},
          {"template_hash", key.template_hash},
          {"vectorizer", key.vectorizer}};
}

}  // namespace

std::string MatrixCacheKey::digest() const { return sha256_hex(key_json(*this).dump()); }

void save_matrix_cache(const std::filesystem::path& path, const SimilarityMatrix& matrix, const MatrixCacheKey& key) {
  nlohmann::json header;
  header["format"] = kCacheFormat;
  header["version"] = kCacheVersion;
  header["key"] = key_json(key);
  header["rows"] = matrix.rows();
  header["cols"] = matrix.cols();
  header["row_ids"] = matrix.row_ids();
  header["col_ids"] = matrix.col_ids();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write similarity cache " + tmp);
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(matrix.values().data()),
              static_cast<std::streamsize>(matrix.values().size() * sizeof(double)));
    if (!out) throw Error(ErrorCode::io_failure, "failed writing similarity cache " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io_failure, "cannot move similarity cache into place: " + ec.message());
}

SimilarityMatrix load_matrix_cache(const std::filesystem::path& path, const MatrixCacheKey& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open similarity cache " + path.string());
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::cache_mismatch, path.string() + " is not a similarity cache");
  }
  if (header.value("format", "") != kCacheFormat || header.value("version", 0) != kCacheVersion) {
    throw Error(ErrorCode::cache_mismatch, path.string() + " has an unsupported cache format");
  }
  if (header["key"] != key_json(expected)) {
    throw Error(ErrorCode::cache_mismatch, path.string() + " was built for " + header["key"].dump() +
                                               ", requested " + key_json(expected).dump());
  }
  const auto rows = header["rows"].get<std::size_t>();
  const auto cols = header["cols"].get<std::size_t>();
  auto row_ids = header["row_ids"].get<std::vector<std::string>>();
  auto col_ids = header["col_ids"].get<std::vector<std::string>>();
  if (row_ids.size() != rows || col_ids.size() != cols) {
    throw Error(ErrorCode::cache_mismatch, path.string() + " header shape disagrees with its id lists");
  }
  std::vector<double> values(rows * cols);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double))) {
    throw Error(ErrorCode::cache_mismatch, path.string() + " is truncated");
  }
  return SimilarityMatrix(std::move(row_ids), std::move(col_ids), std::move(values));
}

}  // namespace al4rag
