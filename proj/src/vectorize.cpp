#include "al4rag/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "al4rag/error.hpp"
#include "al4rag/parallel.hpp"

namespace al4rag {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

char lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(lower_ascii(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view term) const {
  const auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Vocabulary::document_frequency(std::string_view term) const {
  const auto index = index_of(term);
  if (!index) return std::nullopt;
  return df_[*index];
}

Vocabulary fit_vocabulary(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::empty_input, "cannot fit a vocabulary on zero documents");

  std::map<std::string, std::size_t> df;  // ordered map gives lexicographic indices
  for (const auto& text : texts) {
    auto tokens = tokenize(text);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& token : tokens) ++df[std::move(token)];
  }

  Vocabulary vocab;
  vocab.document_count_ = texts.size();
  vocab.terms_.reserve(df.size());
  vocab.df_.reserve(df.size());
  vocab.idf_.reserve(df.size());
  const double n = static_cast<double>(texts.size());
  for (auto& [term, count] : df) {
    const auto index = static_cast<std::uint32_t>(vocab.terms_.size());
    vocab.index_.emplace(term, index);
    vocab.terms_.push_back(term);
    vocab.df_.push_back(count);
    vocab.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return vocab;
}

double SparseVector::norm() const {
  double sum = 0.0;
  for (const auto& e : entries) sum += e.weight * e.weight;
  return std::sqrt(sum);
}

bool SparseVector::valid() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.index >= dimension || !std::isfinite(e.weight) || e.weight == 0.0) return false;
    if (i > 0 && entries[i - 1].index >= e.index) return false;
  }
  if (normalized && !entries.empty() && std::abs(norm() - 1.0) > 1e-9) return false;
  return true;
}

SparseVector normalize(SparseVector v) {
  const double n = v.norm();
  if (n > 0.0) {
    for (auto& e : v.entries) e.weight /= n;
  }
  v.normalized = true;
  return v;
}

SparseVector tfidf_vector(std::string_view text, const Vocabulary& vocab) {
  std::map<std::uint32_t, std::size_t> tf;
  for (const auto& token : tokenize(text)) {
    if (const auto index = vocab.index_of(token)) ++tf[*index];
  }
  SparseVector v;
  v.dimension = vocab.size();
  v.entries.reserve(tf.size());
  for (const auto& [index, count] : tf) {
    v.entries.push_back({index, static_cast<double>(count) * vocab.idf(index)});
  }
  return normalize(std::move(v));
}

std::string combined_text(const ConversationRecord& record) { return record.query + " " + record.reference; }

FieldVocabularies fit_field_vocabularies(const Corpus& corpus, const PromptTemplate& tmpl,
                                         const VectorizerConfig& config) {
  if (corpus.empty()) throw Error(ErrorCode::empty_input, "cannot vectorize an empty corpus");
  std::vector<std::string> queries, references, prompts, combined;
  for (const auto& record : corpus) {
    queries.push_back(record.query);
    references.push_back(record.reference);
    prompts.push_back(render_prompt(record, tmpl));
    combined.push_back(combined_text(record));
  }
  if (config.shared_vocabulary) {
    std::vector<std::string> all;
    all.reserve(queries.size() * 4);
    for (auto* view : {&queries, &references, &prompts, &combined}) {
      all.insert(all.end(), view->begin(), view->end());
    }
    auto shared = fit_vocabulary(all);
    return {shared, shared, shared, shared};
  }
  return {fit_vocabulary(queries), fit_vocabulary(references), fit_vocabulary(prompts), fit_vocabulary(combined)};
}

std::vector<FieldVectors> vectorize_with(const Corpus& corpus, const PromptTemplate& tmpl,
                                         const FieldVocabularies& vocabularies, std::size_t workers) {
  std::vector<FieldVectors> out(corpus.size());
  parallel_for(
      corpus.size(),
      [&](std::size_t i) {
        const auto& record = corpus[i];
        out[i].record_id = record.id;
        out[i].query = tfidf_vector(record.query, vocabularies.query);
        out[i].reference = tfidf_vector(record.reference, vocabularies.reference);
        out[i].prompt = tfidf_vector(render_prompt(record, tmpl), vocabularies.prompt);
        out[i].combined = tfidf_vector(combined_text(record), vocabularies.combined);
      },
      workers);
  return out;
}

std::vector<FieldVectors> vectorize_corpus(const Corpus& corpus, const PromptTemplate& tmpl,
                                           const VectorizerConfig& config) {
  return vectorize_with(corpus, tmpl, fit_field_vocabularies(corpus, tmpl, config), config.workers);
}

const DenseVector* EmbeddingTable::find(std::string_view record_id, std::string_view view) const {
  const auto it = entries_.find({std::string(record_id), std::string(view)});
  return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingTable::declare_view(const std::string& view, std::size_t dimension) {
  if (view.empty() || dimension == 0) {
    throw Error(ErrorCode::malformed_line, "view '" + view + "' needs a name and a positive dimension");
  }
  dims_[view] = dimension;
}

void EmbeddingTable::insert(const std::string& record_id, const std::string& view, DenseVector values) {
  const auto dim = dims_.find(view);
  if (dim == dims_.end()) {
    throw Error(ErrorCode::malformed_line, "record '" + record_id + "' uses undeclared view '" + view + "'");
  }
  if (values.size() != dim->second) {
    throw Error(ErrorCode::dimension_mismatch, "record '" + record_id + "' view '" + view + "' has dimension " +
                                                   std::to_string(values.size()) + ", expected " +
                                                   std::to_string(dim->second));
  }
  for (const double x : values) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::malformed_line, "record '" + record_id + "' has a non-finite embedding value");
    }
  }
  if (!entries_.emplace(std::make_pair(record_id, view), std::move(values)).second) {
    throw Error(ErrorCode::duplicate_id, "record '" + record_id + "' view '" + view + "' appears twice");
  }
}

EmbeddingTable parse_embeddings(std::string_view text, const Corpus* corpus) {
  using nlohmann::json;
  EmbeddingTable table;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    const auto where = "line " + std::to_string(line_no) + ": ";
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::malformed_line, where + "invalid JSON (" + e.what() + ")");
    }
    if (!have_header) {
      if (!obj.is_object() || !obj.contains("views") || !obj["views"].is_object()) {
        throw Error(ErrorCode::malformed_line, where + "expected header {\"views\": {name: dim}}");
      }
      for (const auto& [name, dim] : obj["views"].items()) {
        if (!dim.is_number_unsigned()) {
          throw Error(ErrorCode::malformed_line, where + "dimension of view '" + name + "' must be a positive integer");
        }
        table.declare_view(name, dim.get<std::size_t>());
      }
      have_header = true;
      continue;
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() || !obj.contains("view") ||
        !obj["view"].is_string() || !obj.contains("vector") || !obj["vector"].is_array()) {
      throw Error(ErrorCode::malformed_line, where + "expected {\"id\", \"view\", \"vector\"}");
    }
    const auto id = obj["id"].get<std::string>();
    if (corpus && !corpus->index_of(id)) {
      throw Error(ErrorCode::unknown_record, where + "record '" + id + "' is not in the corpus");
    }
    DenseVector values;
    values.reserve(obj["vector"].size());
    for (const auto& x : obj["vector"]) {
      if (!x.is_number()) throw Error(ErrorCode::malformed_line, where + "vector entries must be numbers");
      values.push_back(x.get<double>());
    }
    try {
      table.insert(id, obj["view"].get<std::string>(), std::move(values));
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::malformed_line, "embedding file has no header line");
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Corpus* corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open embedding file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_embeddings(buffer.str(), corpus);
}

std::string serialize_embeddings(const EmbeddingTable& table) {
  nlohmann::json header;
  header["views"] = nlohmann::json::object();
  for (const auto& [name, dim] : table.view_dimensions()) header["views"][name] = dim;
  std::string out = header.dump() + "\n";
  for (const auto& [key, values] : table.entries()) {
    nlohmann::json line;
    line["id"] = key.first;
    line["view"] = key.second;
    line["vector"] = values;
    out += line.dump() + "\n";
  }
  return out;
}

std::vector<DenseFieldVectors> dense_field_vectors(const EmbeddingTable& table, const Corpus& corpus) {
  std::vector<DenseFieldVectors> out;
  out.reserve(corpus.size());
  for (const auto& record : corpus) {
    DenseFieldVectors fv;
    fv.record_id = record.id;
    const std::pair<std::string_view, DenseVector*> slots[] = {
        {"query", &fv.query}, {"reference", &fv.reference}, {"prompt", &fv.prompt}, {"combined", &fv.combined}};
    for (const auto& [view, slot] : slots) {
      if (!table.has_view(view)) continue;
      const auto* values = table.find(record.id, view);
      if (!values) {
        throw Error(ErrorCode::unknown_record,
                    "record '" + record.id + "' has no embedding for view '" + std::string(view) + "'");
      }
      *slot = *values;
    }
    out.push_back(std::move(fv));
  }
  return out;
}

}  // namespace al4rag
