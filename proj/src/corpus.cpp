#include "al4rag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "al4rag/error.hpp"
#include "al4rag/hashing.hpp"
#include "al4rag/rng.hpp"

namespace al4rag {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kWhitespace = " \t\r\n\f\v";
constexpr std::string_view kQueryPlaceholder = "{query}";
constexpr std::string_view kReferencePlaceholder = "{reference}";

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string require_text(const ojson& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::malformed_line, std::string("missing field '") + key + "'");
  }
  if (!it->is_string()) {
    throw Error(ErrorCode::malformed_line, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::qa: return "qa";
    case TaskKind::summary: return "summary";
    case TaskKind::data2text: return "data2text";
    case TaskKind::other: return "other";
  }
  return "other";
}

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  if (text == "qa") return TaskKind::qa;
  if (text == "summary") return TaskKind::summary;
  if (text == "data2text") return TaskKind::data2text;
  if (text == "other") return TaskKind::other;
  return std::nullopt;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(kWhitespace);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(kWhitespace);
  return std::string(text.substr(first, last - first + 1));
}

void validate_record(const ConversationRecord& record) {
  if (record.id.empty()) {
    throw Error(ErrorCode::malformed_line, "id must be non-empty");
  }
  const std::pair<const char*, const std::string*> texts[] = {
      {"query", &record.query}, {"reference", &record.reference}, {"response", &record.response}};
  for (const auto& [name, value] : texts) {
    if (trim(*value).empty()) {
      throw Error(ErrorCode::malformed_line,
                  "record '" + record.id + "': field '" + name + "' is empty after trimming");
    }
  }
  if (record.hallucination && *record.hallucination != 0 && *record.hallucination != 1) {
    throw Error(ErrorCode::malformed_line, "record '" + record.id + "': hallucination must be 0 or 1");
  }
}

ConversationRecord record_from_json(const ojson& obj) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::malformed_line, "line is not a JSON object");
  }
  ConversationRecord record;
  record.id = require_text(obj, "id");
  record.query = require_text(obj, "query");
  record.reference = require_text(obj, "reference");
  record.response = require_text(obj, "response");

  if (const auto it = obj.find("hallucination"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_integer()) {
      throw Error(ErrorCode::malformed_line, "hallucination must be the integer 0 or 1");
    }
    record.hallucination = it->get<int>();
  }
  if (const auto it = obj.find("task_kind"); it != obj.end() && !it->is_null()) {
    const auto kind = it->is_string() ? parse_task_kind(it->get<std::string>()) : std::nullopt;
    if (!kind) {
      throw Error(ErrorCode::malformed_line, "task_kind must be one of qa, summary, data2text, other");
    }
    record.task_kind = kind;
  }
  for (const auto& [key, value] : obj.items()) {
    if (key == "id" || key == "query" || key == "reference" || key == "response" ||
        key == "hallucination" || key == "task_kind") {
      continue;
    }
    record.extra[key] = value;
  }
  validate_record(record);
  return record;
}

ojson record_to_json(const ConversationRecord& record) {
  ojson obj = ojson::object();
  obj["id"] = record.id;
  obj["query"] = record.query;
  obj["reference"] = record.reference;
  obj["response"] = record.response;
  if (record.hallucination) obj["hallucination"] = *record.hallucination;
  if (record.task_kind) obj["task_kind"] = std::string(to_string(*record.task_kind));
  for (const auto& [key, value] : record.extra.items()) obj[key] = value;
  return obj;
}

Corpus::Corpus(std::vector<ConversationRecord> records, std::string source_path)
    : records_(std::move(records)), source_path_(std::move(source_path)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    validate_record(records_[i]);
    if (!index_.emplace(records_[i].id, i).second) {
      throw Error(ErrorCode::duplicate_id, "duplicate id '" + records_[i].id + "'");
    }
  }
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const ConversationRecord& Corpus::at(std::string_view id) const {
  const auto index = index_of(id);
  if (!index) throw Error(ErrorCode::unknown_record, "no record with id '" + std::string(id) + "'");
  return records_[*index];
}

std::string Corpus::content_hash() const { return sha256_hex(serialize_corpus(*this)); }

Corpus parse_corpus(std::string_view jsonl_text, std::string source_path) {
  std::vector<ConversationRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < jsonl_text.size()) {
    auto end = jsonl_text.find('\n', start);
    if (end == std::string_view::npos) end = jsonl_text.size();
    const auto line = jsonl_text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;

    ConversationRecord record;
    try {
      record = record_from_json(ojson::parse(line));
    } catch (const ojson::exception& e) {
      throw Error(ErrorCode::malformed_line,
                  source_path + ":" + std::to_string(line_no) + ": invalid JSON (" + e.what() + ")");
    } catch (const Error& e) {
      throw Error(ErrorCode::malformed_line, source_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (const auto [it, inserted] = seen.emplace(record.id, line_no); !inserted) {
      throw Error(ErrorCode::duplicate_id, "duplicate id '" + record.id + "' at " + source_path + ":" +
                                               std::to_string(line_no) + " (first seen on line " +
                                               std::to_string(it->second) + ")");
    }
    records.push_back(std::move(record));
  }
  return Corpus(std::move(records), std::move(source_path));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat /*format*/) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_failure, "cannot open corpus file " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw Error(ErrorCode::io_failure, "failed reading corpus file " + path.string());
  }
  return parse_corpus(buffer.str(), path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& record : corpus) {
    out += record_to_json(record).dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  out << serialize_corpus(corpus);
  if (!out) throw Error(ErrorCode::io_failure, "failed writing " + path.string());
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  if (count_occurrences(text_, kQueryPlaceholder) != 1 || count_occurrences(text_, kReferencePlaceholder) != 1) {
    throw Error(ErrorCode::config_invalid,
                "prompt template must contain {query} and {reference} exactly once each");
  }
}

std::string PromptTemplate::render(std::string_view query, std::string_view reference) const {
  // Single left-to-right pass: "{reference}" inside a query stays literal.
  std::string out;
  out.reserve(text_.size() + query.size() + reference.size());
  std::string_view rest = text_;
  while (!rest.empty()) {
    const auto q = rest.find(kQueryPlaceholder);
    const auto r = rest.find(kReferencePlaceholder);
    const auto next = std::min(q, r);
    if (next == std::string_view::npos) {
      out.append(rest);
      break;
    }
    out.append(rest.substr(0, next));
    if (next == q) {
      out.append(query);
      rest.remove_prefix(next + kQueryPlaceholder.size());
    } else {
      out.append(reference);
      rest.remove_prefix(next + kReferencePlaceholder.size());
    }
  }
  return out;
}

std::string PromptTemplate::hash() const { return sha256_hex(text_); }

std::string render_prompt(const ConversationRecord& record, const PromptTemplate& tmpl) {
  return tmpl.render(record.query, record.reference);
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double fraction, std::uint64_t rng_seed) {
  if (corpus.empty()) throw Error(ErrorCode::empty_input, "cannot split an empty corpus");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::config_invalid, "split fraction must lie in (0, 1)");
  }
  const auto n = corpus.size();
  const auto first_size = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  auto order = seeded_permutation(n, rng_seed);
  std::vector<bool> in_first(n, false);
  for (std::size_t i = 0; i < first_size; ++i) in_first[order[i]] = true;

  std::vector<ConversationRecord> first, second;
  first.reserve(first_size);
  second.reserve(n - first_size);
  for (std::size_t i = 0; i < n; ++i) {
    (in_first[i] ? first : second).push_back(corpus[i]);
  }
  return {Corpus(std::move(first), corpus.source_path()), Corpus(std::move(second), corpus.source_path())};
}

}  // namespace al4rag
