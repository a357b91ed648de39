#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace al4rag {

enum class TaskKind { qa, summary, data2text, other };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view text);

/// One RAG interaction: the user query, the retrieved reference text (chunks
/// pre-joined with "\n\n"), the model response, and an optional
/// hallucination label (1 = response contains hallucination).
struct ConversationRecord {
  std::string id;
  std::string query;
  std::string reference;
  std::string response;
  std::optional<int> hallucination;
  std::optional<TaskKind> task_kind;
  // Uninterpreted keys, in file order.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const ConversationRecord&) const = default;
};

// Throws Error(malformed_line) describing the first violated invariant.
void validate_record(const ConversationRecord& record);

ConversationRecord record_from_json(const nlohmann::ordered_json& obj);
nlohmann::ordered_json record_to_json(const ConversationRecord& record);

/// Immutable ordered collection of records. Iteration order equals file
/// order.
class Corpus {
 public:
  Corpus() = default;
  // Throws duplicate_id / malformed_line on invariant violations.
  Corpus(std::vector<ConversationRecord> records, std::string source_path);

  const std::vector<ConversationRecord>& records() const noexcept { return records_; }
  const std::string& source_path() const noexcept { return source_path_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  const ConversationRecord& operator[](std::size_t index) const { return records_[index]; }
  std::optional<std::size_t> index_of(std::string_view id) const;
  const ConversationRecord& at(std::string_view id) const;

  // SHA-256 over the canonical JSONL serialization; independent of the
  // key order or whitespace of the source file.
  std::string content_hash() const;

  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

 private:
  std::vector<ConversationRecord> records_;
  std::string source_path_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class CorpusFormat { jsonl };

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::jsonl);
Corpus parse_corpus(std::string_view jsonl_text, std::string source_path = "<memory>");
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Text with exactly one {query} and one {reference} placeholder.
class PromptTemplate {
 public:
  static constexpr std::string_view kDefaultText =
      "Answer the question based on the following reference.\nReference: {reference}\nQuestion: {query}\nAnswer:";

  PromptTemplate() : PromptTemplate(std::string(kDefaultText)) {}
  // Throws Error(config_invalid) unless each placeholder occurs exactly once.
  explicit PromptTemplate(std::string text);

  const std::string& text() const noexcept { return text_; }
  std::string render(std::string_view query, std::string_view reference) const;
  std::string hash() const;

 private:
  std::string text_;
};

std::string render_prompt(const ConversationRecord& record, const PromptTemplate& tmpl);

// Seeded partition; the first part has round(fraction * N) records, both
// parts keep corpus order. Throws empty_input / config_invalid.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double fraction, std::uint64_t rng_seed);

std::string trim(std::string_view text);

}  // namespace al4rag
