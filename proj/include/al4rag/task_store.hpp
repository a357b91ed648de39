#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "al4rag/corpus.hpp"

namespace al4rag {

using Clock = std::function<std::chrono::system_clock::time_point()>;

enum class TaskStatus { pending, leased, labeled };

std::string_view to_string(TaskStatus status);

struct AnnotationTask {
  std::string record_id;
  std::string query;
  std::string reference;
  std::string response;
  std::optional<TaskKind> task_kind;
  TaskStatus status = TaskStatus::pending;
  std::optional<std::int64_t> lease_expiry_ms;  // unix epoch milliseconds
  std::optional<std::string> leased_by;
};

struct LabelEvent {
  std::string record_id;
  int h = 0;
  std::string annotator_id;
  std::int64_t timestamp_ms = 0;
  std::uint64_t revision = 0;
  bool operator==(const LabelEvent&) const = default;
};

struct Progress {
  std::size_t pending = 0;
  std::size_t leased = 0;
  std::size_t labeled = 0;
  bool operator==(const Progress&) const = default;
};

struct TaskStoreOptions {
  bool allow_relabel = true;
  // Rewrite the live log once this many events were appended since the last
  // compaction; 0 disables automatic compaction.
  std::size_t compact_every = 10000;
  bool fsync = true;
  Clock clock = [] { return std::chrono::system_clock::now(); };
};

inline constexpr std::int64_t kDefaultLeaseSeconds = 600;

/// Annotation tasks and hallucination verdicts backed by an append-only
/// JSONL event log (`events.jsonl` in the store directory). Every mutation
/// is written and fsynced before it is applied in memory or acknowledged.
/// A torn final line left by a crash is discarded on open.
///
/// All methods are safe to call concurrently; mutations are serialized.
class TaskStore {
 public:
  static constexpr std::string_view kLogName = "events.jsonl";

  // Creates the directory if needed and replays the log. Throws io_failure
  // if the directory cannot be created or the log cannot be opened for
  // appending, malformed_line if a complete log line is corrupt.
  explicit TaskStore(std::filesystem::path directory, TaskStoreOptions options = {});
  ~TaskStore();

  TaskStore(const TaskStore&) = delete;
  TaskStore& operator=(const TaskStore&) = delete;

  // One pending task per id not yet in the store. Throws unknown_record
  // before writing anything if an id is missing from the corpus.
  std::size_t import_tasks(const std::vector<std::string>& ids, const Corpus& corpus);
  std::size_t import_tasks(const std::filesystem::path& selection_output, const Corpus& corpus);

  // Leases the oldest pending task (expired leases count as pending).
  std::optional<AnnotationTask> lease_next(const std::string& annotator_id,
                                           std::int64_t lease_seconds = kDefaultLeaseSeconds);

  // Throws invalid_label, unknown_task, not_leased. Returns the revision of
  // the appended label event.
  std::uint64_t submit_label(const std::string& record_id, int h, const std::string& annotator_id);

  // Ends a lease immediately; the task returns to pending. Throws
  // unknown_task. Returns false if the task held no lease.
  bool expire_lease(const std::string& record_id);

  // Latest label per labeled record, ordered by record id.
  std::vector<LabelEvent> export_labels() const;
  // Every label event ever applied since the last compaction, in revision order.
  std::vector<LabelEvent> label_history() const;

  Progress progress() const;
  std::optional<AnnotationTask> task(const std::string& record_id) const;
  std::size_t task_count() const;
  std::uint64_t revision() const;

  // Archives the live log next to it and replaces it with a minimal
  // equivalent: tasks, live leases, latest label per record.
  void compact();

  const std::filesystem::path& directory() const noexcept { return directory_; }
  std::filesystem::path log_path() const { return directory_ / kLogName; }

 private:
  struct TaskState {
    AnnotationTask task;
    std::uint64_t import_revision = 0;
    std::uint64_t lease_revision = 0;
    std::optional<LabelEvent> label;
  };

  void replay();
  void apply(const std::string& line, bool from_replay);
  void append(const std::string& line);
  void open_for_append();
  void maybe_compact();
  void compact_locked();
  std::int64_t now_ms() const;
  bool lease_live(const TaskState& state, std::int64_t now) const;
  AnnotationTask view(const TaskState& state, std::int64_t now) const;

  std::filesystem::path directory_;
  TaskStoreOptions options_;
  mutable std::mutex mutex_;
  int fd_ = -1;
  std::uint64_t revision_ = 0;
  std::size_t appended_since_compaction_ = 0;
  std::map<std::string, TaskState> tasks_;
  std::vector<std::string> import_order_;
  std::vector<LabelEvent> history_;
};

}  // namespace al4rag
