#include "al4rag/task_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "al4rag/error.hpp"
#include "al4rag/selection.hpp"
#include "json.hpp"

namespace al4rag {

namespace {

using nlohmann::ordered_json;

Error io_error(const std::string& what) { return Error(ErrorCode::io_failure, what + ": " + std::strerror(errno)); }

void write_all(int fd, std::string_view bytes, const std::string& path) {
  while (!bytes.empty()) {
    const auto n = ::write(fd, bytes.data(), bytes.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw io_error("write to " + path);
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

void fsync_directory(const std::filesystem::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

std::string_view to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::leased: return "leased";
    case TaskStatus::labeled: return "labeled";
  }
  return "pending";
}

TaskStore::TaskStore(std::filesystem::path directory, TaskStoreOptions options)
    : directory_(std::move(directory)), options_(std::move(options)) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec || !std::filesystem::is_directory(directory_)) {
    throw Error(ErrorCode::io_failure, "cannot create store directory " + directory_.string() +
                                           (ec ? ": " + ec.message() : std::string(": not a directory")));
  }
  std::filesystem::remove(directory_ / (std::string(kLogName) + ".tmp"), ec);
  replay();
  open_for_append();
}

TaskStore::~TaskStore() {
  if (fd_ >= 0) ::close(fd_);
}

void TaskStore::open_for_append() {
  if (fd_ >= 0) ::close(fd_);
  const auto path = log_path();
  fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw io_error("cannot open event log " + path.string());
}

std::int64_t TaskStore::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(options_.clock().time_since_epoch()).count();
}

bool TaskStore::lease_live(const TaskState& state, std::int64_t now) const {
  return state.task.status == TaskStatus::leased && state.task.lease_expiry_ms && *state.task.lease_expiry_ms > now;
}

AnnotationTask TaskStore::view(const TaskState& state, std::int64_t now) const {
  AnnotationTask task = state.task;
  if (task.status == TaskStatus::leased && !lease_live(state, now)) {
    task.status = TaskStatus::pending;
    task.lease_expiry_ms.reset();
    task.leased_by.reset();
  }
  return task;
}

void TaskStore::replay() {
  const auto path = log_path();
  std::ifstream in(path, std::ios::binary);
  if (!in) return;  // fresh store
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();
  in.close();

  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    if (end == std::string::npos) break;  // torn tail
    ++line_no;
    const auto line = content.substr(start, end - start);
    try {
      if (!trim(line).empty()) apply(line, true);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::malformed_line,
                  path.string() + ":" + std::to_string(line_no) + ": corrupt event (" + e.what() + ")");
    }
    start = end + 1;
  }
  if (start < content.size()) {
    // Torn final line from an interrupted append; it was never acknowledged.
    std::filesystem::resize_file(path, start);
  }
}

void TaskStore::apply(const std::string& line, bool from_replay) {
  const auto event = nlohmann::json::parse(line);
  const auto rev = event.at("rev").get<std::uint64_t>();
  if (rev <= revision_) {
    throw Error(ErrorCode::malformed_line, "event revision " + std::to_string(rev) + " does not increase past " +
                                               std::to_string(revision_));
  }
  revision_ = rev;
  if (from_replay) ++appended_since_compaction_;

  const auto type = event.at("type").get<std::string>();
  if (type == "checkpoint") return;

  const auto record_id = event.at("record_id").get<std::string>();
  if (type == "task") {
    if (tasks_.count(record_id)) return;
    TaskState state;
    state.task.record_id = record_id;
    state.task.query = event.at("query").get<std::string>();
    state.task.reference = event.at("reference").get<std::string>();
    state.task.response = event.at("response").get<std::string>();
    if (event.contains("task_kind")) state.task.task_kind = parse_task_kind(event["task_kind"].get<std::string>());
    state.import_revision = rev;
    tasks_.emplace(record_id, std::move(state));
    import_order_.push_back(record_id);
    return;
  }

  const auto it = tasks_.find(record_id);
  if (it == tasks_.end()) {
    throw Error(ErrorCode::malformed_line, "event for unknown task '" + record_id + "'");
  }
  auto& state = it->second;
  if (type == "lease") {
    state.task.status = TaskStatus::leased;
    state.task.leased_by = event.at("annotator").get<std::string>();
    state.task.lease_expiry_ms = event.at("expiry_ms").get<std::int64_t>();
    state.lease_revision = rev;
  } else if (type == "expire") {
    if (state.task.status == TaskStatus::leased) state.task.status = TaskStatus::pending;
    state.task.leased_by.reset();
    state.task.lease_expiry_ms.reset();
    state.lease_revision = 0;
  } else if (type == "label") {
    LabelEvent label;
    label.record_id = record_id;
    label.h = event.at("h").get<int>();
    label.annotator_id = event.at("annotator").get<std::string>();
    label.timestamp_ms = event.at("ts_ms").get<std::int64_t>();
    label.revision = rev;
    state.task.status = TaskStatus::labeled;
    state.task.leased_by.reset();
    state.task.lease_expiry_ms.reset();
    state.lease_revision = 0;
    state.label = label;
    history_.push_back(std::move(label));
  } else {
    throw Error(ErrorCode::malformed_line, "unknown event type '" + type + "'");
  }
}

void TaskStore::append(const std::string& line) {
  write_all(fd_, line + "\n", log_path().string());
  if (options_.fsync && ::fsync(fd_) != 0) throw io_error("fsync of " + log_path().string());
  apply(line, false);
  ++appended_since_compaction_;
}

void TaskStore::maybe_compact() {
  if (options_.compact_every != 0 && appended_since_compaction_ >= options_.compact_every) compact_locked();
}

std::size_t TaskStore::import_tasks(const std::vector<std::string>& ids, const Corpus& corpus) {
  for (const auto& id : ids) {
    if (!corpus.index_of(id)) throw Error(ErrorCode::unknown_record, "selected id '" + id + "' is not in the corpus");
  }
  std::lock_guard lock(mutex_);
  std::size_t added = 0;
  for (const auto& id : ids) {
    if (tasks_.count(id)) continue;
    const auto& record = corpus.at(id);
    ordered_json event;
    event["rev"] = revision_ + 1;
    event["type"] = "task";
    event["record_id"] = id;
    event["query"] = record.query;
    event["reference"] = record.reference;
    event["response"] = record.response;
    if (record.task_kind) event["task_kind"] = std::string(to_string(*record.task_kind));
    append(event.dump());
    ++added;
  }
  maybe_compact();
  return added;
}

std::size_t TaskStore::import_tasks(const std::filesystem::path& selection_output, const Corpus& corpus) {
  return import_tasks(read_selection_ids(selection_output), corpus);
}

std::optional<AnnotationTask> TaskStore::lease_next(const std::string& annotator_id, std::int64_t lease_seconds) {
  if (annotator_id.empty()) throw Error(ErrorCode::config_invalid, "annotator id must be non-empty");
  if (lease_seconds <= 0) throw Error(ErrorCode::config_invalid, "lease duration must be positive");
  std::lock_guard lock(mutex_);
  const auto now = now_ms();
  for (const auto& id : import_order_) {
    auto& state = tasks_.at(id);
    if (state.task.status == TaskStatus::labeled || lease_live(state, now)) continue;
    ordered_json event;
    event["rev"] = revision_ + 1;
    event["type"] = "lease";
    event["record_id"] = id;
    event["annotator"] = annotator_id;
    event["expiry_ms"] = now + lease_seconds * 1000;
    append(event.dump());
    auto task = view(state, now);
    maybe_compact();
    return task;
  }
  return std::nullopt;
}

std::uint64_t TaskStore::submit_label(const std::string& record_id, int h, const std::string& annotator_id) {
  if (h != 0 && h != 1) throw Error(ErrorCode::invalid_label, "label must be 0 or 1, got " + std::to_string(h));
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(record_id);
  if (it == tasks_.end()) throw Error(ErrorCode::unknown_task, "no task for record '" + record_id + "'");
  const auto& state = it->second;
  const auto now = now_ms();
  const bool holds_lease = lease_live(state, now) && state.task.leased_by == annotator_id;
  const bool relabel = state.task.status == TaskStatus::labeled && options_.allow_relabel;
  if (!holds_lease && !relabel) {
    throw Error(ErrorCode::not_leased, "annotator '" + annotator_id + "' holds no live lease on '" + record_id + "'");
  }
  ordered_json event;
  event["rev"] = revision_ + 1;
  event["type"] = "label";
  event["record_id"] = record_id;
  event["h"] = h;
  event["annotator"] = annotator_id;
  event["ts_ms"] = now;
  append(event.dump());
  const auto rev = revision_;
  maybe_compact();
  return rev;
}

bool TaskStore::expire_lease(const std::string& record_id) {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(record_id);
  if (it == tasks_.end()) throw Error(ErrorCode::unknown_task, "no task for record '" + record_id + "'");
  if (it->second.task.status != TaskStatus::leased) return false;
  ordered_json event;
  event["rev"] = revision_ + 1;
  event["type"] = "expire";
  event["record_id"] = record_id;
  append(event.dump());
  maybe_compact();
  return true;
}

std::vector<LabelEvent> TaskStore::export_labels() const {
  std::lock_guard lock(mutex_);
  std::vector<LabelEvent> labels;
  for (const auto& [id, state] : tasks_) {  // std::map: ordered by record id
    if (state.label) labels.push_back(*state.label);
  }
  return labels;
}

std::vector<LabelEvent> TaskStore::label_history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

Progress TaskStore::progress() const {
  std::lock_guard lock(mutex_);
  const auto now = now_ms();
  Progress p;
  for (const auto& [id, state] : tasks_) {
    switch (view(state, now).status) {
      case TaskStatus::pending: ++p.pending; break;
      case TaskStatus::leased: ++p.leased; break;
      case TaskStatus::labeled: ++p.labeled; break;
    }
  }
  return p;
}

std::optional<AnnotationTask> TaskStore::task(const std::string& record_id) const {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(record_id);
  if (it == tasks_.end()) return std::nullopt;
  return view(it->second, now_ms());
}

std::size_t TaskStore::task_count() const {
  std::lock_guard lock(mutex_);
  return tasks_.size();
}

std::uint64_t TaskStore::revision() const {
  std::lock_guard lock(mutex_);
  return revision_;
}

void TaskStore::compact() {
  std::lock_guard lock(mutex_);
  compact_locked();
}

void TaskStore::compact_locked() {
  std::vector<std::pair<std::uint64_t, std::string>> events;
  const auto now = now_ms();
  for (const auto& id : import_order_) {
    const auto& state = tasks_.at(id);
    ordered_json task;
    task["rev"] = state.import_revision;
    task["type"] = "task";
    task["record_id"] = id;
    task["query"] = state.task.query;
    task["reference"] = state.task.reference;
    task["response"] = state.task.response;
    if (state.task.task_kind) task["task_kind"] = std::string(to_string(*state.task.task_kind));
    events.emplace_back(state.import_revision, task.dump());
    if (lease_live(state, now)) {
      ordered_json lease;
      lease["rev"] = state.lease_revision;
      lease["type"] = "lease";
      lease["record_id"] = id;
      lease["annotator"] = *state.task.leased_by;
      lease["expiry_ms"] = *state.task.lease_expiry_ms;
      events.emplace_back(state.lease_revision, lease.dump());
    }
    if (state.label) {
      ordered_json label;
      label["rev"] = state.label->revision;
      label["type"] = "label";
      label["record_id"] = id;
      label["h"] = state.label->h;
      label["annotator"] = state.label->annotator_id;
      label["ts_ms"] = state.label->timestamp_ms;
      events.emplace_back(state.label->revision, label.dump());
    }
  }
  std::sort(events.begin(), events.end());
  std::string content;
  for (const auto& [rev, line] : events) content += line + "\n";
  if (events.empty() || events.back().first < revision_) {
    ordered_json checkpoint;
    checkpoint["rev"] = revision_;
    checkpoint["type"] = "checkpoint";
    content += checkpoint.dump() + "\n";
  }

  const auto live = log_path();
  const auto tmp = directory_ / (std::string(kLogName) + ".tmp");
  const auto archive = directory_ / ("events.r" + std::to_string(revision_) + ".jsonl");
  {
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw io_error("cannot create " + tmp.string());
    try {
      write_all(fd, content, tmp.string());
    } catch (...) {
      ::close(fd);
      throw;
    }
    if (::fsync(fd) != 0) {
      ::close(fd);
      throw io_error("fsync of " + tmp.string());
    }
    ::close(fd);
  }
  if (!std::filesystem::exists(archive) && ::link(live.c_str(), archive.c_str()) != 0) {
    throw io_error("cannot archive " + live.string());
  }
  if (::rename(tmp.c_str(), live.c_str()) != 0) throw io_error("cannot replace " + live.string());
  fsync_directory(directory_);
  open_for_append();
  appended_since_compaction_ = 0;

  // Label history before the compaction now lives only in the archive.
  history_.clear();
  for (const auto& [id, state] : tasks_) {
    if (state.label) history_.push_back(*state.label);
  }
  std::sort(history_.begin(), history_.end(),
            [](const LabelEvent& a, const LabelEvent& b) { return a.revision < b.revision; });
}

}  // namespace al4rag
