#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "al4rag/task_store.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace al4rag {

nlohmann::json task_to_json(const AnnotationTask& task);
nlohmann::json progress_to_json(const Progress& progress);
nlohmann::json labels_to_json(const std::vector<LabelEvent>& labels);

/// HTTP front end over a TaskStore.
///
///   GET  /api/tasks/next?annotator=ID&lease=SECONDS   200 task | 204
///   POST /api/labels {record_id, h, annotator}        200 {revision} | 404 | 409 | 422
///   GET  /api/progress                                {pending, leased, labeled}
///   GET  /api/export                                  [{record_id, h, revision, annotator}]
///   GET  /api/tasks/{id}                              200 task | 404
///   POST /api/tasks/{id}/expire                       200 {expired} | 404
///
/// Static UI assets are served from `static_dir` at "/" when given.
class AnnotationServer {
 public:
  AnnotationServer(TaskStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Throws Error(io_failure) if the port cannot be bound. Port 0 picks a
  // free port; the chosen one is returned.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  TaskStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace al4rag
