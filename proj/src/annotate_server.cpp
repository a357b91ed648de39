#include "al4rag/annotate_server.hpp"

#include "al4rag/error.hpp"
#include "httplib.h"

namespace al4rag {

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", message}}.dump(), kJson);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_task: return 404;
    case ErrorCode::not_leased: return 409;
    case ErrorCode::invalid_label: return 422;
    case ErrorCode::config_invalid: return 400;
    default: return 500;
  }
}

}  // namespace

nlohmann::json task_to_json(const AnnotationTask& task) {
  nlohmann::json out;
  out["record_id"] = task.record_id;
  out["query"] = task.query;
  out["reference"] = task.reference;
  out["response"] = task.response;
  out["task_kind"] = task.task_kind ? nlohmann::json(std::string(to_string(*task.task_kind))) : nlohmann::json(nullptr);
  out["status"] = std::string(to_string(task.status));
  out["lease_expiry_ms"] = task.lease_expiry_ms ? nlohmann::json(*task.lease_expiry_ms) : nlohmann::json(nullptr);
  out["leased_by"] = task.leased_by ? nlohmann::json(*task.leased_by) : nlohmann::json(nullptr);
  return out;
}

nlohmann::json progress_to_json(const Progress& progress) {
  return {{"pending", progress.pending}, {"leased", progress.leased}, {"labeled", progress.labeled}};
}

nlohmann::json labels_to_json(const std::vector<LabelEvent>& labels) {
  auto out = nlohmann::json::array();
  for (const auto& label : labels) {
    out.push_back({{"record_id", label.record_id},
                   {"h", label.h},
                   {"revision", label.revision},
                   {"annotator", label.annotator_id}});
  }
  return out;
}

AnnotationServer::AnnotationServer(TaskStore& store, std::optional<std::filesystem::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  // SO_REUSEADDR only; no SO_REUSEPORT.
  server_->set_socket_options([](int sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  install_routes();
  if (static_dir && !server_->set_mount_point("/", static_dir->string())) {
    throw Error(ErrorCode::io_failure, "static asset directory " + static_dir->string() + " does not exist");
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::install_routes() {
  server_->Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
    const auto annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "missing annotator parameter");
    std::int64_t lease = kDefaultLeaseSeconds;
    if (req.has_param("lease")) {
      try {
        lease = std::stoll(req.get_param_value("lease"));
      } catch (const std::exception&) {
        return send_error(res, 400, "lease must be an integer number of seconds");
      }
    }
    try {
      const auto task = store_.lease_next(annotator, lease);
      if (!task) {
        res.status = 204;
        return;
      }
      res.set_content(task_to_json(*task).dump(), kJson);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.what());
    }
  });

  server_->Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      return send_error(res, 400, "request body must be JSON");
    }
    if (!body.is_object() || !body.contains("record_id") || !body["record_id"].is_string() ||
        !body.contains("annotator") || !body["annotator"].is_string()) {
      return send_error(res, 400, "expected {record_id, h, annotator}");
    }
    if (!body.contains("h") || !body["h"].is_number_integer()) {
      return send_error(res, 422, "h must be the integer 0 or 1");
    }
    try {
      const auto revision = store_.submit_label(body["record_id"].get<std::string>(), body["h"].get<int>(),
                                                body["annotator"].get<std::string>());
      res.set_content(nlohmann::json{{"revision", revision}}.dump(), kJson);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.what());
    }
  });

  server_->Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(progress_to_json(store_.progress()).dump(), kJson);
  });

  server_->Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(labels_to_json(store_.export_labels()).dump(), kJson);
  });

  server_->Get(R"(/api/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto task = store_.task(req.matches[1]);
    if (!task) return send_error(res, 404, "unknown task");
    res.set_content(task_to_json(*task).dump(), kJson);
  });

  server_->Post(R"(/api/tasks/([^/]+)/expire)", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const bool expired = store_.expire_lease(req.matches[1]);
      res.set_content(nlohmann::json{{"expired", expired}}.dump(), kJson);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.what());
    }
  });

  server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "internal error");
    }
  });
}

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int chosen = server_->bind_to_any_port(host);
    if (chosen < 0) throw Error(ErrorCode::io_failure, "cannot bind any port on " + host);
    return chosen;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::io_failure, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void AnnotationServer::listen() { server_->listen_after_bind(); }

void AnnotationServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void AnnotationServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace al4rag
