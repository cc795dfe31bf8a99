#pragma once

// HTTP front end over the handlers in api.hpp.

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "healthcam/api.hpp"

namespace healthcam {

struct ServerOptions {
  std::string cors_origin = "*";
  std::ostream* log = &std::cerr;  // null disables request logging
};

class InferenceService {
 public:
  InferenceService(RuleTable rules, ServerOptions options = {})
      : rules_(std::move(rules)), options_(std::move(options)) {}

  /// Loads a checkpoint and swaps it in atomically; the previous snapshot
  /// stays alive for requests that still hold it. Throws on a bad file and
  /// keeps serving the old snapshot.
  std::string load(const std::filesystem::path& path) {
    auto snap = load_snapshot(path);
    std::string hash = snap->checkpoint.hash;
    holder_.set(std::move(snap));
    std::lock_guard lock(path_mutex_);
    checkpoint_path_ = path;
    return hash;
  }

  /// Re-reads the last loaded checkpoint path.
  std::string reload() {
    std::filesystem::path path;
    {
      std::lock_guard lock(path_mutex_);
      path = checkpoint_path_;
    }
    if (path.empty()) throw CheckpointError("no checkpoint path to reload");
    return load(path);
  }

  void set_checkpoint_path(const std::filesystem::path& path) {
    std::lock_guard lock(path_mutex_);
    checkpoint_path_ = path;
  }

  std::shared_ptr<const ServiceSnapshot> snapshot() const { return holder_.get(); }
  const RuleTable& rules() const noexcept { return rules_; }

  void mount(httplib::Server& server) {
    server.set_payload_max_length(kMaxUploadBytes + kMultipartSlack);

    server.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
      request_start() = std::chrono::steady_clock::now();
      return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) { add_cors(res); });
    server.set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      ApiError e = status_error(res.status);
      // An empty multipart body fails to parse in the transport; it still carries no image.
      if (res.status == 400 && req.method == "POST" && !req.has_file("image") &&
          (req.path == "/api/predict" || req.path == "/api/recommend")) {
        e = ApiError(400, "missing_image", "multipart field 'image' is required");
      }
      res.set_content(e.body().dump(), "application/json");
      add_cors(res);
      return httplib::Server::HandlerResponse::Handled;
    });
    server.set_logger([this](const httplib::Request& req, const httplib::Response& res) { log_request(req, res); });

    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      write(res, handle_health(snapshot()));
    });
    server.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) {
      write(res, handle_model(snapshot(), rules_));
    });
    server.Post("/api/predict", [this](const httplib::Request& req, httplib::Response& res) {
      auto image = field(req, "image");
      write(res, handle_predict(snapshot(), as_bytes(image), rules_.breakpoints));
    });
    server.Post("/api/recommend", [this](const httplib::Request& req, httplib::Response& res) {
      auto image = field(req, "image");
      auto symptoms = field(req, "symptoms");
      std::optional<std::string_view> sv;
      if (symptoms) sv = *symptoms;
      write(res, handle_recommend(snapshot(), as_bytes(image), sv, rules_));
    });
  }

 private:
  static constexpr std::size_t kMultipartSlack = 1u << 20;

  static std::chrono::steady_clock::time_point& request_start() {
    thread_local std::chrono::steady_clock::time_point start;
    return start;
  }

  static std::optional<std::string> field(const httplib::Request& req, const char* name) {
    if (!req.has_file(name)) return std::nullopt;
    return req.get_file_value(name).content;
  }

  static std::optional<std::span<const std::uint8_t>> as_bytes(const std::optional<std::string>& s) {
    if (!s) return std::nullopt;
    return std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s->data()), s->size());
  }

  static ApiError status_error(int status) {
    switch (status) {
      case 404:
        return {404, "not_found", "no such endpoint"};
      case 405:
        return {405, "method_not_allowed", "method not allowed"};
      case 413:
        return {413, "payload_too_large", "request body exceeds the upload limit"};
      default:
        return {status, status < 500 ? "bad_request" : "internal_error", httplib::status_message(status)};
    }
  }

  static void write(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  void add_cors(httplib::Response& res) const {
    if (options_.cors_origin.empty()) return;
    res.set_header("Access-Control-Allow-Origin", options_.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  }

  void log_request(const httplib::Request& req, const httplib::Response& res) {
    if (!options_.log) return;
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - request_start()).count();
    const nlohmann::json line = {{"ts", static_cast<long long>(std::time(nullptr))},
                                 {"method", req.method},
                                 {"path", req.path},
                                 {"status", res.status},
                                 {"latency_ms", ms}};
    std::lock_guard lock(log_mutex_);
    *options_.log << line.dump() << '\n' << std::flush;
  }

  RuleTable rules_;
  ServerOptions options_;
  SnapshotHolder holder_;
  std::mutex path_mutex_;
  std::filesystem::path checkpoint_path_;
  std::mutex log_mutex_;
};

}  // namespace healthcam
