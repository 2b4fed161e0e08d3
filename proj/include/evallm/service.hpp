// HTTP+JSON service over a Workspace.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "evallm/store.hpp"

namespace evallm {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  int parallelism = 1;
  std::string cors_origin = "*";
  /// Built review UI, served at "/" when set.
  std::optional<std::filesystem::path> static_dir;
};

struct ServiceResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

enum class JobState { idle, queued, running, done, failed };
std::string_view to_string(JobState state);

class Service {
 public:
  Service(Workspace& workspace, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Routes one request without any socket. `target` is path plus optional
  /// query string.
  ServiceResponse handle(const std::string& method, const std::string& target, const std::string& body = {});

  /// Binds to options.port (0 picks a free port) and returns the bound port,
  /// or -1 on failure.
  int bind();
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

  /// Blocks until no evaluation job is queued or running.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evallm
