#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "csi/session/session.hpp"

namespace csi {

// Error returned over the wire as {"code", "message"}.
class ApiError : public std::runtime_error {
 public:
  enum class Code { InvalidRequest, NotFound, NoBackwardResult, ModelError };

  ApiError(Code code, const std::string& message) : std::runtime_error(message), code_(code) {}

  Code code() const noexcept { return code_; }
  int http_status() const noexcept;
  std::string code_name() const;
  nlohmann::json body() const;

 private:
  Code code_;
};

struct Response {
  int status = 200;
  std::string body;
};

struct ServiceOptions {
  std::optional<std::filesystem::path> persist_dir;
};

// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

// Transport-independent request handler. Routes:
//   POST /sessions                      {document, threshold?}                  -> 201 session
//   GET  /sessions/{id}                                                         -> 200 session
//   POST /sessions/{id}/selection       {sentences} | {template} | {words}      -> 200 session
//   POST /sessions/{id}/aggregation     {enabled}                               -> 200 session
//   POST /sessions/{id}/generate        {mode, n_sentences?, prefix?, beam_width?, seed?} -> 200 session
//   POST /sessions/{id}/summary/{index} {action: "edit", text} | {action: "delete"}     -> 200 session
//   POST /attribute                     {document, summary, threshold?}         -> 200 coverage
//   GET  /healthz                                                               -> 200 {status, model_version}
// Requests on one session are serialized; distinct sessions run concurrently.
class Service {
 public:
  Service(Engines engines, std::string model_version, ServiceOptions options = {});

  // Loads forward.ckpt and backward.ckpt from `dir`.
  static Service from_model_dir(const std::filesystem::path& dir, ServiceOptions options = {});

  Response handle(std::string_view method, std::string_view path, std::string_view body);

  const std::string& model_version() const noexcept { return model_version_; }
  std::size_t session_count() const;

 private:
  struct Entry {
    std::mutex mutex;
    std::unique_ptr<Session> session;
  };

  nlohmann::json route(std::string_view method, std::string_view path, std::string_view body, int& status);
  nlohmann::json create_session(const nlohmann::json& request);
  nlohmann::json attribute(const nlohmann::json& request) const;
  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(const Session& session) const;

  Engines engines_;
  std::string model_version_;
  ServiceOptions options_;
  mutable std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

// HTTP transport for a Service. POST bodies must be application/json.
class HttpFrontend {
 public:
  explicit HttpFrontend(Service& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  // Binds `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Replays the scripted eleven-step review scenario against a fresh session
// on `document` and returns the full request/response log.
nlohmann::json golden_roundtrip(Service& service, const std::string& document);

}  // namespace csi
