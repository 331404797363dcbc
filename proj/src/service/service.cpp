#include "csi/service/service.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include <httplib.h>

#include "csi/numerics/errors.hpp"

namespace csi {

using nlohmann::json;

int ApiError::http_status() const noexcept {
  switch (code_) {
    case Code::InvalidRequest: return 400;
    case Code::NotFound: return 404;
    case Code::NoBackwardResult: return 409;
    case Code::ModelError: return 500;
  }
  return 500;
}

std::string ApiError::code_name() const {
  switch (code_) {
    case Code::InvalidRequest: return "INVALID_REQUEST";
    case Code::NotFound: return "NOT_FOUND";
    case Code::NoBackwardResult: return "NO_BACKWARD_RESULT";
    case Code::ModelError: return "MODEL_ERROR";
  }
  return "MODEL_ERROR";
}

json ApiError::body() const { return {{"code", code_name()}, {"message", what()}}; }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

ApiError invalid(const std::string& message) { return ApiError(ApiError::Code::InvalidRequest, message); }
ApiError not_found(const std::string& message) { return ApiError(ApiError::Code::NotFound, message); }

std::vector<std::string_view> split_path(std::string_view path) {
  if (const auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto slash = path.find('/');
    if (slash != 0) parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

std::size_t parse_index(std::string_view text) {
  std::size_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) throw invalid("bad index: " + std::string(text));
  return value;
}

json parse_body(std::string_view body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw invalid("request body is not valid JSON");
  if (!j.is_object()) throw invalid("request body must be a JSON object");
  return j;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw invalid(std::string("missing field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw invalid(std::string("field has the wrong type: ") + key);
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

double threshold_of(const json& j) {
  const double t = field_or(j, "threshold", 0.5);
  if (!(t >= 0.0 && t <= 1.0)) throw invalid("threshold must lie in [0, 1]");
  return t;
}

ForwardRequest forward_request(const json& j) {
  const std::string mode = field<std::string>(j, "mode");
  ForwardRequest r;
  if (mode == "init_with") {
    r.mode = GenerationMode::InitWith;
  } else if (mode == "add_sentence") {
    r.mode = GenerationMode::AddSentence;
  } else if (mode == "complete") {
    r.mode = GenerationMode::Complete;
  } else {
    throw invalid("mode must be init_with, add_sentence or complete");
  }
  r.n_sentences = field_or<std::size_t>(j, "n_sentences", 3);
  r.beam_width = field_or<std::size_t>(j, "beam_width", 1);
  r.seed = field_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("prefix")) {
    if (r.mode != GenerationMode::Complete) throw invalid("prefix is only accepted with mode complete");
    r.prefix = tokenize(field<std::string>(j, "prefix"));
    while (!r.prefix.empty() && r.prefix.back() == "...") r.prefix.pop_back();
  }
  if (r.mode == GenerationMode::Complete && r.prefix.empty()) throw invalid("complete needs a non-empty prefix");
  return r;
}

}  // namespace

Service::Service(Engines engines, std::string model_version, ServiceOptions options)
    : engines_(std::move(engines)), model_version_(std::move(model_version)), options_(std::move(options)) {
  if (!engines_.forward || !engines_.backward) throw ContractViolation("service needs forward and backward models");
  if (options_.persist_dir) std::filesystem::create_directories(*options_.persist_dir);
}

Service Service::from_model_dir(const std::filesystem::path& dir, ServiceOptions options) {
  Engines engines;
  engines.forward = std::make_shared<const ForwardModel>(ForwardModel::load(dir / "forward.ckpt"));
  engines.backward = std::make_shared<const BackwardModel>(BackwardModel::load(dir / "backward.ckpt"));
  const std::string version = fnv1a_hex(engines.forward->serialize() + engines.backward->serialize());
  return Service(std::move(engines), version, std::move(options));
}

std::size_t Service::session_count() const {
  std::lock_guard lock(registry_mutex_);
  return sessions_.size();
}

Response Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  int status = 200;
  json out;
  try {
    try {
      out = route(method, path, body, status);
    } catch (const ApiError&) {
      throw;
    } catch (const NoBackwardResult& e) {
      throw ApiError(ApiError::Code::NoBackwardResult, e.what());
    } catch (const ContractViolation& e) {
      throw invalid(e.what());
    } catch (const std::exception& e) {
      throw ApiError(ApiError::Code::ModelError, e.what());
    }
  } catch (const ApiError& e) {
    return {e.http_status(), e.body().dump()};
  }
  return {status, out.dump()};
}

json Service::route(std::string_view method, std::string_view path, std::string_view body, int& status) {
  const auto parts = split_path(path);
  const bool get = method == "GET";
  const bool post = method == "POST";

  if (parts.size() == 1 && parts[0] == "healthz" && get) return {{"status", "ok"}, {"model_version", model_version_}};
  if (parts.size() == 1 && parts[0] == "attribute" && post) return attribute(parse_body(body));
  if (parts.size() == 1 && parts[0] == "sessions" && post) {
    status = 201;
    return create_session(parse_body(body));
  }
  if (parts.size() < 2 || parts[0] != "sessions") {
    throw not_found("no route for " + std::string(method) + " " + std::string(path));
  }

  const std::shared_ptr<Entry> entry = find(std::string(parts[1]));
  const auto action = parts.size() > 2 ? parts[2] : std::string_view{};
  const bool known = (parts.size() == 2 && get) ||
                     (parts.size() == 3 && post && (action == "selection" || action == "generate" || action == "aggregation")) ||
                     (parts.size() == 4 && post && action == "summary");
  if (!known) throw not_found("no route for " + std::string(method) + " " + std::string(path));

  std::lock_guard lock(entry->mutex);
  Session& s = *entry->session;
  if (parts.size() == 2) return s.to_json();

  const json request = parse_body(body);
  if (action == "selection") {
    const int given = static_cast<int>(request.contains("sentences")) + static_cast<int>(request.contains("template")) +
                      static_cast<int>(request.contains("words"));
    if (given != 1) throw invalid("selection needs exactly one of sentences, template or words");
    if (request.contains("template")) {
      s.select_template(parse_template(field<std::string>(request, "template")));
    } else if (request.contains("sentences")) {
      s.set_selection(field<std::set<std::size_t>>(request, "sentences"));
    } else {
      s.set_word_selection(field<std::set<std::size_t>>(request, "words"));
    }
  } else if (action == "aggregation") {
    s.set_aggregation(field<bool>(request, "enabled"));
  } else if (action == "generate") {
    s.run_forward(forward_request(request));
  } else {
    const std::size_t index = parse_index(parts[3]);
    const std::string kind = field<std::string>(request, "action");
    if (kind == "edit") {
      s.edit_sentence(index, field<std::string>(request, "text"));
    } else if (kind == "delete") {
      s.delete_sentence(index);
    } else {
      throw invalid("action must be edit or delete");
    }
  }
  persist(s);
  return s.to_json();
}

json Service::create_session(const json& request) {
  Document doc = make_document(field<std::string>(request, "document"));
  if (doc.tokens.empty()) throw invalid("document is empty");
  const double threshold = threshold_of(request);

  auto entry = std::make_shared<Entry>();
  {
    std::lock_guard lock(registry_mutex_);
    const std::string id = "s" + std::to_string(next_id_++);
    entry->session = std::make_unique<Session>(id, std::move(doc), engines_, threshold);
    sessions_.emplace(id, entry);
  }
  std::lock_guard lock(entry->mutex);
  persist(*entry->session);
  return entry->session->to_json();
}

json Service::attribute(const json& request) const {
  const Document doc = make_document(field<std::string>(request, "document"));
  if (doc.tokens.empty()) throw invalid("document is empty");
  const std::vector<std::string> summary = tokenize(field<std::string>(request, "summary"));
  return coverage_to_json(engines_.backward->attribute(doc, summary, threshold_of(request)));
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  std::lock_guard lock(registry_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("unknown session: " + id);
  return it->second;
}

void Service::persist(const Session& session) const {
  if (!options_.persist_dir) return;
  const auto path = *options_.persist_dir / (session.id() + ".json");
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << session.to_json().dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

struct HttpFrontend::Impl {
  httplib::Server server;
};

HttpFrontend::HttpFrontend(Service& service) : impl_(std::make_unique<Impl>()) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    Response r;
    const std::string type = req.get_header_value("Content-Type");
    if (!req.body.empty() && type.rfind("application/json", 0) != 0) {
      r = {400, invalid("Content-Type must be application/json").body().dump()};
    } else {
      r = service.handle(req.method, req.path, req.body);
    }
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  auto& server = impl_->server;
  server.Get(".*", forward);
  server.Post(".*", forward);
  server.Put(".*", forward);
  server.Delete(".*", forward);
  server.Patch(".*", forward);
}

HttpFrontend::~HttpFrontend() = default;

int HttpFrontend::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpFrontend::listen() { impl_->server.listen_after_bind(); }

void HttpFrontend::stop() { impl_->server.stop(); }

}  // namespace csi
