#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "anna_fixture.hpp"

using namespace csi;
using nlohmann::json;

namespace {

const Engines& engines() {
  static const Engines e = testing::anna_engines(testing::anna_corpus());
  return e;
}

std::string version_of(const Engines& e) { return testing::model_version(e); }

Service make_service(ServiceOptions options = {}) { return Service(engines(), version_of(engines()), options); }

using testing::anna_document;

json call(Service& s, const std::string& method, const std::string& path, const json& body, int expect) {
  const Response r = s.handle(method, path, body.is_null() ? "" : body.dump());
  INFO(method, " ", path, " -> ", r.body);
  CHECK(r.status == expect);
  return json::parse(r.body);
}

void check_error(const Response& r, int status, const std::string& code) {
  INFO(r.body);
  CHECK(r.status == status);
  const json j = json::parse(r.body);
  REQUIRE(j.is_object());
  CHECK(j.size() == 2);
  CHECK(j["code"] == code);
  CHECK(j["message"].is_string());
  CHECK_FALSE(j["message"].get<std::string>().empty());
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("healthz reports the model version") {
  Service s = make_service();
  const json j = call(s, "GET", "/healthz", nullptr, 200);
  CHECK(j["status"] == "ok");
  CHECK(j["model_version"] == version_of(engines()));
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("create, select all, init_with 3") {
  Service s = make_service();
  const json created = call(s, "POST", "/sessions", {{"document", anna_document()}}, 201);
  CHECK(created["id"] == "s1");
  CHECK(created["document"]["sentences"].size() == 6);
  const std::string base = "/sessions/s1";
  call(s, "POST", base + "/selection", {{"template", "all"}}, 200);
  const json j = call(s, "POST", base + "/generate", {{"mode", "init_with"}, {"n_sentences", 3}}, 200);
  CHECK(j["summary"].size() == 3);
  CHECK(j["coverage"].is_object());
  CHECK(j["coverage"]["usage_probs"].size() == j["document"]["tokens"].size());
  CHECK(j["aggregated"].size() == 6);
  CHECK(j["aggregated"][0].size() == 3);
  CHECK(j["history"].back()["event"] == "BACKWARD");
}

TEST_CASE("error mapping") {
  Service s = make_service();
  check_error(s.handle("POST", "/sessions/s9/generate", R"({"mode":"init_with"})"), 404, "NOT_FOUND");
  check_error(s.handle("GET", "/nowhere", ""), 404, "NOT_FOUND");
  check_error(s.handle("POST", "/sessions", "{not json"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions", R"({"document": 3})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions", R"({"document": ""})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions", R"({"document": "a b .", "threshold": 2})"), 400, "INVALID_REQUEST");

  call(s, "POST", "/sessions", {{"document", anna_document()}}, 201);
  check_error(s.handle("POST", "/sessions/s1/selection", R"({"template":"match"})"), 409, "NO_BACKWARD_RESULT");
  check_error(s.handle("POST", "/sessions/s1/selection", R"({"template":"most"})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/selection", R"({"sentences":[0],"template":"all"})"), 400,
              "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/selection", R"({"sentences":[42]})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/generate", R"({"mode":"rewrite"})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/generate", R"({"mode":"init_with","n_sentences":0})"), 400,
              "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/generate", R"({"mode":"complete"})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/summary/0", R"({"action":"delete"})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/summary/x", R"({"action":"delete"})"), 400, "INVALID_REQUEST");
  check_error(s.handle("POST", "/sessions/s1/summary/0", R"({"action":"shout"})"), 400, "INVALID_REQUEST");
  check_error(s.handle("DELETE", "/sessions/s1", ""), 404, "NOT_FOUND");

  // Nothing above mutated the session beyond its creation.
  const json j = call(s, "GET", "/sessions/s1", nullptr, 200);
  CHECK(j["history"].size() == 1);
}

TEST_CASE("idempotent reads") {
  Service s = make_service();
  call(s, "POST", "/sessions", {{"document", anna_document()}}, 201);
  call(s, "POST", "/sessions/s1/generate", {{"mode", "init_with"}, {"n_sentences", 2}}, 200);
  const Response a = s.handle("GET", "/sessions/s1", "");
  const Response b = s.handle("GET", "/sessions/s1", "");
  CHECK(a.body == b.body);
  call(s, "POST", "/sessions/s1/generate", {{"mode", "add_sentence"}}, 200);
  CHECK(s.handle("GET", "/sessions/s1", "").body != a.body);
}

TEST_CASE("attribute is stateless") {
  Service s = make_service();
  const json j = call(s, "POST", "/attribute", {{"document", anna_document()}, {"summary", "a user summary ."}}, 200);
  for (const char* key : {"usage_probs", "covered_words", "covered_sentences"}) CHECK(j.contains(key));
  CHECK(j["threshold"] == 0.5);
  CHECK(s.session_count() == 0);
  const json strict =
      call(s, "POST", "/attribute", {{"document", anna_document()}, {"summary", "x ."}, {"threshold", 1.0}}, 200);
  CHECK(strict["covered_words"].size() <= j["covered_words"].size());
  check_error(s.handle("POST", "/attribute", R"({"summary":"x"})"), 400, "INVALID_REQUEST");
}

TEST_CASE("aggregation toggle and word selection") {
  Service s = make_service();
  call(s, "POST", "/sessions", {{"document", "a b . c d ."}}, 201);
  check_error(s.handle("POST", "/sessions/s1/selection", R"({"words":[0]})"), 400, "INVALID_REQUEST");
  call(s, "POST", "/sessions/s1/aggregation", {{"enabled", false}}, 200);
  const json j = call(s, "POST", "/sessions/s1/selection", {{"words", {0, 1, 2}}}, 200);
  CHECK(j["word_selection"] == json({0, 1, 2}));
  CHECK(j["aggregation"] == false);
}

TEST_CASE("golden review scenario") {
  Service s = make_service();
  const json transcript = golden_roundtrip(s, anna_document());
  const auto& steps = transcript["steps"];
  REQUIRE(steps.size() == 11);
  for (const auto& step : steps) CHECK(step["status"] == 200);

  for (const auto& step : steps) {
    if (step["request"]["path"].get<std::string>().find("/generate") == std::string::npos) continue;
    const auto& history = step["response"]["history"];
    const std::size_t n = history.size();
    CHECK(history[n - 2]["event"] == "FORWARD");
    CHECK(history[n - 1]["event"] == "BACKWARD");
  }
  const json& complete = steps[6]["response"]["summary"].back();
  CHECK(std::vector<std::string>(complete["tokens"].begin(), complete["tokens"].begin() + 3) ==
        std::vector<std::string>{"the", "water", "is"});
  const auto before = steps[9]["response"]["summary"].back()["tokens"].get<std::vector<std::string>>();
  const auto after = steps[10]["response"]["summary"].back()["tokens"].get<std::vector<std::string>>();
  const bool shares = std::any_of(after.begin(), after.end(),
                                  [&](const std::string& w) { return std::count(before.begin(), before.end(), w) > 0; });
  CHECK(steps[10]["response"]["summary"].back()["origin"] == (shares ? "MIXED" : "USER"));

  const std::string text = testing::transcript_text(transcript);
  Service again = make_service();
  CHECK(testing::transcript_text(golden_roundtrip(again, anna_document())) == text);

  const std::filesystem::path golden = std::filesystem::path(CSI_GOLDEN_DIR) / "anna_transcript.json";
  if (std::getenv("CSI_UPDATE_GOLDEN")) {
    std::ofstream(golden, std::ios::binary) << text;
  }
  const std::string expected = read_file(golden);
  std::size_t diff = 0;
  while (diff < text.size() && diff < expected.size() && text[diff] == expected[diff]) ++diff;
  INFO("first differing byte at offset ", diff);
  CHECK(text == expected);
}

TEST_CASE("persist directory mirrors the session") {
  const auto dir = std::filesystem::temp_directory_path() / "csi_test_persist";
  std::filesystem::remove_all(dir);
  ServiceOptions options;
  options.persist_dir = dir;
  Service s = make_service(options);
  call(s, "POST", "/sessions", {{"document", anna_document()}}, 201);
  CHECK(std::filesystem::exists(dir / "s1.json"));
  const json live = call(s, "POST", "/sessions/s1/generate", {{"mode", "init_with"}, {"n_sentences", 1}}, 200);
  CHECK(json::parse(read_file(dir / "s1.json")) == live);
  std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent writers on one session are serialized") {
  Service s = make_service();
  call(s, "POST", "/sessions", {{"document", anna_document()}}, 201);
  call(s, "POST", "/sessions", {{"document", anna_document()}}, 201);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&s, t] {
      const std::string path = t % 2 == 0 ? "/sessions/s1/selection" : "/sessions/s2/selection";
      for (int k = 0; k < 25; ++k) s.handle("POST", path, json{{"sentences", {k % 6}}}.dump());
    });
  }
  for (auto& th : threads) th.join();
  for (const char* id : {"s1", "s2"}) {
    const json j = call(s, "GET", std::string("/sessions/") + id, nullptr, 200);
    CHECK(j["history"].size() == 51);
    for (std::size_t k = 0; k < j["history"].size(); ++k) CHECK(j["history"][k]["seq"] == k + 1);
  }
}

TEST_CASE("HTTP transport") {
  Service s = make_service();
  HttpFrontend http(s);
  const int port = http.bind("127.0.0.1", 0);
  std::thread server([&] { http.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Content-Type") == "application/json");

  auto created = client.Post("/sessions", json{{"document", anna_document()}}.dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  auto wrong_type = client.Post("/sessions", json{{"document", "a ."}}.dump(), "text/plain");
  REQUIRE(wrong_type);
  check_error({wrong_type->status, wrong_type->body}, 400, "INVALID_REQUEST");
  auto missing = client.Get("/sessions/s7");
  REQUIRE(missing);
  check_error({missing->status, missing->body}, 404, "NOT_FOUND");

  http.stop();
  server.join();
}
