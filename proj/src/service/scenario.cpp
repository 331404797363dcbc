#include <algorithm>

#include "csi/numerics/errors.hpp"
#include "csi/service/service.hpp"

namespace csi {

using nlohmann::json;

namespace {

class Recorder {
 public:
  explicit Recorder(Service& service) : service_(service) {}

  json call(const std::string& name, const std::string& method, const std::string& path, const json& body) {
    const std::string payload = body.is_null() ? "" : body.dump();
    const Response r = service_.handle(method, path, payload);
    json response = json::parse(r.body);
    log_.push_back({{"step", log_.size()},
                    {"name", name},
                    {"request", {{"method", method}, {"path", path}, {"body", body}}},
                    {"status", r.status},
                    {"response", response}});
    if (r.status >= 300) throw std::runtime_error("scenario step " + name + " failed: " + r.body);
    return response;
  }

  json log() const { return log_; }

 private:
  Service& service_;
  json log_ = json::array();
};

std::string sentence_text(const json& session, std::size_t index) {
  return session.at("summary").at(index).at("text").get<std::string>();
}

}  // namespace

json golden_roundtrip(Service& service, const std::string& document) {
  Recorder rec(service);
  json s = rec.call("create", "POST", "/sessions", {{"document", document}});
  const std::string base = "/sessions/" + s.at("id").get<std::string>();

  s = rec.call("init_with 3", "POST", base + "/generate", {{"mode", "init_with"}, {"n_sentences", 3}});
  s = rec.call("match", "POST", base + "/selection", {{"template", "match"}});
  s = rec.call("add", "POST", base + "/generate", {{"mode", "add_sentence"}});
  s = rec.call("delete", "POST", base + "/summary/1", {{"action", "delete"}});

  // Deselect the document sentence the summary draws on most.
  std::vector<std::size_t> selection = s.at("selection").get<std::vector<std::size_t>>();
  if (!selection.empty()) {
    const auto& aggregated = s.at("aggregated");
    auto mass = [&](std::size_t k) {
      double total = 0.0;
      for (const auto& v : aggregated.at(k)) total += v.get<double>();
      return total;
    };
    const auto top = std::max_element(selection.begin(), selection.end(),
                                      [&](std::size_t a, std::size_t b) { return mass(a) < mass(b); });
    selection.erase(top);
  }
  s = rec.call("deselect", "POST", base + "/selection", {{"sentences", selection}});
  s = rec.call("add", "POST", base + "/generate", {{"mode", "add_sentence"}});
  s = rec.call("complete", "POST", base + "/generate", {{"mode", "complete"}, {"prefix", "the water is ..."}});

  std::vector<std::string> words = tokenize(sentence_text(s, 0));
  if (words.size() > 1) words[1] = "was";
  s = rec.call("edit", "POST", base + "/summary/0", {{"action", "edit"}, {"text", detokenize(words)}});

  std::vector<std::size_t> uncovered;
  const auto covered = s.at("coverage").at("covered_sentences").get<std::vector<std::size_t>>();
  for (std::size_t k = 0; k < s.at("document").at("sentences").size(); ++k) {
    if (std::find(covered.begin(), covered.end(), k) == covered.end()) uncovered.push_back(k);
  }
  s = rec.call("select uncovered", "POST", base + "/selection", {{"sentences", uncovered}});
  s = rec.call("add", "POST", base + "/generate", {{"mode", "add_sentence"}});
  const std::size_t last = s.at("summary").size() - 1;
  s = rec.call("edit", "POST", base + "/summary/" + std::to_string(last),
               {{"action", "edit"}, {"text", "anna rewrote this sentence by hand ."}});

  json steps = rec.log();
  json setup = steps.at(0);
  steps.erase(steps.begin());
  return {{"model_version", service.model_version()}, {"setup", setup}, {"steps", steps}};
}

}  // namespace csi
