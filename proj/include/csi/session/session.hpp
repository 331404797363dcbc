#pragma once

#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "csi/backward/backward_model.hpp"
#include "csi/inference/generate.hpp"
#include "csi/model/forward_model.hpp"
#include "csi/textproc/text.hpp"

namespace csi {

class NoBackwardResult : public std::runtime_error {
 public:
  explicit NoBackwardResult(const std::string& what) : std::runtime_error(what) {}
};

enum class Origin { Model, User, Mixed };
enum class EventKind { Create, Select, Aggregation, Forward, Backward, Edit, Delete };
enum class SelectionTemplate { All, None, Match };

const char* origin_name(Origin origin) noexcept;
const char* event_name(EventKind kind) noexcept;
SelectionTemplate parse_template(const std::string& name);

struct SummarySentence {
  std::vector<std::string> tokens;
  Origin origin = Origin::Model;
};

// A traced output token, addressed by summary sentence and position in it.
struct SessionTraceRow {
  std::size_t sentence = 0;
  std::size_t index = 0;
  std::string token;
  std::vector<double> attention;
  CopyFlag copy;
  bool forced = false;
};

struct HistoryEvent {
  std::size_t seq = 0;
  EventKind kind = EventKind::Create;
  nlohmann::json detail;
};

struct ForwardRequest {
  GenerationMode mode = GenerationMode::InitWith;
  std::size_t n_sentences = 3;
  std::vector<std::string> prefix;  // Complete only
  std::size_t beam_width = 1;
  std::uint64_t seed = 0;
};

struct Engines {
  std::shared_ptr<const ForwardModel> forward;
  std::shared_ptr<const BackwardModel> backward;
};

// entry (s, o): attention mass from tokens of summary sentence o onto source
// positions inside sentence span s.
std::vector<std::vector<double>> aggregate_attention(std::span<const SessionTraceRow> trace,
                                                     std::span<const Span> sentence_spans,
                                                     std::size_t summary_sentences);
// Unaggregated variant: one row per source position.
std::vector<std::vector<double>> word_attention(std::span<const SessionTraceRow> trace, std::size_t source_length,
                                                std::size_t summary_sentences);

// Longest common subsequence alignment: for each element of `a`, the matched
// index in `b`, if any.
std::vector<std::optional<std::size_t>> lcs_alignment(std::span<const std::string> a,
                                                      std::span<const std::string> b);

// The collaborative state for one document. Every operation validates before
// mutating, so a failed call leaves the session untouched.
class Session {
 public:
  Session(std::string id, Document document, Engines engines, double threshold = 0.5);

  const std::string& id() const noexcept { return id_; }
  const Document& document() const noexcept { return document_; }
  const std::set<std::size_t>& selection() const noexcept { return selection_; }
  const std::optional<std::set<std::size_t>>& word_selection() const noexcept { return word_selection_; }
  bool aggregation() const noexcept { return aggregation_; }
  double threshold() const noexcept { return threshold_; }
  const std::optional<CoverageReport>& coverage() const noexcept { return coverage_; }
  const std::vector<SummarySentence>& summary() const noexcept { return summary_; }
  const std::optional<std::vector<SessionTraceRow>>& last_trace() const noexcept { return trace_; }
  const std::vector<std::vector<double>>& aggregated() const noexcept { return aggregated_; }
  const std::vector<HistoryEvent>& history() const noexcept { return history_; }

  std::set<std::size_t> selected_positions() const;
  std::vector<std::size_t> deselected_positions() const;
  std::vector<std::string> summary_tokens() const;
  // Every FORWARD, EDIT or DELETE is followed by exactly one BACKWARD.
  bool settled() const;

  void set_selection(std::set<std::size_t> sentences);
  // Word-level selection; only while aggregation is off.
  void set_word_selection(std::set<std::size_t> positions);
  void select_template(SelectionTemplate kind);
  void set_aggregation(bool enabled);

  void run_forward(const ForwardRequest& request);
  void edit_sentence(std::size_t index, std::string_view text);
  void delete_sentence(std::size_t index);

  nlohmann::json to_json() const;

 private:
  void record(EventKind kind, nlohmann::json detail);
  void run_backward();
  void recompute_aggregated();
  std::string render_token(const TraceRow& row, const std::vector<std::string>& prefix, std::size_t i) const;

  std::string id_;
  Document document_;
  Engines engines_;
  double threshold_;
  std::set<std::size_t> selection_;
  std::optional<std::set<std::size_t>> word_selection_;
  bool aggregation_ = true;
  std::optional<CoverageReport> coverage_;
  std::vector<SummarySentence> summary_;
  std::optional<std::vector<SessionTraceRow>> trace_;
  std::vector<std::vector<double>> aggregated_;
  std::vector<HistoryEvent> history_;
};

nlohmann::json coverage_to_json(const CoverageReport& report);

}  // namespace csi
