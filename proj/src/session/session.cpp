#include "csi/session/session.hpp"

#include <algorithm>

#include "csi/numerics/errors.hpp"

namespace csi {

const char* origin_name(Origin origin) noexcept {
  switch (origin) {
    case Origin::Model: return "MODEL";
    case Origin::User: return "USER";
    case Origin::Mixed: return "MIXED";
  }
  return "?";
}

const char* event_name(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::Create: return "CREATE";
    case EventKind::Select: return "SELECT";
    case EventKind::Aggregation: return "AGGREGATION";
    case EventKind::Forward: return "FORWARD";
    case EventKind::Backward: return "BACKWARD";
    case EventKind::Edit: return "EDIT";
    case EventKind::Delete: return "DELETE";
  }
  return "?";
}

SelectionTemplate parse_template(const std::string& name) {
  if (name == "all") return SelectionTemplate::All;
  if (name == "none") return SelectionTemplate::None;
  if (name == "match") return SelectionTemplate::Match;
  throw ContractViolation("unknown selection template: " + name);
}

std::vector<std::vector<double>> aggregate_attention(std::span<const SessionTraceRow> trace,
                                                     std::span<const Span> sentence_spans,
                                                     std::size_t summary_sentences) {
  std::vector<std::vector<double>> m(sentence_spans.size(), std::vector<double>(summary_sentences, 0.0));
  for (const SessionTraceRow& row : trace) {
    if (row.sentence >= summary_sentences) throw ContractViolation("trace row points past the summary");
    for (std::size_t s = 0; s < sentence_spans.size(); ++s) {
      for (std::size_t i = sentence_spans[s].start; i < sentence_spans[s].end; ++i) {
        m[s][row.sentence] += row.attention.at(i);
      }
    }
  }
  return m;
}

std::vector<std::vector<double>> word_attention(std::span<const SessionTraceRow> trace, std::size_t source_length,
                                                std::size_t summary_sentences) {
  std::vector<std::vector<double>> m(source_length, std::vector<double>(summary_sentences, 0.0));
  for (const SessionTraceRow& row : trace) {
    if (row.sentence >= summary_sentences) throw ContractViolation("trace row points past the summary");
    for (std::size_t i = 0; i < source_length; ++i) m[i][row.sentence] += row.attention.at(i);
  }
  return m;
}

std::vector<std::optional<std::size_t>> lcs_alignment(std::span<const std::string> a,
                                                      std::span<const std::string> b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  // table[i][j]: LCS length of a[i:] and b[j:]
  std::vector<std::vector<std::size_t>> table(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      table[i][j] = a[i] == b[j] ? table[i + 1][j + 1] + 1 : std::max(table[i + 1][j], table[i][j + 1]);
    }
  }
  std::vector<std::optional<std::size_t>> match(n);
  for (std::size_t i = 0, j = 0; i < n && j < m;) {
    if (a[i] == b[j]) {
      match[i] = j;
      ++i;
      ++j;
    } else if (table[i + 1][j] >= table[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return match;
}

nlohmann::json coverage_to_json(const CoverageReport& report) {
  return {{"usage_probs", report.usage_probs},
          {"covered_words", report.covered_words},
          {"covered_sentences", report.covered_sentences},
          {"threshold", report.threshold},
          {"empty_summary", report.empty_summary},
          {"warnings", report.warnings}};
}

Session::Session(std::string id, Document document, Engines engines, double threshold)
    : id_(std::move(id)), document_(std::move(document)), engines_(std::move(engines)), threshold_(threshold) {
  if (document_.tokens.empty()) throw ContractViolation("document is empty");
  if (!engines_.forward || !engines_.backward) throw ContractViolation("session needs forward and backward models");
  if (!(threshold_ >= 0.0 && threshold_ <= 1.0)) throw ContractViolation("threshold must lie in [0, 1]");
  for (std::size_t s = 0; s < document_.sentence_count(); ++s) selection_.insert(s);
  record(EventKind::Create, {{"sentences", document_.sentence_count()}, {"tokens", document_.tokens.size()}});
}

std::set<std::size_t> Session::selected_positions() const {
  if (word_selection_) return *word_selection_;
  std::set<std::size_t> out;
  for (std::size_t s : selection_) {
    for (std::size_t i = document_.sentences[s].start; i < document_.sentences[s].end; ++i) out.insert(i);
  }
  return out;
}

std::vector<std::size_t> Session::deselected_positions() const {
  const std::set<std::size_t> selected = selected_positions();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < document_.tokens.size(); ++i) {
    if (!selected.count(i)) out.push_back(i);
  }
  return out;
}

std::vector<std::string> Session::summary_tokens() const {
  std::vector<std::string> out;
  for (const auto& s : summary_) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
  return out;
}

bool Session::settled() const {
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const EventKind k = history_[i].kind;
    if (k != EventKind::Forward && k != EventKind::Edit && k != EventKind::Delete) continue;
    if (i + 1 >= history_.size() || history_[i + 1].kind != EventKind::Backward) return false;
    if (i + 2 < history_.size() && history_[i + 2].kind == EventKind::Backward) return false;
  }
  return true;
}

void Session::record(EventKind kind, nlohmann::json detail) {
  history_.push_back({history_.size() + 1, kind, std::move(detail)});
}

void Session::set_selection(std::set<std::size_t> sentences) {
  for (std::size_t s : sentences) {
    if (s >= document_.sentence_count()) throw ContractViolation("sentence index " + std::to_string(s) + " out of range");
  }
  selection_ = std::move(sentences);
  word_selection_.reset();
  record(EventKind::Select, {{"sentences", selection_}});
}

void Session::set_word_selection(std::set<std::size_t> positions) {
  if (aggregation_) throw ContractViolation("word-level selection requires aggregation to be off");
  for (std::size_t p : positions) {
    if (p >= document_.tokens.size()) throw ContractViolation("word position " + std::to_string(p) + " out of range");
  }
  word_selection_ = std::move(positions);
  selection_.clear();
  for (std::size_t s = 0; s < document_.sentence_count(); ++s) {
    const Span& span = document_.sentences[s];
    bool all = true;
    for (std::size_t i = span.start; i < span.end && all; ++i) all = word_selection_->count(i) > 0;
    if (all) selection_.insert(s);
  }
  record(EventKind::Select, {{"words", *word_selection_}});
}

void Session::select_template(SelectionTemplate kind) {
  std::set<std::size_t> next;
  const char* name = "none";
  switch (kind) {
    case SelectionTemplate::All:
      for (std::size_t s = 0; s < document_.sentence_count(); ++s) next.insert(s);
      name = "all";
      break;
    case SelectionTemplate::None:
      break;
    case SelectionTemplate::Match:
      if (!coverage_) throw NoBackwardResult("no backward result yet: generate or write a summary first");
      next.insert(coverage_->covered_sentences.begin(), coverage_->covered_sentences.end());
      name = "match";
      break;
  }
  selection_ = std::move(next);
  word_selection_.reset();
  record(EventKind::Select, {{"template", name}, {"sentences", selection_}});
}

void Session::set_aggregation(bool enabled) {
  aggregation_ = enabled;
  // Back to sentence granularity: selection_ already mirrors fully selected sentences.
  if (enabled) word_selection_.reset();
  record(EventKind::Aggregation, {{"enabled", enabled}});
}

std::string Session::render_token(const TraceRow& row, const std::vector<std::string>& prefix, std::size_t i) const {
  if (row.forced && i < prefix.size()) return prefix[i];
  if (row.copy.via_copy && row.copy.source) return document_.tokens[*row.copy.source];
  return engines_.forward->vocab().token(row.token);
}

void Session::run_forward(const ForwardRequest& request) {
  const ForwardModel& model = *engines_.forward;
  GenerationRequest gen;
  gen.mode = request.mode;
  gen.n_sentences = request.n_sentences;
  gen.beam_width = request.beam_width;
  gen.seed = request.seed;
  gen.selection = selected_positions();
  if (request.mode != GenerationMode::InitWith) gen.prefix_summary = model.vocab().encode(summary_tokens());
  if (request.mode == GenerationMode::Complete) gen.prefix_in_sentence = model.vocab().encode(request.prefix);
  const GenerationResult result = generate(model, document_, gen);

  std::vector<SummarySentence> next = request.mode == GenerationMode::InitWith ? std::vector<SummarySentence>{}
                                                                               : summary_;
  std::vector<SessionTraceRow> trace =
      request.mode == GenerationMode::InitWith || !trace_ ? std::vector<SessionTraceRow>{} : *trace_;
  const Origin origin = request.mode == GenerationMode::Complete ? Origin::Mixed : Origin::Model;
  std::size_t flat = 0;
  for (const auto& ids : result.sentences) {
    SummarySentence sentence{{}, origin};
    for (std::size_t k = 0; k < ids.size(); ++k, ++flat) {
      const TraceRow& row = result.trace[flat];
      sentence.tokens.push_back(render_token(row, request.prefix, flat));
      trace.push_back({next.size(), k, sentence.tokens.back(), row.attention, row.copy, row.forced});
    }
    next.push_back(std::move(sentence));
  }

  summary_ = std::move(next);
  trace_ = std::move(trace);
  nlohmann::json detail = {{"mode", mode_name(request.mode)},
                           {"sentences_added", result.sentences.size()},
                           {"truncated", result.truncated},
                           {"warnings", result.warnings}};
  if (request.mode == GenerationMode::InitWith) detail["n_sentences"] = request.n_sentences;
  record(EventKind::Forward, std::move(detail));
  recompute_aggregated();
  run_backward();
}

void Session::edit_sentence(std::size_t index, std::string_view text) {
  if (index >= summary_.size()) throw ContractViolation("summary index " + std::to_string(index) + " out of range");
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) throw ContractViolation("edited sentence is empty; delete it instead");

  const SummarySentence& old = summary_[index];
  Origin origin = old.origin;
  const auto match = lcs_alignment(old.tokens, tokens);
  if (tokens != old.tokens) {
    const bool any_kept = std::any_of(match.begin(), match.end(), [](const auto& m) { return m.has_value(); });
    origin = old.origin == Origin::User || !any_kept ? Origin::User : Origin::Mixed;
  }

  std::vector<SummarySentence> pieces;
  std::vector<std::size_t> piece_of(tokens.size());
  std::vector<std::size_t> offset_in(tokens.size());
  for (const Span& span : split_sentences(tokens)) {
    for (std::size_t i = span.start; i < span.end; ++i) {
      piece_of[i] = pieces.size();
      offset_in[i] = i - span.start;
    }
    pieces.push_back({{tokens.begin() + static_cast<std::ptrdiff_t>(span.start),
                       tokens.begin() + static_cast<std::ptrdiff_t>(span.end)},
                      origin});
  }
  const std::size_t shift = pieces.size() - 1;

  if (trace_) {
    std::vector<SessionTraceRow> kept;
    for (SessionTraceRow row : *trace_) {
      if (row.sentence == index) {
        if (!match[row.index]) continue;
        const std::size_t j = *match[row.index];
        row.sentence = index + piece_of[j];
        row.index = offset_in[j];
      } else if (row.sentence > index) {
        row.sentence += shift;
      }
      kept.push_back(std::move(row));
    }
    trace_ = std::move(kept);
  }
  summary_.erase(summary_.begin() + static_cast<std::ptrdiff_t>(index));
  summary_.insert(summary_.begin() + static_cast<std::ptrdiff_t>(index), pieces.begin(), pieces.end());
  record(EventKind::Edit, {{"index", index}, {"origin", origin_name(origin)}, {"sentences", pieces.size()}});
  recompute_aggregated();
  run_backward();
}

void Session::delete_sentence(std::size_t index) {
  if (index >= summary_.size()) throw ContractViolation("summary index " + std::to_string(index) + " out of range");
  summary_.erase(summary_.begin() + static_cast<std::ptrdiff_t>(index));
  if (trace_) {
    std::vector<SessionTraceRow> kept;
    for (SessionTraceRow row : *trace_) {
      if (row.sentence == index) continue;
      if (row.sentence > index) --row.sentence;
      kept.push_back(std::move(row));
    }
    trace_ = std::move(kept);
  }
  record(EventKind::Delete, {{"index", index}});
  recompute_aggregated();
  run_backward();
}

void Session::run_backward() {
  coverage_ = engines_.backward->attribute(document_, summary_tokens(), threshold_);
  record(EventKind::Backward, {{"covered_sentences", coverage_->covered_sentences}, {"warnings", coverage_->warnings}});
}

void Session::recompute_aggregated() {
  aggregated_ = trace_ ? aggregate_attention(*trace_, document_.sentences, summary_.size())
                       : std::vector<std::vector<double>>{};
}

nlohmann::json Session::to_json() const {
  using nlohmann::json;
  json sentences = json::array();
  for (const Span& s : document_.sentences) sentences.push_back({s.start, s.end});
  json summary = json::array();
  for (const auto& s : summary_) {
    summary.push_back({{"tokens", s.tokens}, {"text", detokenize(s.tokens)}, {"origin", origin_name(s.origin)}});
  }
  json trace = nullptr;
  if (trace_) {
    trace = json::array();
    for (const auto& r : *trace_) {
      trace.push_back({{"sentence", r.sentence},
                       {"index", r.index},
                       {"token", r.token},
                       {"attention", r.attention},
                       {"via_copy", r.copy.via_copy},
                       {"source", r.copy.source ? json(*r.copy.source) : json(nullptr)},
                       {"forced", r.forced}});
    }
  }
  json proxies = json::array();
  for (std::size_t s = 0; s < document_.sentence_count(); ++s) {
    const bool covered = coverage_ && std::count(coverage_->covered_sentences.begin(),
                                                 coverage_->covered_sentences.end(), s) > 0;
    proxies.push_back({{"sentence", s}, {"selected", selection_.count(s) > 0}, {"covered", covered}});
  }
  json history = json::array();
  for (const auto& e : history_) history.push_back({{"seq", e.seq}, {"event", event_name(e.kind)}, {"detail", e.detail}});

  return {{"id", id_},
          {"document", {{"raw", document_.raw}, {"tokens", document_.tokens}, {"sentences", sentences}}},
          {"selection", selection_},
          {"word_selection", word_selection_ ? json(*word_selection_) : json(nullptr)},
          {"aggregation", aggregation_},
          {"summary", summary},
          {"coverage", coverage_ ? coverage_to_json(*coverage_) : json(nullptr)},
          {"last_trace", trace},
          {"aggregated", aggregated_},
          {"proxies", proxies},
          {"history", history}};
}

}  // namespace csi
