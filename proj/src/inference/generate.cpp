#include "csi/inference/generate.hpp"

#include <algorithm>
#include <cmath>

#include "csi/numerics/errors.hpp"

namespace csi {

const char* mode_name(GenerationMode mode) noexcept {
  switch (mode) {
    case GenerationMode::InitWith: return "INIT_WITH";
    case GenerationMode::AddSentence: return "ADD_SENTENCE";
    case GenerationMode::Complete: return "COMPLETE";
  }
  return "?";
}

GenerationMode parse_mode(const std::string& name) {
  if (name == "INIT_WITH") return GenerationMode::InitWith;
  if (name == "ADD_SENTENCE") return GenerationMode::AddSentence;
  if (name == "COMPLETE") return GenerationMode::Complete;
  throw ContractViolation("unknown generation mode: " + name);
}

void GenerationRequest::validate(const ModelConfig& config, std::size_t document_length) const {
  if (mode == GenerationMode::InitWith && (n_sentences < 1 || n_sentences > config.max_summary_sentences)) {
    throw ContractViolation("n_sentences must be between 1 and " + std::to_string(config.max_summary_sentences));
  }
  if (mode == GenerationMode::Complete && prefix_in_sentence.empty()) {
    throw ContractViolation("COMPLETE needs a non-empty prefix_in_sentence");
  }
  if (beam_width < 1) throw ContractViolation("beam_width must be >= 1");
  if (selection) {
    for (std::size_t pos : *selection) {
      if (pos >= document_length) throw ContractViolation("selected position " + std::to_string(pos) + " out of range");
    }
  }
  for (const auto* ids : {&prefix_summary, &prefix_in_sentence}) {
    for (TokenId id : *ids) {
      if (id >= config.vocab_size) throw ContractViolation("prefix token id out of range");
    }
  }
}

std::vector<CopyFlag> GenerationResult::copy_flags() const {
  std::vector<CopyFlag> flags;
  flags.reserve(trace.size());
  for (const TraceRow& row : trace) flags.push_back(row.copy);
  return flags;
}

std::size_t GenerationResult::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

bool is_emittable(TokenId id) noexcept {
  return id != Vocab::kPad && id != Vocab::kBos && id != Vocab::kEos && id != Vocab::kEllipsis;
}

bool is_terminator_id(const Vocab& vocab, TokenId id) { return is_terminator(vocab.token(id)); }

std::vector<std::size_t> deselected_positions(const GenerationRequest& request, std::size_t document_length) {
  std::vector<std::size_t> out;
  if (!request.selection) return out;
  for (std::size_t i = 0; i < document_length; ++i) {
    if (!request.selection->count(i)) out.push_back(i);
  }
  return out;
}

namespace {

struct Context {
  const ForwardModel& model;
  EncoderOutput enc;
  HookState hooks;
  std::size_t target_sentences;
};

struct Hypothesis {
  std::vector<std::vector<TokenId>> sentences{{}};  // last entry is the open sentence
  std::vector<bool> truncated;
  AttentionTrace trace;
  DecoderState state;
  TokenId prev = Vocab::kBos;
  double log_prob = 0.0;
  std::size_t open_decoded = 0;  // decoded tokens in the open sentence

  std::size_t finished() const { return truncated.size(); }
};

TraceRow make_row(const DecoderStepOutput& out, const std::vector<TokenId>& source, TokenId y, bool forced) {
  TraceRow row;
  row.token = y;
  row.attention = out.attention;
  row.forced = forced;
  const double gen_part = out.switch_gen * out.gen_dist[y];
  double copy_mass = 0.0;
  std::optional<std::size_t> best;
  for (std::size_t j = 0; j < source.size(); ++j) {
    if (source[j] != y) continue;
    copy_mass += out.copy_dist[j];
    if (out.copy_dist[j] > 0.0 && (!best || out.copy_dist[j] > out.copy_dist[*best])) best = j;
  }
  const double copy_part = (1.0 - out.switch_gen) * copy_mass;
  if (copy_part > gen_part && best) {
    row.copy.via_copy = true;
    row.copy.source = best;
  }
  return row;
}

// Appends a decoded token and closes the sentence on a terminator or when
// the per-sentence budget is spent.
void push_token(const Context& ctx, Hypothesis& h, const DecoderStepOutput& out, TokenId y) {
  h.trace.push_back(make_row(out, ctx.enc.ids, y, false));
  h.log_prob += std::log(out.output_dist[y]);
  h.sentences.back().push_back(y);
  h.state = out.state;
  h.prev = y;
  ++h.open_decoded;
  const bool ends = is_terminator_id(ctx.model.vocab(), y);
  if (ends || h.open_decoded >= ctx.model.config().max_tokens_per_sentence) {
    h.truncated.push_back(!ends);
    h.open_decoded = 0;
    if (h.finished() < ctx.target_sentences) h.sentences.emplace_back();
  }
}

TokenId argmax_emittable(const std::vector<double>& dist) {
  TokenId best = Vocab::kUnk;
  double best_p = -1.0;
  for (TokenId v = 0; v < dist.size(); ++v) {
    if (is_emittable(v) && dist[v] > best_p) {
      best_p = dist[v];
      best = v;
    }
  }
  return best;
}

Hypothesis run_greedy(const Context& ctx, Hypothesis h) {
  while (h.finished() < ctx.target_sentences) {
    const DecoderStepOutput out = ctx.model.decode_step(ctx.enc, ctx.hooks, h.prev, h.state);
    push_token(ctx, h, out, argmax_emittable(out.output_dist));
  }
  return h;
}

std::vector<TokenId> top_emittable(const std::vector<double>& dist, std::size_t k) {
  std::vector<TokenId> ids;
  for (TokenId v = 0; v < dist.size(); ++v) {
    if (is_emittable(v)) ids.push_back(v);
  }
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), [&](TokenId a, TokenId b) {
    return dist[a] > dist[b] || (dist[a] == dist[b] && a < b);
  });
  ids.resize(k);
  return ids;
}

Hypothesis run_beam(const Context& ctx, Hypothesis start, std::size_t width) {
  std::vector<Hypothesis> live{std::move(start)};
  std::vector<Hypothesis> done;
  while (!live.empty() && done.size() < width) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : live) {
      const DecoderStepOutput out = ctx.model.decode_step(ctx.enc, ctx.hooks, h.prev, h.state);
      for (TokenId y : top_emittable(out.output_dist, width)) {
        Hypothesis next = h;
        push_token(ctx, next, out, y);
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.log_prob > b.log_prob; });
    live.clear();
    for (std::size_t i = 0; i < candidates.size() && i < width; ++i) {
      if (candidates[i].finished() == ctx.target_sentences) {
        done.push_back(std::move(candidates[i]));
      } else {
        live.push_back(std::move(candidates[i]));
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < done.size(); ++i) {
    if (done[i].log_prob > done[best].log_prob) best = i;
  }
  return std::move(done.at(best));
}

GenerationResult run(const ForwardModel& model, const Document& document, const GenerationRequest& request,
                     bool beam) {
  request.validate(model.config(), document.tokens.size());
  const std::vector<TokenId> source = model.vocab().encode(document.tokens);
  Context ctx{model, model.encode(source), {}, 1};
  ctx.hooks = apply_prior(model.hook_forward(ctx.enc), deselected_positions(request, source.size()));
  if (request.mode == GenerationMode::InitWith) ctx.target_sentences = request.n_sentences;

  GenerationResult result;
  if (CopyGate::from_effective(ctx.hooks.effective).empty) {
    result.warnings.push_back("copy support is empty: every source word is deselected, decoding by generation only");
  }

  Hypothesis start;
  start.state = model.initial_state(ctx.enc);
  if (request.mode != GenerationMode::InitWith) {
    for (TokenId y : request.prefix_summary) {
      start.state = model.decode_step(ctx.enc, ctx.hooks, start.prev, start.state).state;
      start.prev = y;
    }
  }
  if (request.mode == GenerationMode::Complete) {
    for (TokenId y : request.prefix_in_sentence) {
      const DecoderStepOutput out = model.decode_step(ctx.enc, ctx.hooks, start.prev, start.state);
      start.trace.push_back(make_row(out, ctx.enc.ids, y, true));
      start.sentences.back().push_back(y);
      start.state = out.state;
      start.prev = y;
    }
  }

  Hypothesis best = beam ? run_beam(ctx, std::move(start), request.beam_width) : run_greedy(ctx, std::move(start));
  result.sentences = std::move(best.sentences);
  result.truncated = std::move(best.truncated);
  result.trace = std::move(best.trace);
  result.log_prob = best.log_prob;
  for (std::size_t s = 0; s < result.truncated.size(); ++s) {
    if (result.truncated[s]) {
      result.warnings.push_back("sentence " + std::to_string(s) + " hit the max_tokens_per_sentence budget");
    }
  }
  return result;
}

}  // namespace

GenerationResult generate(const ForwardModel& model, const Document& document, const GenerationRequest& request) {
  return run(model, document, request, request.beam_width > 1);
}

GenerationResult generate_beam(const ForwardModel& model, const Document& document, const GenerationRequest& request) {
  return run(model, document, request, true);
}

}  // namespace csi
