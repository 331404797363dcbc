#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csi/model/forward_model.hpp"
#include "csi/textproc/text.hpp"

namespace csi {

enum class GenerationMode { InitWith, AddSentence, Complete };

const char* mode_name(GenerationMode mode) noexcept;
GenerationMode parse_mode(const std::string& name);

struct GenerationRequest {
  GenerationMode mode = GenerationMode::InitWith;
  std::size_t n_sentences = 3;                  // InitWith only
  std::vector<TokenId> prefix_summary;          // existing summary, teacher-forced
  std::vector<TokenId> prefix_in_sentence;      // Complete only
  std::optional<std::set<std::size_t>> selection;  // selected word positions; nullopt selects all
  std::size_t beam_width = 1;
  std::uint64_t seed = 0;

  void validate(const ModelConfig& config, std::size_t document_length) const;
};

struct CopyFlag {
  bool via_copy = false;
  std::optional<std::size_t> source;  // set only when via_copy
};

// One row per output token (teacher-forced prefix tokens included).
struct TraceRow {
  TokenId token = 0;
  std::vector<double> attention;  // over source positions
  CopyFlag copy;
  bool forced = false;  // token came from the request prefix
};

using AttentionTrace = std::vector<TraceRow>;

struct GenerationResult {
  std::vector<std::vector<TokenId>> sentences;
  AttentionTrace trace;                 // aligned with the concatenated sentences
  std::vector<bool> truncated;          // per sentence: hit max_tokens_per_sentence
  std::vector<std::string> warnings;
  double log_prob = 0.0;                // of the decoded (non-forced) tokens

  std::vector<CopyFlag> copy_flags() const;
  std::size_t token_count() const;
};

// Tokens the decoder may emit: everything except <pad>, <bos>, <eos> and "...".
bool is_emittable(TokenId id) noexcept;
bool is_terminator_id(const Vocab& vocab, TokenId id);

// Deselected word positions: the complement of the request selection.
std::vector<std::size_t> deselected_positions(const GenerationRequest& request, std::size_t document_length);

// Greedy decoding when beam_width is 1, beam search otherwise.
GenerationResult generate(const ForwardModel& model, const Document& document, const GenerationRequest& request);
// Beam search at any width, including 1.
GenerationResult generate_beam(const ForwardModel& model, const Document& document, const GenerationRequest& request);

}  // namespace csi
