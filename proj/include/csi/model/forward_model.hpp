#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "csi/model/encoder.hpp"
#include "csi/numerics/kernels.hpp"
#include "csi/numerics/param_store.hpp"
#include "csi/numerics/tape.hpp"
#include "csi/numerics/tensor.hpp"
#include "csi/textproc/vocab.hpp"

namespace csi {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t max_summary_sentences = 3;
  std::size_t max_tokens_per_sentence = 20;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct EncoderOutput {
  Tensor states;  // [n, hidden]
  Tensor final;   // [hidden]
  std::vector<TokenId> ids;

  std::size_t length() const { return states.dim(0); }
};

enum class Prior { Free, ForcedZero };

// Per-word copy tags: the hook network's p(t|x), the user prior and the
// effective gate the decoder sees.
struct HookState {
  std::vector<double> model_probs;
  std::vector<Prior> prior;
  std::vector<double> effective;

  std::size_t size() const noexcept { return effective.size(); }
};

// Forces the tag prior to zero at the listed positions.
HookState apply_prior(std::span<const double> model_probs, std::span<const std::size_t> deselected);

// Copy gate derived from effective hook values: exact exclusion where the
// value is 0, a log(effective) logit offset elsewhere.
struct CopyGate {
  kernels::ExclusionMask excluded;
  Tensor log_bias;
  bool empty = true;

  static CopyGate from_effective(std::span<const double> effective);
};

struct DecoderState {
  Tensor hidden;   // [hidden]
  Tensor context;  // [hidden], attention context fed back as input
};

struct DecoderStepOutput {
  std::vector<double> attention;
  std::vector<double> copy_dist;  // all zero when the copy support is empty
  std::vector<double> gen_dist;
  double switch_gen = 1.0;  // p_gen
  std::vector<double> output_dist;
  DecoderState state;
  bool copy_support_empty = false;
};

struct StepGraph {
  Var attention;  // [n]
  Var copy;       // [n]; unset when the copy support is empty
  Var gen;        // [V]
  Var switch_gen; // [1]
  Var output;     // [V]
  Var hidden;
  Var context;
  bool copy_support_empty = false;
};

// Prediction network (GRU encoder, attentive GRU decoder with a
// generate/copy switch) and the hook network p(t|x) on the encoder states.
class ForwardModel {
 public:
  ForwardModel(ModelConfig config, Vocab vocab, ParamStore params);

  // Fresh weights drawn from `seed`. config.vocab_size is taken from `vocab`.
  static ForwardModel initialize(ModelConfig config, Vocab vocab, std::uint64_t seed);
  static ForwardModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  const ModelConfig& config() const noexcept { return config_; }
  const Vocab& vocab() const noexcept { return vocab_; }
  const ParamStore& params() const noexcept { return params_; }
  ParamStore& params() noexcept { return params_; }

  // Graph builders; `store` lets training differentiate a different copy of
  // the weights than the one owned here.
  EncoderGraph encode(Tape& tape, const ParamStore& store, std::span<const TokenId> ids) const;
  Var hook_probs(Tape& tape, const ParamStore& store, const EncoderGraph& enc) const;
  Var attention_keys(Tape& tape, const ParamStore& store, const EncoderGraph& enc) const;
  StepGraph step(Tape& tape, const ParamStore& store, const EncoderGraph& enc, Var keys, const CopyGate& gate,
                 TokenId prev, Var hidden, Var context) const;

  // Eager API over the owned weights.
  EncoderOutput encode(std::span<const TokenId> ids) const;
  std::vector<double> hook_forward(const EncoderOutput& enc) const;
  DecoderState initial_state(const EncoderOutput& enc) const;
  DecoderStepOutput decode_step(const EncoderOutput& enc, const HookState& hooks, TokenId prev,
                                const DecoderState& prev_state) const;

 private:
  ModelConfig config_;
  Vocab vocab_;
  ParamStore params_;
  Encoder encoder_;
  GruCell decoder_cell_;
};

}  // namespace csi
