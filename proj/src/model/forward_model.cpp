#include "csi/model/forward_model.hpp"

#include <cmath>

#include "csi/numerics/checkpoint.hpp"
#include "csi/numerics/errors.hpp"

namespace csi {

void ModelConfig::validate() const {
  if (vocab_size < Vocab::kReserved + 1) throw ContractViolation("vocab_size must cover the reserved ids");
  if (embed_dim < 1 || hidden_dim < 1) throw ContractViolation("model dimensions must be >= 1");
  if (max_summary_sentences < 1) throw ContractViolation("max_summary_sentences must be >= 1");
  if (max_tokens_per_sentence < 1) throw ContractViolation("max_tokens_per_sentence must be >= 1");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},
          {"embed_dim", embed_dim},
          {"hidden_dim", hidden_dim},
          {"max_summary_sentences", max_summary_sentences},
          {"max_tokens_per_sentence", max_tokens_per_sentence}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.max_summary_sentences = j.value("max_summary_sentences", std::size_t{3});
  c.max_tokens_per_sentence = j.value("max_tokens_per_sentence", std::size_t{20});
  c.validate();
  return c;
}

HookState apply_prior(std::span<const double> model_probs, std::span<const std::size_t> deselected) {
  HookState h;
  h.model_probs.assign(model_probs.begin(), model_probs.end());
  h.prior.assign(model_probs.size(), Prior::Free);
  for (std::size_t pos : deselected) {
    if (pos >= model_probs.size()) {
      throw ContractViolation("deselected position " + std::to_string(pos) + " is outside the document");
    }
    h.prior[pos] = Prior::ForcedZero;
  }
  h.effective.resize(model_probs.size());
  for (std::size_t i = 0; i < model_probs.size(); ++i) {
    h.effective[i] = h.prior[i] == Prior::ForcedZero ? 0.0 : model_probs[i];
  }
  return h;
}

CopyGate CopyGate::from_effective(std::span<const double> effective) {
  if (effective.empty()) throw ContractViolation("copy gate needs at least one source position");
  CopyGate g;
  g.excluded.assign(effective.size(), 0);
  g.log_bias = Tensor({effective.size()});
  for (std::size_t i = 0; i < effective.size(); ++i) {
    const double e = effective[i];
    if (!(e >= 0.0 && e <= 1.0)) throw ContractViolation("effective hook values must lie in [0, 1]");
    if (e == 0.0) {
      g.excluded[i] = 1;
    } else {
      g.empty = false;
      if (e < 1.0) g.log_bias[i] = std::log(e);
    }
  }
  return g;
}

namespace {
constexpr const char* kEmbedding = "embed";
}

ForwardModel::ForwardModel(ModelConfig config, Vocab vocab, ParamStore params)
    : config_(config),
      vocab_(std::move(vocab)),
      params_(std::move(params)),
      encoder_("enc", kEmbedding, config.vocab_size, config.embed_dim, config.hidden_dim),
      decoder_cell_("dec.gru", config.embed_dim + config.hidden_dim, config.hidden_dim) {
  config_.validate();
  if (config_.vocab_size != vocab_.size()) throw ContractViolation("model vocab_size does not match the vocabulary");
}

ForwardModel ForwardModel::initialize(ModelConfig config, Vocab vocab, std::uint64_t seed) {
  config.vocab_size = vocab.size();
  config.validate();
  const std::size_t H = config.hidden_dim;
  const std::size_t V = config.vocab_size;
  Prng rng(seed);
  ParamStore p;
  Encoder("enc", kEmbedding, V, config.embed_dim, H).init(p, rng);
  GruCell("dec.gru", config.embed_dim + H, H).init(p, rng);
  p.add("hook.w", uniform_init(rng, {H}, H));
  p.add("hook.b", Tensor({1}));
  p.add("att.w", uniform_init(rng, {H, H}, H));
  p.add("out.w", uniform_init(rng, {V, 2 * H}, 2 * H));
  p.add("out.b", Tensor({V}));
  p.add("switch.w", uniform_init(rng, {2 * H}, 2 * H));
  p.add("switch.b", Tensor({1}));
  return ForwardModel(config, std::move(vocab), std::move(p));
}

std::string ForwardModel::serialize() const {
  const nlohmann::json config = {{"kind", "forward"}, {"model", config_.to_json()}, {"vocab", vocab_.tokens()}};
  return encode_checkpoint(params_, config);
}

void ForwardModel::save(const std::filesystem::path& path) const {
  const nlohmann::json config = {{"kind", "forward"}, {"model", config_.to_json()}, {"vocab", vocab_.tokens()}};
  save_checkpoint(path, params_, config);
}

ForwardModel ForwardModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.config.value("kind", "") != "forward") throw CheckpointError(path.string() + " is not a forward model");
  Vocab vocab = Vocab::from_tokens(ckpt.config.at("vocab").get<std::vector<std::string>>());
  return ForwardModel(ModelConfig::from_json(ckpt.config.at("model")), std::move(vocab), std::move(ckpt.params));
}

EncoderGraph ForwardModel::encode(Tape& tape, const ParamStore& store, std::span<const TokenId> ids) const {
  return encoder_.run(tape, store, ids);
}

Var ForwardModel::hook_probs(Tape& tape, const ParamStore& store, const EncoderGraph& enc) const {
  return ad::sigmoid(ad::add_scalar(ad::matmul(enc.states, tape.param(store, "hook.w")), tape.param(store, "hook.b")));
}

Var ForwardModel::attention_keys(Tape& tape, const ParamStore& store, const EncoderGraph& enc) const {
  // keys[j] = W_att h_j
  return ad::matmul(enc.states, ad::transpose(tape.param(store, "att.w")));
}

StepGraph ForwardModel::step(Tape& tape, const ParamStore& store, const EncoderGraph& enc, Var keys,
                             const CopyGate& gate, TokenId prev, Var hidden, Var context) const {
  using namespace ad;
  const std::size_t n = enc.ids.size();
  if (gate.excluded.size() != n) throw ContractViolation("hook state length does not match the source length");
  if (prev >= config_.vocab_size) throw ContractViolation("previous token id out of range");

  Var parts[] = {embedding(tape.param(store, kEmbedding), prev), context};
  Var s = decoder_cell_.step(tape, store, concat(parts), hidden);
  Var scores = matmul(keys, s);

  StepGraph g;
  g.hidden = s;
  g.attention = softmax(scores);
  g.context = matmul(enc.states_t, g.attention);
  Var feat_parts[] = {s, g.context};
  Var features = concat(feat_parts);
  g.gen = softmax(matmul(tape.param(store, "out.w"), features) + tape.param(store, "out.b"));

  if (gate.empty) {
    g.copy_support_empty = true;
    g.switch_gen = tape.constant(Tensor::scalar(1.0));
    g.output = g.gen;
    return g;
  }
  g.switch_gen = sigmoid(add_scalar(matmul(tape.param(store, "switch.w"), features), tape.param(store, "switch.b")));
  g.copy = masked_softmax(scores + tape.constant(gate.log_bias), gate.excluded);
  std::vector<std::size_t> targets(enc.ids.begin(), enc.ids.end());
  Var copied = scatter_add(g.copy, std::move(targets), config_.vocab_size);
  g.output = scale_by(g.gen, g.switch_gen) + scale_by(copied, affine(g.switch_gen, -1.0, 1.0));
  return g;
}

EncoderOutput ForwardModel::encode(std::span<const TokenId> ids) const {
  Tape tape;
  EncoderGraph g = encode(tape, params_, ids);
  return {g.states.value(), g.final.value(), g.ids};
}

std::vector<double> ForwardModel::hook_forward(const EncoderOutput& enc) const {
  Tape tape;
  EncoderGraph g;
  g.states = tape.constant(enc.states);
  const Tensor& p = hook_probs(tape, params_, g).value();
  return {p.values().begin(), p.values().end()};
}

DecoderState ForwardModel::initial_state(const EncoderOutput& enc) const {
  return {enc.final, Tensor({config_.hidden_dim})};
}

DecoderStepOutput ForwardModel::decode_step(const EncoderOutput& enc, const HookState& hooks, TokenId prev,
                                            const DecoderState& prev_state) const {
  if (hooks.size() != enc.ids.size()) throw ContractViolation("hook state length does not match the source length");
  Tape tape;
  EncoderGraph g;
  g.states = tape.constant(enc.states);
  g.states_t = tape.constant(kernels::transpose(enc.states));
  g.final = tape.constant(enc.final);
  g.ids = enc.ids;
  const CopyGate gate = CopyGate::from_effective(hooks.effective);
  Var keys = attention_keys(tape, params_, g);
  StepGraph step_graph = step(tape, params_, g, keys, gate, prev, tape.constant(prev_state.hidden),
                              tape.constant(prev_state.context));

  auto to_vec = [](Var v) {
    const Tensor& t = v.value();
    return std::vector<double>(t.values().begin(), t.values().end());
  };
  DecoderStepOutput out;
  out.attention = to_vec(step_graph.attention);
  out.copy_dist = step_graph.copy_support_empty ? std::vector<double>(enc.ids.size(), 0.0) : to_vec(step_graph.copy);
  out.gen_dist = to_vec(step_graph.gen);
  out.switch_gen = step_graph.switch_gen.value().item();
  out.output_dist = to_vec(step_graph.output);
  out.state = {step_graph.hidden.value(), step_graph.context.value()};
  out.copy_support_empty = step_graph.copy_support_empty;
  return out;
}

}  // namespace csi
