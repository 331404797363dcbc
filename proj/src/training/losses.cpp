#include "csi/training/losses.hpp"

#include "csi/numerics/errors.hpp"

namespace csi {

namespace {
constexpr double kLogFloor = 1e-12;
}

TrainingExample encode_example(const Vocab& vocab, const CorpusExample& example) {
  TrainingExample ex;
  ex.source = vocab.encode(example.document.tokens);
  ex.summary = vocab.encode(example.summary_tokens);
  ex.tags.assign(example.gold_tags.begin(), example.gold_tags.end());
  return ex;
}

std::vector<TrainingExample> encode_examples(const Vocab& vocab, std::span<const CorpusExample> examples) {
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(encode_example(vocab, ex));
  return out;
}

Vocab build_vocab(std::span<const CorpusExample> examples, std::size_t max_size) {
  std::vector<std::vector<std::string>> texts;
  texts.reserve(2 * examples.size());
  for (const auto& ex : examples) {
    texts.push_back(ex.document.tokens);
    texts.push_back(ex.summary_tokens);
  }
  return Vocab::build(texts, max_size);
}

Var bce_loss(Tape& tape, Var probs, std::span<const double> targets) {
  using namespace ad;
  if (probs.value().size() != targets.size()) throw ContractViolation("one target per probability");
  Var t = tape.constant(Tensor({targets.size()}, std::vector<double>(targets.begin(), targets.end())));
  Var ll = t * log_clamped(probs, kLogFloor) + affine(t, -1.0, 1.0) * log_clamped(affine(probs, -1.0, 1.0), kLogFloor);
  return affine(mean(ll), -1.0, 0.0);
}

ForwardLosses forward_losses(const ForwardModel& model, Tape& tape, const ParamStore& store,
                             const TrainingExample& example) {
  using namespace ad;
  if (example.summary.empty()) throw ContractViolation("training example has no summary");
  const EncoderGraph enc = model.encode(tape, store, example.source);
  const CopyGate gate = CopyGate::from_effective(example.tags);
  Var keys = model.attention_keys(tape, store, enc);
  Var hidden = enc.final;
  Var context = tape.constant(Tensor({model.config().hidden_dim}));
  TokenId prev = Vocab::kBos;
  std::vector<Var> nll;
  nll.reserve(example.summary.size());
  for (TokenId y : example.summary) {
    const StepGraph g = model.step(tape, store, enc, keys, gate, prev, hidden, context);
    nll.push_back(log(pick(g.output, y)));
    hidden = g.hidden;
    context = g.context;
    prev = y;
  }
  ForwardLosses out;
  out.prediction = affine(mean(concat(nll)), -1.0, 0.0);
  out.hook = bce_loss(tape, model.hook_probs(tape, store, enc), example.tags);
  out.joint = out.prediction + out.hook;
  return out;
}

Var loss_backward_model(const BackwardModel& model, Tape& tape, const ParamStore& store,
                        const TrainingExample& example) {
  return bce_loss(tape, model.usage_probs(tape, store, example.source, example.summary), example.tags);
}

double loss_prediction(const ForwardModel& model, const TrainingExample& example) {
  Tape tape;
  return forward_losses(model, tape, model.params(), example).prediction.value().item();
}

double loss_hook(const ForwardModel& model, const TrainingExample& example) {
  Tape tape;
  return forward_losses(model, tape, model.params(), example).hook.value().item();
}

double loss_backward_model(const BackwardModel& model, const TrainingExample& example) {
  Tape tape;
  return loss_backward_model(model, tape, model.params(), example).value().item();
}

}  // namespace csi
