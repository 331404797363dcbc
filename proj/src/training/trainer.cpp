#include "csi/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csi/inference/generate.hpp"
#include "csi/numerics/errors.hpp"

namespace csi {

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ContractViolation("one label per score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double pos = 0.0;
  for (double l : labels) pos += l > 0.5 ? 1.0 : 0.0;
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw ContractViolation("AUC needs both positive and negative labels");

  double area = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    double dtp = 0.0;
    double dfp = 0.0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] > 0.5 ? dtp : dfp) += 1.0;
    area += dfp * (tp + dtp / 2.0);
    tp += dtp;
    fp += dfp;
  }
  return area / (pos * neg);
}

nlohmann::json EpochMetrics::to_json() const {
  nlohmann::json j = {{"epoch", epoch}};
  const std::pair<const char*, const std::optional<double>*> fields[] = {
      {"loss_pred", &loss_pred}, {"loss_hook", &loss_hook}, {"loss_backward", &loss_backward},
      {"token_acc", &token_acc}, {"tag_auc", &tag_auc}};
  for (const auto& [key, value] : fields) {
    if (*value) j[key] = **value;
  }
  return j;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json curves_json = nlohmann::json::array();
  for (const auto& c : curves) curves_json.push_back(c.to_json());
  return {{"token_accuracy", token_accuracy},
          {"tag_auc", tag_auc},
          {"hook_auc", hook_auc},
          {"masking_violations", masking_violations},
          {"examples", examples},
          {"curves", curves_json}};
}

namespace {

TokenId argmax_emittable(std::span<const double> dist) {
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

void check_finite(double loss, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw TrainingDiverged(std::string(what) + " loss is " + std::to_string(loss) + " at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch));
  }
}

void check_weights(const ParamStore& params, std::size_t epoch, std::size_t batch) {
  for (const auto& name : params.names()) {
    if (!params.value(name).all_finite()) {
      throw TrainingDiverged("parameter " + name + " is not finite at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch));
    }
  }
}

template <typename LossFn, typename EvalFn>
std::vector<EpochMetrics> run_training(ParamStore& params, std::span<const TrainingExample> train,
                                       const TrainConfig& config, LossFn loss_fn, EvalFn eval_fn,
                                       const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw ContractViolation("training set is empty");
  Adam adam(config);
  Prng shuffle(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochMetrics> curves;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    std::vector<double> totals;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      check_weights(params, epoch, batch);
      params.zero_grads();
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        const std::vector<Var> parts = loss_fn(tape, train[order[k]]);
        if (totals.empty()) totals.assign(parts.size() - 1, 0.0);
        for (std::size_t p = 0; p + 1 < parts.size(); ++p) totals[p] += parts[p].value().item();
        const double total = parts.back().value().item();
        check_finite(total, "training", epoch, batch);
        params.accumulate(tape.backward(parts.back()), weight);
      }
      adam.step(params);
    }
    for (double& t : totals) t /= static_cast<double>(train.size());
    EpochMetrics m = eval_fn(totals);
    m.epoch = epoch;
    if (on_epoch) on_epoch(m);
    curves.push_back(m);
  }
  return curves;
}

}  // namespace

double token_accuracy(const ForwardModel& model, std::span<const TrainingExample> examples) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const TrainingExample& ex : examples) {
    Tape tape;
    const ParamStore& store = model.params();
    const EncoderGraph enc = model.encode(tape, store, ex.source);
    const CopyGate gate = CopyGate::from_effective(ex.tags);
    Var keys = model.attention_keys(tape, store, enc);
    Var hidden = enc.final;
    Var context = tape.constant(Tensor({model.config().hidden_dim}));
    TokenId prev = Vocab::kBos;
    for (TokenId y : ex.summary) {
      const StepGraph g = model.step(tape, store, enc, keys, gate, prev, hidden, context);
      correct += argmax_emittable(g.output.value().values()) == y ? 1 : 0;
      ++total;
      hidden = g.hidden;
      context = g.context;
      prev = y;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

double hook_auc(const ForwardModel& model, std::span<const TrainingExample> examples) {
  std::vector<double> scores;
  std::vector<double> labels;
  for (const TrainingExample& ex : examples) {
    const auto p = model.hook_forward(model.encode(ex.source));
    scores.insert(scores.end(), p.begin(), p.end());
    labels.insert(labels.end(), ex.tags.begin(), ex.tags.end());
  }
  return roc_auc(scores, labels);
}

double tag_auc(const BackwardModel& model, std::span<const TrainingExample> examples) {
  std::vector<double> scores;
  std::vector<double> labels;
  for (const TrainingExample& ex : examples) {
    Tape tape;
    const Tensor& p = model.usage_probs(tape, model.params(), ex.source, ex.summary).value();
    scores.insert(scores.end(), p.values().begin(), p.values().end());
    labels.insert(labels.end(), ex.tags.begin(), ex.tags.end());
  }
  return roc_auc(scores, labels);
}

std::size_t masking_violations(const ForwardModel& model, std::span<const TrainingExample> examples,
                               std::uint64_t seed) {
  Prng rng(seed);
  std::size_t violations = 0;
  for (const TrainingExample& ex : examples) {
    std::vector<std::size_t> deselected;
    for (std::size_t i = 0; i < ex.source.size(); ++i) {
      if (rng.uniform() < 0.5) deselected.push_back(i);
    }
    const EncoderOutput enc = model.encode(ex.source);
    const HookState hooks = apply_prior(model.hook_forward(enc), deselected);
    DecoderState state = model.initial_state(enc);
    TokenId prev = Vocab::kBos;
    for (std::size_t t = 0; t < std::max<std::size_t>(ex.summary.size(), 1); ++t) {
      const DecoderStepOutput out = model.decode_step(enc, hooks, prev, state);
      for (std::size_t pos : deselected) violations += out.copy_dist[pos] != 0.0 ? 1 : 0;
      state = out.state;
      prev = argmax_emittable(out.output_dist);
    }
  }
  return violations;
}

std::vector<EpochMetrics> train_forward(ForwardModel& model, std::span<const TrainingExample> train,
                                        std::span<const TrainingExample> held_out, const TrainConfig& config,
                                        const EpochCallback& on_epoch) {
  auto loss_fn = [&](Tape& tape, const TrainingExample& ex) {
    const ForwardLosses l = forward_losses(model, tape, model.params(), ex);
    return std::vector<Var>{l.prediction, l.hook, l.joint};
  };
  auto eval_fn = [&](const std::vector<double>& totals) {
    EpochMetrics m;
    m.loss_pred = totals[0];
    m.loss_hook = totals[1];
    if (!held_out.empty()) {
      m.token_acc = token_accuracy(model, held_out);
      m.tag_auc = hook_auc(model, held_out);
    }
    return m;
  };
  return run_training(model.params(), train, config, loss_fn, eval_fn, on_epoch);
}

std::vector<EpochMetrics> train_backward(BackwardModel& model, std::span<const TrainingExample> train,
                                         std::span<const TrainingExample> held_out, const TrainConfig& config,
                                         const EpochCallback& on_epoch) {
  auto loss_fn = [&](Tape& tape, const TrainingExample& ex) {
    Var l = loss_backward_model(model, tape, model.params(), ex);
    return std::vector<Var>{l, l};
  };
  auto eval_fn = [&](const std::vector<double>& totals) {
    EpochMetrics m;
    m.loss_backward = totals[0];
    if (!held_out.empty()) m.tag_auc = tag_auc(model, held_out);
    return m;
  };
  return run_training(model.params(), train, config, loss_fn, eval_fn, on_epoch);
}

EvalReport evaluate(const ForwardModel& model, const BackwardModel& backward, std::span<const CorpusExample> held_out,
                    std::uint64_t seed) {
  if (held_out.empty()) throw ContractViolation("nothing to evaluate");
  const auto fwd = encode_examples(model.vocab(), held_out);
  const auto bwd = encode_examples(backward.vocab(), held_out);
  EvalReport r;
  r.examples = held_out.size();
  r.token_accuracy = token_accuracy(model, fwd);
  r.hook_auc = hook_auc(model, fwd);
  r.tag_auc = tag_auc(backward, bwd);
  r.masking_violations = masking_violations(model, fwd, seed);
  return r;
}

ForwardModel fit_forward(std::span<const CorpusExample> corpus, ModelConfig model, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
  const CorpusSplit split = split_corpus({corpus.begin(), corpus.end()});
  const Vocab vocab = build_vocab(split.train);
  ForwardModel m = ForwardModel::initialize(model, vocab, config.seed);
  train_forward(m, encode_examples(vocab, split.train), encode_examples(vocab, split.held_out), config, on_epoch);
  return m;
}

BackwardModel fit_backward(std::span<const CorpusExample> corpus, BackwardConfig model, const TrainConfig& config,
                           const EpochCallback& on_epoch) {
  const CorpusSplit split = split_corpus({corpus.begin(), corpus.end()});
  const Vocab vocab = build_vocab(split.train);
  BackwardModel m = BackwardModel::initialize(model, vocab, config.seed);
  train_backward(m, encode_examples(vocab, split.train), encode_examples(vocab, split.held_out), config, on_epoch);
  return m;
}

}  // namespace csi
