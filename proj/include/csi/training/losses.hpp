#pragma once

#include <span>
#include <vector>

#include "csi/backward/backward_model.hpp"
#include "csi/model/forward_model.hpp"
#include "csi/textproc/corpus.hpp"

namespace csi {

// A corpus example mapped to vocabulary ids.
struct TrainingExample {
  std::vector<TokenId> source;
  std::vector<TokenId> summary;
  std::vector<double> tags;  // gold copy tags, 0 or 1
};

TrainingExample encode_example(const Vocab& vocab, const CorpusExample& example);
std::vector<TrainingExample> encode_examples(const Vocab& vocab, std::span<const CorpusExample> examples);

// Vocabulary over the documents and summaries of `examples`.
Vocab build_vocab(std::span<const CorpusExample> examples, std::size_t max_size = 2000);

// Mean binary cross-entropy with logs clamped at 1e-12.
Var bce_loss(Tape& tape, Var probs, std::span<const double> targets);

struct ForwardLosses {
  Var prediction;  // mean NLL of the gold summary, gold tags as effective hooks
  Var hook;        // mean BCE of p(t|x) against the gold tags
  Var joint;       // prediction + hook
};

ForwardLosses forward_losses(const ForwardModel& model, Tape& tape, const ParamStore& store,
                             const TrainingExample& example);
Var loss_backward_model(const BackwardModel& model, Tape& tape, const ParamStore& store,
                        const TrainingExample& example);

double loss_prediction(const ForwardModel& model, const TrainingExample& example);
double loss_hook(const ForwardModel& model, const TrainingExample& example);
double loss_backward_model(const BackwardModel& model, const TrainingExample& example);

}  // namespace csi
