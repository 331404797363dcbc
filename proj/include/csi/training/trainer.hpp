#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "csi/backward/backward_model.hpp"
#include "csi/model/forward_model.hpp"
#include "csi/training/losses.hpp"
#include "csi/training/optimizer.hpp"

namespace csi {

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

// Area under the ROC curve by a trapezoidal sweep over all thresholds; tied
// scores move along the diagonal. Needs at least one label of each class.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

struct EpochMetrics {
  std::size_t epoch = 0;
  std::optional<double> loss_pred;
  std::optional<double> loss_hook;
  std::optional<double> loss_backward;
  std::optional<double> token_acc;
  std::optional<double> tag_auc;

  // Only the fields that are set.
  nlohmann::json to_json() const;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

struct EvalReport {
  double token_accuracy = 0.0;
  double tag_auc = 0.0;   // backward usage_probs vs gold tags
  double hook_auc = 0.0;  // forward p(t|x) vs gold tags
  std::size_t masking_violations = 0;
  std::size_t examples = 0;
  std::vector<EpochMetrics> curves;

  nlohmann::json to_json() const;
};

// Next-token exact-match accuracy under teacher forcing with gold tags as
// effective hook values; argmax over emittable tokens.
double token_accuracy(const ForwardModel& model, std::span<const TrainingExample> examples);
double hook_auc(const ForwardModel& model, std::span<const TrainingExample> examples);
double tag_auc(const BackwardModel& model, std::span<const TrainingExample> examples);

// Greedy decodes with random word deselections; counts every step that puts
// nonzero copy mass on a deselected position.
std::size_t masking_violations(const ForwardModel& model, std::span<const TrainingExample> examples,
                               std::uint64_t seed);

// Joint prediction + hook training. Metrics per epoch: training loss means and
// held-out token accuracy and hook AUC.
std::vector<EpochMetrics> train_forward(ForwardModel& model, std::span<const TrainingExample> train,
                                        std::span<const TrainingExample> held_out, const TrainConfig& config,
                                        const EpochCallback& on_epoch = {});
std::vector<EpochMetrics> train_backward(BackwardModel& model, std::span<const TrainingExample> train,
                                         std::span<const TrainingExample> held_out, const TrainConfig& config,
                                         const EpochCallback& on_epoch = {});

// Splits the corpus, builds the vocabulary from the training part and trains
// a model initialised from config.seed. Both fits of one corpus share a vocabulary.
ForwardModel fit_forward(std::span<const CorpusExample> corpus, ModelConfig model, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});
BackwardModel fit_backward(std::span<const CorpusExample> corpus, BackwardConfig model, const TrainConfig& config,
                           const EpochCallback& on_epoch = {});

EvalReport evaluate(const ForwardModel& model, const BackwardModel& backward, std::span<const CorpusExample> held_out,
                    std::uint64_t seed = 0);

}  // namespace csi
