#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "csi/model/encoder.hpp"
#include "csi/numerics/param_store.hpp"
#include "csi/numerics/tape.hpp"
#include "csi/textproc/text.hpp"
#include "csi/textproc/vocab.hpp"

namespace csi {

struct BackwardConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;

  void validate() const;
  nlohmann::json to_json() const;
  static BackwardConfig from_json(const nlohmann::json& j);
};

// Output head p = sigmoid(W2 tanh(W1 [x, c] + b1) + b2).
struct UsageHead {
  Tensor w1;  // [H, 2H]
  Tensor b1;  // [H]
  Tensor w2;  // [1, H]
  Tensor b2;  // [1]
};

struct CoverageReport {
  std::vector<double> usage_probs;
  std::vector<std::size_t> covered_words;
  std::vector<std::size_t> covered_sentences;
  double threshold = 0.5;
  bool empty_summary = false;
  std::vector<std::string> warnings;
};

// Softmax of x_i . y_k over the summary vectors (rows of `summary`).
std::vector<double> usage_attention(const Tensor& x_i, const Tensor& summary);
// c_i = sum_k a_k y_k
Tensor context_vector(std::span<const double> weights, const Tensor& summary);
double usage_prob(const Tensor& x_i, const Tensor& c_i, const UsageHead& head);

// Builds the covered sets for the given usage probabilities.
CoverageReport make_report(const Document& document, std::vector<double> usage_probs, double threshold);

// Backward inference p(t|x, y): which source words a summary used. Owns its
// own contextual encoder and never touches the prediction network.
class BackwardModel {
 public:
  BackwardModel(BackwardConfig config, Vocab vocab, ParamStore params);

  static BackwardModel initialize(BackwardConfig config, Vocab vocab, std::uint64_t seed);
  static BackwardModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string serialize() const;

  const BackwardConfig& config() const noexcept { return config_; }
  const Vocab& vocab() const noexcept { return vocab_; }
  const ParamStore& params() const noexcept { return params_; }
  ParamStore& params() noexcept { return params_; }
  UsageHead head() const;

  // Graph builders.
  Var contextualize(Tape& tape, const ParamStore& store, std::span<const TokenId> ids) const;
  // Per-source-word usage probabilities [n]; an empty summary is replaced by <bos>.
  Var usage_probs(Tape& tape, const ParamStore& store, std::span<const TokenId> source,
                  std::span<const TokenId> summary) const;

  Tensor contextualize(std::span<const TokenId> ids) const;
  CoverageReport attribute(const Document& document, std::span<const std::string> summary_tokens,
                           double threshold = 0.5) const;

 private:
  BackwardConfig config_;
  Vocab vocab_;
  ParamStore params_;
  Encoder encoder_;
};

}  // namespace csi
