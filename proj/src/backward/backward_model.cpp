#include "csi/backward/backward_model.hpp"

#include <cmath>

#include "csi/numerics/checkpoint.hpp"
#include "csi/numerics/errors.hpp"
#include "csi/numerics/kernels.hpp"

namespace csi {

namespace {

constexpr const char* kEmbedding = "bwd.embed";

nlohmann::json checkpoint_config(const BackwardConfig& config, const Vocab& vocab) {
  return {{"kind", "backward"}, {"model", config.to_json()}, {"vocab", vocab.tokens()}};
}

}  // namespace

void BackwardConfig::validate() const {
  if (vocab_size < Vocab::kReserved + 1) throw ContractViolation("vocab_size must cover the reserved ids");
  if (embed_dim < 1 || hidden_dim < 1) throw ContractViolation("backward model dimensions must be >= 1");
}

nlohmann::json BackwardConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"embed_dim", embed_dim}, {"hidden_dim", hidden_dim}};
}

BackwardConfig BackwardConfig::from_json(const nlohmann::json& j) {
  BackwardConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.validate();
  return c;
}

std::vector<double> usage_attention(const Tensor& x_i, const Tensor& summary) {
  if (summary.rank() != 2 || summary.dim(0) < 1) throw ContractViolation("summary vectors must be [m >= 1, d]");
  const Tensor a = kernels::softmax(kernels::matmul(summary, x_i), 0);
  return {a.values().begin(), a.values().end()};
}

Tensor context_vector(std::span<const double> weights, const Tensor& summary) {
  if (summary.rank() != 2 || weights.size() != summary.dim(0)) {
    throw ContractViolation("attention weights do not match the summary length");
  }
  const Tensor a({weights.size()}, std::vector<double>(weights.begin(), weights.end()));
  return kernels::matmul(kernels::transpose(summary), a);
}

double usage_prob(const Tensor& x_i, const Tensor& c_i, const UsageHead& head) {
  const Tensor* parts[] = {&x_i, &c_i};
  const Tensor hidden = kernels::tanh(kernels::add(kernels::matmul(head.w1, kernels::concat(parts, 0)), head.b1));
  const Tensor logit = kernels::add(kernels::matmul(head.w2, hidden), head.b2);
  return kernels::sigmoid(logit.item());
}

CoverageReport make_report(const Document& document, std::vector<double> usage_probs, double threshold) {
  if (usage_probs.size() != document.tokens.size()) throw ContractViolation("one usage probability per source word");
  CoverageReport r;
  r.threshold = threshold;
  r.usage_probs = std::move(usage_probs);
  for (std::size_t i = 0; i < r.usage_probs.size(); ++i) {
    if (r.usage_probs[i] >= threshold) r.covered_words.push_back(i);
  }
  for (std::size_t s = 0; s < document.sentences.size(); ++s) {
    for (std::size_t i = document.sentences[s].start; i < document.sentences[s].end; ++i) {
      if (r.usage_probs[i] >= threshold) {
        r.covered_sentences.push_back(s);
        break;
      }
    }
  }
  return r;
}

BackwardModel::BackwardModel(BackwardConfig config, Vocab vocab, ParamStore params)
    : config_(config),
      vocab_(std::move(vocab)),
      params_(std::move(params)),
      encoder_("bwd.enc", kEmbedding, config.vocab_size, config.embed_dim, config.hidden_dim) {
  config_.validate();
  if (config_.vocab_size != vocab_.size()) throw ContractViolation("backward vocab_size does not match the vocabulary");
}

BackwardModel BackwardModel::initialize(BackwardConfig config, Vocab vocab, std::uint64_t seed) {
  config.vocab_size = vocab.size();
  config.validate();
  const std::size_t H = config.hidden_dim;
  Prng rng(seed);
  ParamStore p;
  Encoder("bwd.enc", kEmbedding, config.vocab_size, config.embed_dim, H).init(p, rng);
  p.add("bwd.w1", uniform_init(rng, {H, 2 * H}, 2 * H));
  p.add("bwd.b1", Tensor({H}));
  p.add("bwd.w2", uniform_init(rng, {1, H}, H));
  p.add("bwd.b2", Tensor({1}));
  return BackwardModel(config, std::move(vocab), std::move(p));
}

BackwardModel BackwardModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.config.value("kind", "") != "backward") throw CheckpointError(path.string() + " is not a backward model");
  Vocab vocab = Vocab::from_tokens(ckpt.config.at("vocab").get<std::vector<std::string>>());
  return BackwardModel(BackwardConfig::from_json(ckpt.config.at("model")), std::move(vocab), std::move(ckpt.params));
}

void BackwardModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, params_, checkpoint_config(config_, vocab_));
}

std::string BackwardModel::serialize() const { return encode_checkpoint(params_, checkpoint_config(config_, vocab_)); }

UsageHead BackwardModel::head() const {
  return {params_.value("bwd.w1"), params_.value("bwd.b1"), params_.value("bwd.w2"), params_.value("bwd.b2")};
}

Var BackwardModel::contextualize(Tape& tape, const ParamStore& store, std::span<const TokenId> ids) const {
  return encoder_.run(tape, store, ids).states;
}

Var BackwardModel::usage_probs(Tape& tape, const ParamStore& store, std::span<const TokenId> source,
                               std::span<const TokenId> summary) const {
  using namespace ad;
  static constexpr TokenId kBosOnly[] = {Vocab::kBos};
  if (summary.empty()) summary = kBosOnly;
  Var x = contextualize(tape, store, source);   // [n, H]
  Var y = contextualize(tape, store, summary);  // [m, H]
  Var a = softmax(matmul(x, transpose(y)), 1);  // [n, m]
  Var c = matmul(a, y);                         // [n, H]
  Var parts[] = {x, c};
  Var hidden = tanh(add_row_bias(matmul(concat(parts, 1), transpose(tape.param(store, "bwd.w1"))),
                                 tape.param(store, "bwd.b1")));
  Var w2 = reshape(tape.param(store, "bwd.w2"), {config_.hidden_dim});
  return sigmoid(add_scalar(matmul(hidden, w2), tape.param(store, "bwd.b2")));
}

Tensor BackwardModel::contextualize(std::span<const TokenId> ids) const {
  Tape tape;
  return contextualize(tape, params_, ids).value();
}

CoverageReport BackwardModel::attribute(const Document& document, std::span<const std::string> summary_tokens,
                                        double threshold) const {
  if (document.tokens.empty()) throw ContractViolation("cannot attribute against an empty document");
  const std::vector<TokenId> source = vocab_.encode(document.tokens);
  const std::vector<TokenId> summary = vocab_.encode(summary_tokens);
  Tape tape;
  const Tensor& p = usage_probs(tape, params_, source, summary).value();
  CoverageReport r = make_report(document, {p.values().begin(), p.values().end()}, threshold);
  if (summary.empty()) {
    r.empty_summary = true;
    r.warnings.push_back("summary is empty: usage computed against a single <bos> vector");
  }
  return r;
}

}  // namespace csi
