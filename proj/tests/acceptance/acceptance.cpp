// Acceptance run: one PASS/FAIL line per criterion A1..A9 on standard output,
// progress on standard error. Exit status 1 if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>

#include "anna_fixture.hpp"
#include "csi/inference/latent.hpp"
#include "csi/numerics/grad_check.hpp"
#include "csi/session/session.hpp"
#include "test_util.hpp"

using namespace csi;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

bool g_all_pass = true;

void report(const char* id, const char* title, double limit_s, const std::function<Outcome()>& run) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double t = seconds_since(t0);
  if (limit_s > 0 && t > limit_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(limit_s)) + " s budget";
  }
  g_all_pass = g_all_pass && o.pass;
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1f s", t);
  std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << title << ": " << o.detail << " (" << timing << ")"
            << std::endl;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Trained once and shared by the criteria that need realistic weights.
struct Trained {
  CorpusSplit split;
  Engines engines;
  EvalReport report;
  double train_seconds = 0.0;
};

Trained train_synthetic() {
  const auto t0 = Clock::now();
  Trained t;
  const auto corpus = generate_synthetic_corpus(0, 2000, 4);
  t.split = split_corpus(corpus);
  TrainConfig tc;
  tc.epochs = 20;
  tc.seed = 0;
  ModelConfig mc;
  mc.embed_dim = mc.hidden_dim = 32;
  BackwardConfig bc;
  bc.embed_dim = bc.hidden_dim = 32;
  auto log = [](const char* which) {
    return [which](const EpochMetrics& m) { std::cerr << which << " " << m.to_json().dump() << std::endl; };
  };
  t.engines.forward = std::make_shared<const ForwardModel>(fit_forward(corpus, mc, tc, log("forward")));
  t.engines.backward = std::make_shared<const BackwardModel>(fit_backward(corpus, bc, tc, log("backward")));
  t.report = evaluate(*t.engines.forward, *t.engines.backward, t.split.held_out);
  t.train_seconds = seconds_since(t0);
  return t;
}

std::set<std::size_t> random_subset(Prng& rng, std::size_t n, double keep) {
  std::set<std::size_t> s;
  for (std::size_t k = 0; k < n; ++k) {
    if (rng.uniform() < keep) s.insert(k);
  }
  return s;
}

Outcome a1_masking(const Trained& t) {
  const ForwardModel& model = *t.engines.forward;
  Prng rng(101);
  double forced_mass = 0.0;
  std::size_t steps = 0;
  for (int session = 0; session < 1000; ++session) {
    const CorpusExample& ex = t.split.held_out[rng.below(t.split.held_out.size())];
    const Document& doc = ex.document;
    const auto selected = random_subset(rng, doc.sentence_count(), 0.5);
    std::vector<std::size_t> deselected;
    for (std::size_t s = 0; s < doc.sentence_count(); ++s) {
      if (selected.count(s)) continue;
      for (std::size_t i = doc.sentences[s].start; i < doc.sentences[s].end; ++i) deselected.push_back(i);
    }
    const EncoderOutput enc = model.encode(model.vocab().encode(doc.tokens));
    const HookState hooks = apply_prior(model.hook_forward(enc), deselected);
    DecoderState state = model.initial_state(enc);
    TokenId prev = Vocab::kBos;
    Prng walk(rng.next_u64());
    for (int k = 0; k < 12; ++k, ++steps) {
      const auto out = model.decode_step(enc, hooks, prev, state);
      for (std::size_t pos : deselected) forced_mass += out.copy_dist[pos];
      state = out.state;
      // Mix greedy and sampled continuations to reach varied decoder states.
      prev = walk.uniform() < 0.5 ? static_cast<TokenId>(std::max_element(out.output_dist.begin(), out.output_dist.end()) -
                                                         out.output_dist.begin())
                                  : static_cast<TokenId>(walk.below(out.output_dist.size()));
    }
  }
  const auto held = encode_examples(model.vocab(), t.split.held_out);
  const std::size_t violations = masking_violations(model, held, 7);
  return {forced_mass == 0.0 && violations == 0,
          "forced-zero copy mass " + fmt(forced_mass) + " over " + std::to_string(steps) +
              " decode steps, masking_violations " + std::to_string(violations)};
}

Outcome a2_latent() {
  double worst = 0.0;
  // Hand cases.
  DiscreteLatentModel hand{{"z0", "z1"}, {"y", "not y"}, {0.4, 0.6}, {{0.5, 0.5}, {0.25, 0.75}}};
  const double m = marginal(hand, "y");
  const auto post = posterior(hand, "y");
  worst = std::max({worst, std::abs(m - 0.35), std::abs(post[0] - 4.0 / 7.0), std::abs(post[1] - 3.0 / 7.0)});

  const std::string golden = testing::read_file(std::string(CSI_GOLDEN_DIR) + "/lever_demo.txt");
  const bool lever_ok = lever_demo() == golden;
  const DiscreteLatentModel lever = lever_model();
  worst = std::max(worst, std::abs(marginal(lever, "left") - 0.5));
  worst = std::max(worst, std::abs(posterior(lever, "left")[0] - 1.0));

  Prng rng(202);
  for (int draw = 0; draw < 500; ++draw) {
    DiscreteLatentModel model;
    const std::size_t nz = 1 + rng.below(6);
    const std::size_t ny = 1 + rng.below(6);
    for (std::size_t z = 0; z < nz; ++z) model.latent_values.push_back("z" + std::to_string(z));
    for (std::size_t y = 0; y < ny; ++y) model.outcomes.push_back("y" + std::to_string(y));
    model.prior.resize(nz);
    for (auto& p : model.prior) p = 0.01 + rng.uniform();
    const double zsum = std::accumulate(model.prior.begin(), model.prior.end(), 0.0);
    for (auto& p : model.prior) p /= zsum;
    model.likelihood.assign(nz, std::vector<double>(ny));
    for (auto& row : model.likelihood) {
      for (auto& p : row) p = 0.01 + rng.uniform();
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      for (auto& p : row) p /= s;
    }
    // Enumerate the joint table directly.
    for (std::size_t y = 0; y < ny; ++y) {
      double column = 0.0;
      for (std::size_t z = 0; z < nz; ++z) column += model.prior[z] * model.likelihood[z][y];
      const double py = marginal(model, y);
      worst = std::max(worst, std::abs(py - column));
      const auto pz = posterior(model, y);
      double total = 0.0;
      for (std::size_t z = 0; z < nz; ++z) {
        worst = std::max(worst, std::abs(pz[z] * py - model.prior[z] * model.likelihood[z][y]));
        total += pz[z];
      }
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return {worst < 1e-12 && lever_ok,
          std::string("lever transcript ") + (lever_ok ? "matches" : "differs") + ", max deviation " + fmt(worst) +
              " over hand cases and 500 random models"};
}

Outcome a3_gradients() {
  const Vocab vocab = Vocab::from_tokens({"<pad>", "<bos>", "<eos>", "<unk>", "...", "a", "b", "c", "d", "e", "says", "."});
  double worst[3] = {0.0, 0.0, 0.0};
  Prng rng(303);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainingExample ex;
    for (std::size_t i = 0; i < 6; ++i) {
      ex.source.push_back(static_cast<TokenId>(5 + rng.below(7)));
      ex.tags.push_back(rng.uniform() < 0.4 ? 1.0 : 0.0);
    }
    ex.tags[rng.below(6)] = 1.0;
    for (std::size_t i = 0; i < 4; ++i) ex.summary.push_back(static_cast<TokenId>(5 + rng.below(7)));

    ModelConfig mc;
    mc.embed_dim = mc.hidden_dim = 8;
    ForwardModel f = ForwardModel::initialize(mc, vocab, seed);
    BackwardConfig bc;
    bc.embed_dim = bc.hidden_dim = 8;
    BackwardModel b = BackwardModel::initialize(bc, vocab, seed);
    const LossBuilder pred = [&](Tape& t, const ParamStore& s) { return forward_losses(f, t, s, ex).prediction; };
    const LossBuilder hook = [&](Tape& t, const ParamStore& s) { return forward_losses(f, t, s, ex).hook; };
    const LossBuilder bwd = [&](Tape& t, const ParamStore& s) { return loss_backward_model(b, t, s, ex); };
    worst[0] = std::max(worst[0], grad_check(pred, f.params(), 1e-3));
    worst[1] = std::max(worst[1], grad_check(hook, f.params(), 1e-3));
    worst[2] = std::max(worst[2], grad_check(bwd, b.params(), 1e-3));
  }
  const double w = std::max({worst[0], worst[1], worst[2]});
  return {w < 1e-4, "max relative error prediction " + fmt(worst[0]) + ", hook " + fmt(worst[1]) + ", backward " +
                        fmt(worst[2])};
}

Outcome a4_training(const Trained& t) {
  const double acc = t.report.token_accuracy;
  const double auc = t.report.tag_auc;
  char buf[160];
  std::snprintf(buf, sizeof buf, "held-out token_accuracy %.4f (>= 0.90), tag_auc %.4f (>= 0.90), trained in %.0f s",
                acc, auc, t.train_seconds);
  return {acc >= 0.90 && auc >= 0.90 && t.train_seconds < 15 * 60, buf};
}

// Sentence with the largest summed usage probability.
std::size_t top_covered_sentence(const Document& doc, const CoverageReport& cov) {
  std::size_t best = 0;
  double best_mass = -1.0;
  for (std::size_t s = 0; s < doc.sentence_count(); ++s) {
    double mass = 0.0;
    for (std::size_t i = doc.sentences[s].start; i < doc.sentences[s].end; ++i) mass += cov.usage_probs[i];
    if (mass > best_mass) {
      best_mass = mass;
      best = s;
    }
  }
  return best;
}

Outcome a5_steering(const Trained& t) {
  std::size_t differ = 0;
  const std::size_t n = 100;
  ForwardRequest one;
  one.n_sentences = 1;
  for (std::size_t k = 0; k < n; ++k) {
    const Document& doc = t.split.held_out[k].document;
    Session s("a5", doc, t.engines);
    s.select_template(SelectionTemplate::All);
    s.run_forward(one);
    const std::size_t top = top_covered_sentence(doc, *s.coverage());
    std::set<std::size_t> rest = s.selection();
    rest.erase(top);
    s.set_selection(rest);
    s.run_forward(one);
    if (top_covered_sentence(doc, *s.coverage()) != top) ++differ;
  }
  return {differ >= 95, std::to_string(differ) + "/" + std::to_string(n) +
                            " regenerated sentences move away from the deselected sentence (>= 95)"};
}

Outcome a6_prefix(const Trained& t) {
  Prng rng(606);
  const std::vector<std::string> outside = {"the", "water", "is", "anna", "zyzzyva", "cold"};
  std::size_t ok = 0;
  const std::size_t n = 200;
  for (std::size_t k = 0; k < n; ++k) {
    const Document& doc = t.split.held_out[k % t.split.held_out.size()].document;
    Session s("a6", doc, t.engines);
    ForwardRequest init;
    init.n_sentences = 1 + rng.below(2);
    s.set_selection(random_subset(rng, doc.sentence_count(), 0.7));
    s.run_forward(init);
    ForwardRequest r;
    r.mode = GenerationMode::Complete;
    r.beam_width = rng.uniform() < 0.5 ? 1 : 3;
    const std::size_t len = 1 + rng.below(4);
    for (std::size_t i = 0; i < len; ++i) {
      std::string w;
      do {
        w = rng.uniform() < 0.5 ? doc.tokens[rng.below(doc.tokens.size())] : outside[rng.below(outside.size())];
      } while (is_terminator(w));
      r.prefix.push_back(w);
    }
    s.run_forward(r);
    const auto& last = s.summary().back().tokens;
    if (last.size() >= len && std::equal(r.prefix.begin(), r.prefix.end(), last.begin())) ++ok;
  }
  return {ok == n, std::to_string(ok) + "/" + std::to_string(n) + " completions begin with the prefix verbatim"};
}

Outcome a7_conservation(const Trained& t) {
  Prng rng(707);
  double worst = 0.0;
  std::size_t rows = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const Document& doc = t.split.held_out[rng.below(t.split.held_out.size())].document;
    Session s("a7", doc, t.engines);
    s.set_selection(random_subset(rng, doc.sentence_count(), 0.6));
    ForwardRequest init;
    init.n_sentences = 1 + rng.below(3);
    s.run_forward(init);
    if (rng.uniform() < 0.5) {
      ForwardRequest add;
      add.mode = GenerationMode::AddSentence;
      s.run_forward(add);
    }
    double total = 0.0;
    for (const auto& row : s.aggregated()) total = std::accumulate(row.begin(), row.end(), total);
    rows += s.last_trace()->size();
    worst = std::max(worst, std::abs(total - static_cast<double>(s.last_trace()->size())));
  }
  return {worst <= 1e-9, "max |matrix total - traced tokens| " + fmt(worst) + " over 100 traces (" +
                             std::to_string(rows) + " rows)"};
}

Outcome a8_determinism() {
  struct Run {
    std::string forward, backward, transcript;
  };
  auto run = [] {
    const Engines e = testing::anna_engines(testing::anna_corpus());
    Service service(e, testing::model_version(e));
    return Run{e.forward->serialize(), e.backward->serialize(),
               testing::transcript_text(golden_roundtrip(service, testing::anna_document()))};
  };
  const Run a = run();
  const Run b = run();
  const std::string golden = testing::read_file(std::string(CSI_GOLDEN_DIR) + "/anna_transcript.json");
  const bool same_ckpt = a.forward == b.forward && a.backward == b.backward;
  const bool same_transcript = a.transcript == b.transcript;
  const bool matches_golden = a.transcript == golden;
  return {same_ckpt && same_transcript && matches_golden,
          std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") + ", transcripts " +
              (same_transcript ? "identical" : "differ") + ", committed golden " +
              (matches_golden ? "matches" : "differs")};
}

double oracle_usage(std::span<const double> x, std::span<const double> c, const UsageHead& h) {
  const std::size_t H = x.size();
  double logit = h.b2[0];
  for (std::size_t r = 0; r < H; ++r) {
    double acc = h.b1[r];
    for (std::size_t k = 0; k < H; ++k) acc += h.w1[r * 2 * H + k] * x[k] + h.w1[r * 2 * H + H + k] * c[k];
    logit += h.w2[r] * std::tanh(acc);
  }
  return 1.0 / (1.0 + std::exp(-logit));
}

Outcome a9_usage(const Trained& t) {
  const BackwardModel& model = *t.engines.backward;
  Prng rng(909);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const CorpusExample& ex = t.split.held_out[rng.below(t.split.held_out.size())];
    const auto src = model.vocab().encode(ex.document.tokens);
    const auto sum = model.vocab().encode(ex.summary_tokens);
    const Tensor X = model.contextualize(src);
    const Tensor Y = model.contextualize(sum);
    const std::size_t H = X.shape()[1];
    const std::size_t i = rng.below(src.size());
    // Attention and context by plain loops.
    std::vector<double> a(Y.shape()[0]);
    for (std::size_t k = 0; k < a.size(); ++k) {
      for (std::size_t d = 0; d < H; ++d) a[k] += X[i * H + d] * Y[k * H + d];
    }
    const double mx = *std::max_element(a.begin(), a.end());
    double z = 0.0;
    for (auto& v : a) z += (v = std::exp(v - mx));
    std::vector<double> c(H, 0.0), x(H);
    for (std::size_t d = 0; d < H; ++d) {
      x[d] = X[i * H + d];
      for (std::size_t k = 0; k < a.size(); ++k) c[d] += a[k] / z * Y[k * H + d];
    }
    const double expected = oracle_usage(x, c, model.head());
    const double got = model.attribute(ex.document, ex.summary_tokens).usage_probs[i];
    Tensor xt = Tensor::vector(x);
    const double direct = usage_prob(xt, context_vector(usage_attention(xt, Y), Y), model.head());
    worst = std::max({worst, std::abs(got - expected), std::abs(direct - expected)});
  }
  return {worst <= 1e-12, "max |usage_prob - formula| " + fmt(worst) + " over 1000 draws"};
}

}  // namespace

int main() {
  std::cerr << "training the A4 models (2000 examples, hidden 32, 20 epochs)" << std::endl;
  const Trained trained = train_synthetic();

  report("A1", "masking exactness", 120, [&] { return a1_masking(trained); });
  report("A2", "marginal/posterior exactness", 10, a2_latent);
  report("A3", "gradient fidelity", 120, a3_gradients);
  report("A4", "synthetic training", 0, [&] { return a4_training(trained); });
  report("A5", "steering", 300, [&] { return a5_steering(trained); });
  report("A6", "prefix fidelity", 0, [&] { return a6_prefix(trained); });
  report("A7", "aggregation conservation", 0, [&] { return a7_conservation(trained); });
  report("A8", "determinism", 0, a8_determinism);
  report("A9", "backward-formula fidelity", 0, [&] { return a9_usage(trained); });
  return g_all_pass ? 0 : 1;
}
