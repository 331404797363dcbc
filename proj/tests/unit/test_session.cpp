#include <doctest.h>

#include <numeric>

#include "csi/numerics/errors.hpp"
#include "csi/session/session.hpp"
#include "csi/textproc/corpus.hpp"
#include "test_util.hpp"

using namespace csi;

namespace {

struct Models {
  Engines engines;
  std::vector<CorpusExample> corpus;
};

const Models& models() {
  static const Models m = [] {
    Models out;
    out.corpus = generate_synthetic_corpus(21, 30, 4);
    std::vector<std::vector<std::string>> texts;
    for (const auto& ex : out.corpus) texts.push_back(ex.document.tokens);
    const Vocab vocab = Vocab::build(texts, 400);
    ModelConfig mc;
    mc.embed_dim = 6;
    mc.hidden_dim = 6;
    mc.max_tokens_per_sentence = 6;
    BackwardConfig bc;
    bc.embed_dim = 6;
    bc.hidden_dim = 6;
    ForwardModel forward = ForwardModel::initialize(mc, vocab, 1);
    // Untrained weights stop after one token; suppress terminators and copying so sentences fill the budget.
    forward.params().value("switch.b")[0] = 50.0;
    for (TokenId id = 0; id < vocab.size(); ++id) {
      if (is_terminator(vocab.token(id))) forward.params().value("out.b")[id] = -20.0;
    }
    out.engines.forward = std::make_shared<const ForwardModel>(std::move(forward));
    out.engines.backward = std::make_shared<const BackwardModel>(BackwardModel::initialize(bc, vocab, 2));
    return out;
  }();
  return m;
}

Session fresh(std::size_t doc = 0) { return Session("s1", models().corpus[doc].document, models().engines); }

ForwardRequest init_with(std::size_t n) {
  ForwardRequest r;
  r.n_sentences = n;
  return r;
}

ForwardRequest add_one() {
  ForwardRequest r;
  r.mode = GenerationMode::AddSentence;
  return r;
}

std::size_t count_kind(const Session& s, EventKind k) {
  return static_cast<std::size_t>(std::count_if(s.history().begin(), s.history().end(),
                                                [&](const HistoryEvent& e) { return e.kind == k; }));
}

double matrix_total(const std::vector<std::vector<double>>& m) {
  double t = 0.0;
  for (const auto& row : m) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

}  // namespace

TEST_CASE("selection complement and errors") {
  Session s("s1", make_document("a b . c d . e f ."), models().engines);
  CHECK(s.selection() == std::set<std::size_t>{0, 1, 2});
  s.set_selection({0, 1});
  CHECK(s.deselected_positions() == std::vector<std::size_t>{6, 7, 8});
  s.set_selection({});
  CHECK(s.deselected_positions().size() == 9);

  const std::size_t before = s.history().size();
  s.set_selection({1});
  const auto once = s.to_json();
  s.set_selection({1});
  CHECK(s.history().size() == before + 2);
  CHECK(s.selection() == std::set<std::size_t>{1});
  CHECK(s.to_json()["selection"] == once["selection"]);

  CHECK_THROWS_AS(s.set_selection({3}), ContractViolation);
  CHECK(s.selection() == std::set<std::size_t>{1});
  CHECK(s.history().size() == before + 2);
}

TEST_CASE("selection templates") {
  Session s = fresh();
  CHECK_THROWS_AS(s.select_template(SelectionTemplate::Match), NoBackwardResult);
  s.select_template(SelectionTemplate::All);
  s.select_template(SelectionTemplate::None);
  CHECK(s.selection().empty());
  s.select_template(SelectionTemplate::All);
  s.run_forward(init_with(2));
  REQUIRE(s.coverage());
  s.select_template(SelectionTemplate::Match);
  const std::set<std::size_t> covered(s.coverage()->covered_sentences.begin(), s.coverage()->covered_sentences.end());
  CHECK(s.selection() == covered);
  s.select_template(SelectionTemplate::Match);
  CHECK(s.selection() == covered);
  CHECK(parse_template("match") == SelectionTemplate::Match);
  CHECK_THROWS_AS(parse_template("some"), ContractViolation);
}

TEST_CASE("word-level selection needs aggregation off") {
  Session s("s1", make_document("a b . c d ."), models().engines);
  CHECK_THROWS_AS(s.set_word_selection({0}), ContractViolation);
  s.set_aggregation(false);
  s.set_word_selection({0, 1, 2, 4});
  CHECK(s.deselected_positions() == std::vector<std::size_t>{3, 5});
  CHECK(s.selection() == std::set<std::size_t>{0});
  CHECK_THROWS_AS(s.set_word_selection({6}), ContractViolation);
  s.set_aggregation(true);
  CHECK_FALSE(s.word_selection());
  CHECK(s.deselected_positions() == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("init_with then add_sentence") {
  Session s = fresh(1);
  s.run_forward(init_with(3));
  REQUIRE(s.summary().size() == 3);
  for (const auto& sent : s.summary()) CHECK(sent.origin == Origin::Model);
  CHECK(s.coverage());
  CHECK(s.history().back().kind == EventKind::Backward);
  CHECK(s.settled());

  Session t = fresh(1);
  t.run_forward(init_with(2));
  const auto before = t.summary();
  t.run_forward(add_one());
  REQUIRE(t.summary().size() == 3);
  CHECK(t.summary()[0].tokens == before[0].tokens);
  CHECK(t.summary()[1].tokens == before[1].tokens);
  // Greedy continuation of the same prefix.
  CHECK(t.summary()[2].tokens == s.summary()[2].tokens);
  CHECK(t.settled());
}

TEST_CASE("aggregated matrix conserves attention mass") {
  Session s = fresh(2);
  s.run_forward(init_with(3));
  const auto& m = s.aggregated();
  REQUIRE(m.size() == s.document().sentence_count());
  for (std::size_t o = 0; o < s.summary().size(); ++o) {
    double col = 0.0;
    for (const auto& row : m) col += row[o];
    CHECK(std::abs(col - static_cast<double>(s.summary()[o].tokens.size())) < 1e-9);
  }
  CHECK(std::abs(matrix_total(m) - static_cast<double>(s.last_trace()->size())) < 1e-9);
}

TEST_CASE("aggregate_attention") {
  const std::vector<SessionTraceRow> one = {{0, 0, "x", {0.3, 0.7}, {}, false}};
  const std::vector<Span> spans = {{0, 1}, {1, 2}};
  CHECK(aggregate_attention(one, spans, 1) == std::vector<std::vector<double>>{{0.3}, {0.7}});

  Prng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    const std::size_t m = 1 + rng.below(4);
    std::vector<SessionTraceRow> trace(1 + rng.below(20));
    for (auto& row : trace) {
      row.sentence = rng.below(m);
      row.attention.resize(n);
      double z = 0.0;
      for (auto& a : row.attention) z += (a = rng.uniform());
      for (auto& a : row.attention) a /= z;
    }
    std::vector<Span> cut;
    for (std::size_t start = 0; start < n;) {
      const std::size_t end = std::min(n, start + 1 + rng.below(4));
      cut.push_back({start, end});
      start = end;
    }
    const auto sentence_level = aggregate_attention(trace, cut, m);
    const auto word_level = word_attention(trace, n, m);
    CHECK(std::abs(matrix_total(sentence_level) - matrix_total(word_level)) < 1e-12);
    CHECK(std::abs(matrix_total(sentence_level) - static_cast<double>(trace.size())) < 1e-9);
  }
}

TEST_CASE("delete and edit re-run the backward pass once") {
  Session s = fresh(3);
  s.run_forward(init_with(1));
  s.delete_sentence(0);
  CHECK(s.summary().empty());
  REQUIRE(s.coverage());
  CHECK(s.coverage()->empty_summary);
  CHECK(s.aggregated()[0].empty());
  CHECK_THROWS_AS(s.delete_sentence(0), ContractViolation);

  Session t = fresh(3);
  t.run_forward(init_with(2));
  const std::size_t backward_before = count_kind(t, EventKind::Backward);
  std::vector<std::string> tokens = t.summary()[0].tokens;
  tokens[1] = "was";
  t.edit_sentence(0, detokenize(tokens));
  CHECK(count_kind(t, EventKind::Backward) == backward_before + 1);
  CHECK(t.history()[t.history().size() - 2].kind == EventKind::Edit);
  CHECK(t.summary()[0].tokens == tokens);
  CHECK(t.summary()[0].origin == Origin::Mixed);
  for (const auto& row : *t.last_trace()) {
    if (row.sentence == 0) CHECK(row.index != 1);
  }
  CHECK(t.settled());

  const auto same = t.summary()[1];
  t.edit_sentence(1, detokenize(same.tokens));
  CHECK(t.summary()[1].origin == Origin::Model);

  t.edit_sentence(1, "zzz yyy xxx .");
  CHECK(t.summary()[1].origin == Origin::User);
  CHECK_THROWS_AS(t.edit_sentence(5, "a ."), ContractViolation);
  CHECK_THROWS_AS(t.edit_sentence(0, "   "), ContractViolation);
}

TEST_CASE("an edit that splits a sentence re-segments the summary") {
  Session s = fresh(4);
  s.run_forward(init_with(2));
  const auto first = s.summary()[0].tokens;
  const auto second = s.summary()[1].tokens;
  std::vector<std::string> split(first.begin(), first.end());
  if (!is_terminator(split.back())) split.push_back(".");
  split.push_back("extra");
  split.push_back(".");
  s.edit_sentence(0, detokenize(split));
  REQUIRE(s.summary().size() == 3);
  CHECK(s.summary()[2].tokens == second);
  CHECK(s.aggregated()[0].size() == 3);
  for (const auto& row : *s.last_trace()) CHECK(s.summary()[row.sentence].tokens[row.index] == row.token);
  CHECK(std::abs(matrix_total(s.aggregated()) - static_cast<double>(s.last_trace()->size())) < 1e-9);
}

TEST_CASE("only forward and edit change summary text") {
  Session s = fresh(5);
  auto text = [&] { return s.to_json()["summary"].dump(); };
  s.run_forward(init_with(2));
  std::string last = text();
  s.select_template(SelectionTemplate::Match);
  CHECK(text() == last);
  s.set_selection({0});
  CHECK(text() == last);
  s.set_aggregation(false);
  CHECK(text() == last);
  s.set_aggregation(true);
  s.run_forward(add_one());
  CHECK(text() != last);
  CHECK(s.settled());
}

TEST_CASE("complete keeps user words verbatim") {
  Session s = fresh(6);
  s.run_forward(init_with(1));
  ForwardRequest r;
  r.mode = GenerationMode::Complete;
  r.prefix = {"the", "water", "is"};
  s.run_forward(r);
  REQUIRE(s.summary().size() == 2);
  const auto& last = s.summary()[1];
  CHECK(std::vector<std::string>(last.tokens.begin(), last.tokens.begin() + 3) == r.prefix);
  CHECK(last.origin == Origin::Mixed);
}

TEST_CASE("session JSON carries the documented fields") {
  Session s = fresh(7);
  s.run_forward(init_with(2));
  const auto j = s.to_json();
  for (const char* key : {"id", "document", "selection", "summary", "coverage", "aggregated", "history"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j["document"].contains("tokens"));
  CHECK(j["document"]["sentences"][0].size() == 2);
  CHECK(j["summary"][0].contains("origin"));
  for (const char* key : {"usage_probs", "covered_words", "covered_sentences", "threshold"}) {
    CHECK(j["coverage"].contains(key));
  }
  CHECK(j["history"][0]["event"] == "CREATE");
  CHECK(s.to_json().dump() == j.dump());
}

TEST_CASE("a rejected request leaves the session untouched") {
  Session s = fresh(8);
  s.run_forward(init_with(1));
  const std::string before = s.to_json().dump();
  CHECK_THROWS_AS(s.run_forward(init_with(0)), ContractViolation);
  CHECK_THROWS_AS(s.edit_sentence(3, "a ."), ContractViolation);
  CHECK_THROWS_AS(s.set_selection({99}), ContractViolation);
  CHECK_THROWS_AS(s.set_word_selection({0}), ContractViolation);
  CHECK(s.to_json().dump() == before);
}
