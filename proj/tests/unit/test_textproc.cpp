#include <doctest.h>

#include <set>
#include <sstream>

#include "csi/numerics/prng.hpp"
#include "csi/textproc/corpus.hpp"
#include "csi/textproc/text.hpp"
#include "csi/textproc/vocab.hpp"
#include "test_util.hpp"

using namespace csi;
using Tokens = std::vector<std::string>;

TEST_CASE("tokenize detaches punctuation and lowercases") {
  CHECK(tokenize("Hello, world.") == Tokens{"hello", ",", "world", "."});
  CHECK(tokenize("The water is ...") == Tokens{"the", "water", "is", "..."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  \t\n ").empty());
  CHECK(tokenize("Earth's (red) planet: \"Mars\"; ok?!") ==
        Tokens{"earth", "'", "s", "(", "red", ")", "planet", ":", "\"", "mars", "\"", ";", "ok", "?", "!"});
  CHECK(tokenize("wait....") == Tokens{"wait", "...", "."});
}

TEST_CASE("split_sentences on terminators") {
  CHECK(split_sentences(Tokens{"a", ".", "b", "."}) == std::vector<Span>{{0, 2}, {2, 4}});
  CHECK(split_sentences(Tokens{"a", "b"}) == std::vector<Span>{{0, 2}});
  CHECK(split_sentences(Tokens{"x", "?", "y", "!", "z"}) == std::vector<Span>{{0, 2}, {2, 4}, {4, 5}});
  CHECK(split_sentences(Tokens{}).empty());
  CHECK(split_sentences(Tokens{"a", "..."}) == std::vector<Span>{{0, 2}});
}

TEST_CASE("tokenize after detokenize is idempotent") {
  Prng rng(5);
  const std::vector<std::string> alphabet = {"A", "b", ".", ",", "...", "?", "'", "x.y", "Hi!", "(", "z"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const std::size_t n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      text += alphabet[rng.below(alphabet.size())];
      if (rng.uniform() < 0.6) text += ' ';
    }
    const Tokens once = tokenize(text);
    CHECK(tokenize(detokenize(once)) == once);
  }
}

TEST_CASE("vocab orders by frequency then lexicographically") {
  const std::vector<Tokens> corpus1 = {tokenize("a a b")};
  const Vocab v1 = Vocab::build(corpus1, 10);
  CHECK(v1.id("a") == 5);
  CHECK(v1.id("b") == 6);

  const std::vector<Tokens> corpus2 = {tokenize("b b a a")};
  const Vocab v2 = Vocab::build(corpus2, 10);
  CHECK(v2.id("a") == 5);
  CHECK(v2.id("b") == 6);

  const std::vector<Tokens> corpus3 = {tokenize("c c c b b a")};
  const Vocab v3 = Vocab::build(corpus3, 7);
  CHECK(v3.size() == 7);
  CHECK(v3.id("c") == 5);
  CHECK(v3.id("b") == 6);
  CHECK(v3.id("a") == Vocab::kUnk);

  CHECK(v1.token(Vocab::kEllipsis) == "...");
  CHECK(v1.id("...") == Vocab::kEllipsis);
  CHECK_THROWS(Vocab::build(corpus1, 5));
  CHECK(Vocab::from_tokens(v3.tokens()) == v3);
  CHECK_THROWS(Vocab::from_tokens({"a", "b"}));
}

TEST_CASE("synthetic corpus matches the recorded fixture") {
  const auto examples = generate_synthetic_corpus(7, 1, 2);
  std::ostringstream out;
  write_corpus(out, examples);
  std::string diag;
  CHECK_MESSAGE(testing::matches_golden("corpus_seed7.jsonl", out.str(), &diag), diag);

  std::ostringstream again;
  write_corpus(again, generate_synthetic_corpus(7, 1, 2));
  CHECK(again.str() == out.str());
}

TEST_CASE("synthetic corpus invariants") {
  for (std::size_t n_sent : {2u, 3u, 4u, 6u}) {
    const auto examples = generate_synthetic_corpus(100 + n_sent, 50, n_sent);
    for (const auto& ex : examples) {
      const std::size_t important = (n_sent + 1) / 2;
      CHECK(ex.important_sentences.size() == important);
      CHECK(ex.document.sentence_count() == n_sent);
      CHECK(ex.gold_tags.size() == ex.document.tokens.size());
      int tag_sum = 0;
      for (int t : ex.gold_tags) tag_sum += t;
      CHECK(tag_sum == static_cast<int>(2 * important));
      CHECK(ex.summary_tokens.size() == 4 * important);
      for (std::size_t k = 0; k < ex.summary_tokens.size(); ++k) {
        if (!ex.copied_from[k]) continue;
        const std::size_t pos = *ex.copied_from[k];
        CHECK(ex.document.tokens[pos] == ex.summary_tokens[k]);
        CHECK(ex.gold_tags[pos] == 1);
      }
      CHECK(split_sentences(ex.document.tokens) == ex.document.sentences);
    }
  }
}

TEST_CASE("sentence spans partition every generated document") {
  Prng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_sent = 2 + rng.below(5);
    const auto ex = generate_synthetic_corpus(rng.next_u64(), 1, n_sent)[0];
    const auto spans = split_sentences(ex.document.tokens);
    std::size_t expect = 0;
    for (const Span& s : spans) {
      CHECK(s.start == expect);
      CHECK(s.end > s.start);
      expect = s.end;
    }
    CHECK(expect == ex.document.tokens.size());
  }
}

TEST_CASE("vocab spec too small is an error") {
  VocabSpec spec;
  spec.keywords = 3;
  CHECK_THROWS_AS(generate_synthetic_corpus(0, 1, 4, spec), CorpusError);
  CHECK_THROWS_AS(generate_synthetic_corpus(0, 1, 1), CorpusError);
}

TEST_CASE("word inventories are disjoint") {
  std::set<std::string> all;
  for (const auto& w : topic_words(200)) all.insert(w);
  for (const auto& w : keyword_words(200)) all.insert(w);
  for (const auto& w : filler_words(200)) all.insert(w);
  CHECK(all.size() == 600);
  CHECK(all.count("says") == 0);
}

TEST_CASE("corpus file round trip and split") {
  const auto examples = generate_synthetic_corpus(3, 20, 4);
  std::stringstream buf;
  write_corpus(buf, examples);
  const auto back = read_corpus(buf);
  REQUIRE(back.size() == examples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].document.tokens == examples[i].document.tokens);
    CHECK(back[i].summary_tokens == examples[i].summary_tokens);
    CHECK(back[i].gold_tags == examples[i].gold_tags);
    CHECK(back[i].important_sentences == examples[i].important_sentences);
  }
  const auto split = split_corpus(back);
  CHECK(split.train.size() == 18);
  CHECK(split.held_out.size() == 2);

  std::stringstream bad("{\"document\": \"a b .\", \"summary\": \"a\", \"tags\": [1]}\n");
  CHECK_THROWS_AS(read_corpus(bad), CorpusError);
}
