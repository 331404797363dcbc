#include "csi/textproc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csi/numerics/prng.hpp"

namespace csi {

namespace {

constexpr const char* kConsonants[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
constexpr std::size_t kC = std::size(kConsonants);
constexpr std::size_t kV = std::size(kVowels);

// Disjoint by suffix: topics end in "an", keywords in "ix", fillers in "l" + vowel.
std::string cvc_word(std::size_t i, const char* suffix) {
  return std::string(kConsonants[i % kC]) + kVowels[(i / kC) % kV] + kConsonants[(i / (kC * kV)) % kC] + suffix;
}

std::vector<std::string> make_words(std::size_t count, std::size_t capacity, auto make) {
  if (count > capacity) throw CorpusError("requested more synthetic words than the inventory holds");
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make(i));
  return out;
}

// First `k` entries of a Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> choose(Prng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

CorpusExample generate_one(std::uint64_t seed, std::size_t n_sentences, const VocabSpec& spec,
                           const std::vector<std::string>& topics, const std::vector<std::string>& fillers,
                           const std::vector<std::string>& keywords) {
  Prng rng(seed);
  const auto topic_idx = choose(rng, topics.size(), n_sentences);
  const auto keyword_idx = choose(rng, keywords.size(), n_sentences);

  CorpusExample ex;
  std::vector<std::size_t> topic_pos(n_sentences), keyword_pos(n_sentences);
  for (std::size_t s = 0; s < n_sentences; ++s) {
    const std::size_t start = ex.document.tokens.size();
    topic_pos[s] = start;
    ex.document.tokens.push_back(topics[topic_idx[s]]);
    const std::size_t n_fill = spec.min_fillers + rng.below(spec.max_fillers - spec.min_fillers + 1);
    for (std::size_t f = 0; f < n_fill; ++f) ex.document.tokens.push_back(fillers[rng.below(fillers.size())]);
    keyword_pos[s] = ex.document.tokens.size();
    ex.document.tokens.push_back(keywords[keyword_idx[s]]);
    ex.document.tokens.emplace_back(".");
    ex.document.sentences.push_back({start, ex.document.tokens.size()});
  }
  ex.document.raw = detokenize(ex.document.tokens);

  ex.important_sentences = choose(rng, n_sentences, (n_sentences + 1) / 2);
  std::sort(ex.important_sentences.begin(), ex.important_sentences.end());

  ex.gold_tags.assign(ex.document.tokens.size(), 0);
  for (std::size_t s : ex.important_sentences) {
    ex.gold_tags[topic_pos[s]] = 1;
    ex.gold_tags[keyword_pos[s]] = 1;
    ex.summary_tokens.insert(ex.summary_tokens.end(),
                             {ex.document.tokens[topic_pos[s]], "says", ex.document.tokens[keyword_pos[s]], "."});
    ex.copied_from.insert(ex.copied_from.end(), {topic_pos[s], std::nullopt, keyword_pos[s], std::nullopt});
  }
  return ex;
}

}  // namespace

std::vector<std::string> topic_words(std::size_t count) {
  return make_words(count, kC * kV * kC, [](std::size_t i) { return cvc_word(i, "an"); });
}

std::vector<std::string> keyword_words(std::size_t count) {
  return make_words(count, kC * kV * kC, [](std::size_t i) { return cvc_word(i, "ix"); });
}

std::vector<std::string> filler_words(std::size_t count) {
  return make_words(count, kC * kV * kV, [](std::size_t i) {
    return std::string(kConsonants[i % kC]) + kVowels[(i / kC) % kV] + "l" + kVowels[(i / (kC * kV)) % kV];
  });
}

std::vector<CorpusExample> generate_synthetic_corpus(std::uint64_t base_seed, std::size_t n_examples,
                                                     std::size_t sentences_per_doc, const VocabSpec& spec) {
  if (sentences_per_doc < 2) throw CorpusError("synthetic documents need at least 2 sentences");
  if (spec.topics < sentences_per_doc || spec.keywords < sentences_per_doc) {
    throw CorpusError("vocab spec too small to supply " + std::to_string(sentences_per_doc) +
                      " distinct topic words and keywords per document");
  }
  if (spec.fillers == 0 || spec.min_fillers > spec.max_fillers) throw CorpusError("invalid filler configuration");

  const auto topics = topic_words(spec.topics);
  const auto fillers = filler_words(spec.fillers);
  const auto keywords = keyword_words(spec.keywords);

  std::vector<CorpusExample> out;
  out.reserve(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) {
    out.push_back(generate_one(base_seed + i, sentences_per_doc, spec, topics, fillers, keywords));
  }
  return out;
}

void write_corpus(std::ostream& out, const std::vector<CorpusExample>& examples) {
  for (const auto& ex : examples) {
    nlohmann::ordered_json line;
    line["document"] = detokenize(ex.document.tokens);
    line["summary"] = detokenize(ex.summary_tokens);
    line["tags"] = ex.gold_tags;
    out << line.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const std::vector<CorpusExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus file: " + path.string());
  write_corpus(out, examples);
}

std::vector<CorpusExample> read_corpus(std::istream& in) {
  std::vector<CorpusExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusExample ex;
      ex.document = make_document(j.at("document").get<std::string>());
      ex.summary_tokens = tokenize(j.at("summary").get<std::string>());
      ex.gold_tags = j.at("tags").get<std::vector<int>>();
      if (ex.gold_tags.size() != ex.document.tokens.size()) {
        throw CorpusError("tag count does not match document token count");
      }
      for (std::size_t s = 0; s < ex.document.sentences.size(); ++s) {
        const Span sp = ex.document.sentences[s];
        if (std::any_of(ex.gold_tags.begin() + sp.start, ex.gold_tags.begin() + sp.end, [](int t) { return t != 0; })) {
          ex.important_sentences.push_back(s);
        }
      }
      ex.copied_from.assign(ex.summary_tokens.size(), std::nullopt);
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw CorpusError("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CorpusExample> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file: " + path.string());
  return read_corpus(in);
}

CorpusSplit split_corpus(std::vector<CorpusExample> examples) {
  const std::size_t n_train = examples.size() * 9 / 10;
  CorpusSplit split;
  split.train.assign(std::make_move_iterator(examples.begin()), std::make_move_iterator(examples.begin() + n_train));
  split.held_out.assign(std::make_move_iterator(examples.begin() + n_train), std::make_move_iterator(examples.end()));
  return split;
}

}  // namespace csi
