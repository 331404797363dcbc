#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "csi/textproc/text.hpp"

namespace csi {

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& what) : std::runtime_error(what) {}
};

// Word inventories for the synthetic generator. Topic words, fillers and
// keywords are drawn from disjoint procedurally named sets.
struct VocabSpec {
  std::size_t topics = 40;
  std::size_t fillers = 60;
  std::size_t keywords = 60;
  std::size_t min_fillers = 2;
  std::size_t max_fillers = 4;
};

struct CorpusExample {
  Document document;
  std::vector<std::string> summary_tokens;
  std::vector<int> gold_tags;
  std::vector<std::size_t> important_sentences;
  // Source position each summary token was copied from, if any.
  std::vector<std::optional<std::size_t>> copied_from;
};

std::vector<std::string> topic_words(std::size_t count);
std::vector<std::string> filler_words(std::size_t count);
std::vector<std::string> keyword_words(std::size_t count);

// Example i is drawn from its own stream seeded with base_seed + i. Each
// sentence is "<topic> <filler...> <keyword> ."; ceil(n/2) sentences are
// important and contribute "<topic> says <keyword> ." to the summary.
std::vector<CorpusExample> generate_synthetic_corpus(std::uint64_t base_seed, std::size_t n_examples,
                                                     std::size_t sentences_per_doc, const VocabSpec& spec = {});

// JSON Lines: {"document": str, "summary": str, "tags": [0|1, ...]}.
void write_corpus(std::ostream& out, const std::vector<CorpusExample>& examples);
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusExample>& examples);
std::vector<CorpusExample> read_corpus(std::istream& in);
std::vector<CorpusExample> read_corpus(const std::filesystem::path& path);

struct CorpusSplit {
  std::vector<CorpusExample> train;
  std::vector<CorpusExample> held_out;
};

// First 90% of examples (by index) train, the rest are held out.
CorpusSplit split_corpus(std::vector<CorpusExample> examples);

}  // namespace csi
