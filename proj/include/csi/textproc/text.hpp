#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace csi {

// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  bool contains(std::size_t i) const noexcept { return i >= start && i < end; }
  friend bool operator==(const Span&, const Span&) = default;
};

// Lowercases ASCII, splits on whitespace and detaches . , ! ? ' " ( ) : ;
// as single-character tokens, keeping "..." as one token.
std::vector<std::string> tokenize(std::string_view text);

// Joins tokens with single spaces.
std::string detokenize(std::span<const std::string> tokens);

bool is_terminator(std::string_view token) noexcept;

// A sentence ends after each ".", "!" or "?"; trailing tokens without a
// terminator form a final sentence.
std::vector<Span> split_sentences(std::span<const std::string> tokens);

struct Document {
  std::string raw;
  std::vector<std::string> tokens;
  std::vector<Span> sentences;

  std::size_t sentence_count() const noexcept { return sentences.size(); }
  // Index of the sentence holding token position `i`.
  std::size_t sentence_of(std::size_t i) const;
};

Document make_document(std::string_view text);

}  // namespace csi
