#include "csi/textproc/text.hpp"

#include <stdexcept>

#include "csi/numerics/errors.hpp"

namespace csi {

namespace {

bool is_space(char c) noexcept { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(char c) noexcept {
  switch (c) {
    case '.': case ',': case '!': case '?': case '\'': case '"': case '(': case ')': case ':': case ';':
      return true;
    default:
      return false;
  }
}

char lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_space(c)) {
      flush();
    } else if (c == '.' && text.substr(i, 3) == "...") {
      flush();
      out.emplace_back("...");
      i += 2;
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      word.push_back(lower(c));
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

bool is_terminator(std::string_view token) noexcept { return token == "." || token == "!" || token == "?"; }

std::vector<Span> split_sentences(std::span<const std::string> tokens) {
  std::vector<Span> spans;
  std::size_t start = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_terminator(tokens[i])) {
      spans.push_back({start, i + 1});
      start = i + 1;
    }
  }
  if (start < tokens.size()) spans.push_back({start, tokens.size()});
  return spans;
}

std::size_t Document::sentence_of(std::size_t i) const {
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (sentences[s].contains(i)) return s;
  }
  throw ContractViolation("token position " + std::to_string(i) + " is outside the document");
}

Document make_document(std::string_view text) {
  Document doc;
  doc.raw = std::string(text);
  doc.tokens = tokenize(text);
  doc.sentences = split_sentences(doc.tokens);
  return doc;
}

}  // namespace csi
