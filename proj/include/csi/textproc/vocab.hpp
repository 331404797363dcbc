#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace csi {

using TokenId = std::uint32_t;

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kEllipsis = 4;
  static constexpr std::size_t kReserved = 5;

  Vocab();

  // Most frequent first, ties broken lexicographically, at most `max_size`
  // entries including the reserved ones. Requires max_size > 5.
  static Vocab build(std::span<const std::vector<std::string>> corpus, std::size_t max_size);
  // Restores a vocabulary from its id-ordered token list.
  static Vocab from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace csi
