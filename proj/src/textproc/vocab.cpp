#include "csi/textproc/vocab.hpp"

#include <algorithm>
#include <map>

#include "csi/numerics/errors.hpp"

namespace csi {

namespace {
const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kTokens = {"<pad>", "<bos>", "<eos>", "<unk>", "..."};
  return kTokens;
}
}  // namespace

Vocab::Vocab() : tokens_(reserved_tokens()) { index(); }

void Vocab::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ContractViolation("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

Vocab Vocab::build(std::span<const std::vector<std::string>> corpus, std::size_t max_size) {
  if (max_size <= kReserved) throw ContractViolation("vocabulary max_size must exceed the reserved ids");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus)
    for (const auto& tok : doc) ++counts[tok];
  for (const auto& r : reserved_tokens()) counts.erase(r);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  for (const auto& [tok, n] : ranked) {
    if (v.tokens_.size() >= max_size) break;
    v.tokens_.push_back(tok);
  }
  v.index();
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < kReserved || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw ContractViolation("vocabulary does not start with the reserved tokens");
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  v.index();
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw ContractViolation("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

}  // namespace csi
