#pragma once

#include <span>
#include <string>
#include <vector>

#include "csi/numerics/param_store.hpp"
#include "csi/numerics/prng.hpp"
#include "csi/numerics/tape.hpp"
#include "csi/textproc/vocab.hpp"

namespace csi {

// Single-layer GRU cell with fused gate matrices (reset, update, candidate):
//   r = sigmoid(Wx_r x + bx_r + Wh_r h + bh_r)
//   z = sigmoid(Wx_z x + bx_z + Wh_z h + bh_z)
//   n = tanh(Wx_n x + bx_n + r * (Wh_n h + bh_n))
//   h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell(std::string prefix, std::size_t input_dim, std::size_t hidden_dim);

  void init(ParamStore& store, Prng& rng) const;
  Var step(Tape& tape, const ParamStore& store, Var x, Var h) const;

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }

 private:
  std::string prefix_;
  std::size_t input_dim_;
  std::size_t hidden_dim_;
};

struct EncoderGraph {
  Var states;    // [n, hidden]
  Var states_t;  // [hidden, n]
  Var final;     // [hidden]
  std::vector<TokenId> ids;
};

// Embedding lookup followed by a unidirectional GRU over the tokens.
class Encoder {
 public:
  Encoder(std::string prefix, std::string embedding, std::size_t vocab_size, std::size_t embed_dim,
          std::size_t hidden_dim);

  // Adds the GRU parameters, plus the embedding table when `with_embedding`.
  void init(ParamStore& store, Prng& rng, bool with_embedding = true) const;
  EncoderGraph run(Tape& tape, const ParamStore& store, std::span<const TokenId> ids) const;

  const std::string& embedding_name() const noexcept { return embedding_; }

 private:
  std::string embedding_;
  std::size_t vocab_size_;
  std::size_t embed_dim_;
  GruCell cell_;
};

// Uniform(-1/sqrt(fan), 1/sqrt(fan)) initialisation.
Tensor uniform_init(Prng& rng, Shape shape, std::size_t fan);

}  // namespace csi
