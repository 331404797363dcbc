#include "csi/model/encoder.hpp"

#include <cmath>

#include "csi/numerics/errors.hpp"

namespace csi {

Tensor uniform_init(Prng& rng, Shape shape, std::size_t fan) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

GruCell::GruCell(std::string prefix, std::size_t input_dim, std::size_t hidden_dim)
    : prefix_(std::move(prefix)), input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ContractViolation("GRU dimensions must be positive");
}

void GruCell::init(ParamStore& store, Prng& rng) const {
  const std::size_t h3 = 3 * hidden_dim_;
  store.add(prefix_ + ".wx", uniform_init(rng, {h3, input_dim_}, hidden_dim_));
  store.add(prefix_ + ".wh", uniform_init(rng, {h3, hidden_dim_}, hidden_dim_));
  store.add(prefix_ + ".bx", uniform_init(rng, {h3}, hidden_dim_));
  store.add(prefix_ + ".bh", uniform_init(rng, {h3}, hidden_dim_));
}

Var GruCell::step(Tape& tape, const ParamStore& store, Var x, Var h) const {
  using namespace ad;
  const std::size_t H = hidden_dim_;
  Var gx = matmul(tape.param(store, prefix_ + ".wx"), x) + tape.param(store, prefix_ + ".bx");
  Var gh = matmul(tape.param(store, prefix_ + ".wh"), h) + tape.param(store, prefix_ + ".bh");
  Var r = sigmoid(slice(gx, 0, H) + slice(gh, 0, H));
  Var z = sigmoid(slice(gx, H, H) + slice(gh, H, H));
  Var n = ad::tanh(slice(gx, 2 * H, H) + r * slice(gh, 2 * H, H));
  return n + z * (h - n);
}

Encoder::Encoder(std::string prefix, std::string embedding, std::size_t vocab_size, std::size_t embed_dim,
                 std::size_t hidden_dim)
    : embedding_(std::move(embedding)),
      vocab_size_(vocab_size),
      embed_dim_(embed_dim),
      cell_(std::move(prefix) + ".gru", embed_dim, hidden_dim) {}

void Encoder::init(ParamStore& store, Prng& rng, bool with_embedding) const {
  if (with_embedding) {
    Tensor table({vocab_size_, embed_dim_});
    for (std::size_t i = 0; i < table.size(); ++i) table[i] = 0.1 * rng.gaussian();
    store.add(embedding_, std::move(table));
  }
  cell_.init(store, rng);
}

EncoderGraph Encoder::run(Tape& tape, const ParamStore& store, std::span<const TokenId> ids) const {
  if (ids.empty()) throw ContractViolation("cannot encode an empty token sequence");
  Var table = tape.param(store, embedding_);
  Var h = tape.constant(Tensor({cell_.hidden_dim()}));
  std::vector<Var> rows;
  rows.reserve(ids.size());
  for (TokenId id : ids) {
    h = cell_.step(tape, store, ad::embedding(table, id), h);
    rows.push_back(h);
  }
  EncoderGraph g;
  g.states = ad::stack(rows);
  g.states_t = ad::transpose(g.states);
  g.final = h;
  g.ids.assign(ids.begin(), ids.end());
  return g;
}

}  // namespace csi
