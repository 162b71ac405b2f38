#include "hypomimia/nn.hpp"

#include <cmath>

#include "hypomimia/errors.hpp"

namespace hypomimia {

namespace {

Tensor xavier_init(std::size_t in, std::size_t out, SeededRng& rng) {
  Tensor w({in, out});
  double sigma = std::sqrt(2.0 / static_cast<double>(in + out));
  for (double& v : w.data()) v = rng.normal(0.0, sigma);
  return w;
}

}  // namespace

LinearParams make_linear(ParameterStore& store, const std::string& name,
                         std::size_t in, std::size_t out, SeededRng& rng) {
  LinearParams lp;
  lp.w = store.add(name + ".w", xavier_init(in, out, rng));
  lp.b = store.add(name + ".b", Tensor({out}, 0.0));
  return lp;
}

Var linear(Tape& t, TapeBinding& p, const LinearParams& lp, Var x) {
  return t.add_row_broadcast(t.matmul(x, p[lp.w]), p[lp.b]);
}

LayerNormParams make_layer_norm(ParameterStore& store, const std::string& name,
                                std::size_t dim) {
  LayerNormParams np;
  np.gamma = store.add(name + ".gamma", Tensor({dim}, 1.0));
  np.beta = store.add(name + ".beta", Tensor({dim}, 0.0));
  return np;
}

Var layer_norm(Tape& t, TapeBinding& p, const LayerNormParams& np, Var x) {
  return t.layer_norm_rows(x, p[np.gamma], p[np.beta]);
}

AttentionParams make_attention(ParameterStore& store, const std::string& name,
                               std::size_t dim, std::size_t heads, SeededRng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  AttentionParams ap;
  ap.q = make_linear(store, name + ".q", dim, dim, rng);
  ap.k = make_linear(store, name + ".k", dim, dim, rng);
  ap.v = make_linear(store, name + ".v", dim, dim, rng);
  ap.o = make_linear(store, name + ".o", dim, dim, rng);
  ap.heads = heads;
  ap.dim = dim;
  return ap;
}

Var attention(Tape& t, TapeBinding& p, const AttentionParams& ap, Var x) {
  Var q = linear(t, p, ap.q, x);
  Var k = linear(t, p, ap.k, x);
  Var v = linear(t, p, ap.v, x);
  std::size_t dh = ap.dim / ap.heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(ap.heads);
  for (std::size_t h = 0; h < ap.heads; ++h) {
    Var qh = t.slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = t.slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = t.slice_cols(v, h * dh, (h + 1) * dh);
    Var scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  return linear(t, p, ap.o, t.concat_cols(heads));
}

BlockParams make_block(ParameterStore& store, const std::string& name,
                       std::size_t dim, std::size_t heads, SeededRng& rng,
                       std::size_t mlp_ratio) {
  BlockParams bp;
  bp.ln1 = make_layer_norm(store, name + ".ln1", dim);
  bp.attn = make_attention(store, name + ".attn", dim, heads, rng);
  bp.ln2 = make_layer_norm(store, name + ".ln2", dim);
  bp.fc1 = make_linear(store, name + ".fc1", dim, dim * mlp_ratio, rng);
  bp.fc2 = make_linear(store, name + ".fc2", dim * mlp_ratio, dim, rng);
  return bp;
}

Var transformer_block(Tape& t, TapeBinding& p, const BlockParams& bp, Var x) {
  x = t.add(x, attention(t, p, bp.attn, layer_norm(t, p, bp.ln1, x)));
  Var h = t.gelu(linear(t, p, bp.fc1, layer_norm(t, p, bp.ln2, x)));
  return t.add(x, linear(t, p, bp.fc2, h));
}

std::string_view to_string(CellKind kind) {
  return kind == CellKind::LSTM ? "lstm" : "gru";
}

CellKind parse_cell_kind(std::string_view s) {
  if (s == "lstm" || s == "LSTM") return CellKind::LSTM;
  if (s == "gru" || s == "GRU") return CellKind::GRU;
  throw ConfigError("unknown cell kind: " + std::string(s));
}

RnnCellParams make_rnn_cell(ParameterStore& store, const std::string& name,
                            CellKind kind, std::size_t in, std::size_t hidden,
                            SeededRng& rng) {
  RnnCellParams cp;
  cp.kind = kind;
  cp.hidden = hidden;
  std::size_t gates = kind == CellKind::LSTM ? 4 : 3;
  cp.wx = store.add(name + ".wx", xavier_init(in, gates * hidden, rng));
  cp.wh = store.add(name + ".wh", xavier_init(hidden, gates * hidden, rng));
  cp.b = store.add(name + ".b", Tensor({gates * hidden}, 0.0));
  return cp;
}

RnnState rnn_zero_state(Tape& t, const RnnCellParams& cp) {
  RnnState s;
  s.h = t.constant(Tensor({cp.hidden}, 0.0));
  if (cp.kind == CellKind::LSTM) s.c = t.constant(Tensor({cp.hidden}, 0.0));
  return s;
}

RnnState rnn_cell_step(Tape& t, TapeBinding& p, const RnnCellParams& cp, Var x,
                       const RnnState& prev) {
  std::size_t hd = cp.hidden;
  if (cp.kind == CellKind::LSTM) {
    Var z = t.add(t.add(t.matmul(x, p[cp.wx]), t.matmul(prev.h, p[cp.wh])),
                  p[cp.b]);
    Var i = t.sigmoid(t.slice_cols(z, 0, hd));
    Var f = t.sigmoid(t.slice_cols(z, hd, 2 * hd));
    Var g = t.tanh(t.slice_cols(z, 2 * hd, 3 * hd));
    Var o = t.sigmoid(t.slice_cols(z, 3 * hd, 4 * hd));
    RnnState next;
    next.c = t.add(t.mul(f, prev.c), t.mul(i, g));
    next.h = t.mul(o, t.tanh(next.c));
    return next;
  }
  // GRU: the reset gate multiplies the hidden contribution of the
  // candidate, and h' = (1-z) n + z h.
  Var zr = t.add(t.add(t.matmul(x, t.slice_cols(p[cp.wx], 0, 2 * hd)),
                       t.matmul(prev.h, t.slice_cols(p[cp.wh], 0, 2 * hd))),
                 t.slice_cols(p[cp.b], 0, 2 * hd));
  Var z = t.sigmoid(t.slice_cols(zr, 0, hd));
  Var r = t.sigmoid(t.slice_cols(zr, hd, 2 * hd));
  Var n = t.tanh(t.add(
      t.add(t.matmul(x, t.slice_cols(p[cp.wx], 2 * hd, 3 * hd)),
            t.mul(r, t.matmul(prev.h, t.slice_cols(p[cp.wh], 2 * hd, 3 * hd)))),
      t.slice_cols(p[cp.b], 2 * hd, 3 * hd)));
  Var ones = t.constant(Tensor({hd}, 1.0));
  RnnState next;
  next.h = t.add(t.mul(t.sub(ones, z), n), t.mul(z, prev.h));
  return next;
}

}  // namespace hypomimia
