#pragma once

#include <string>

#include "hypomimia/parameters.hpp"
#include "hypomimia/rng.hpp"
#include "hypomimia/tape.hpp"

namespace hypomimia {

/// One training epoch's aggregate loss and accuracy.
struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct LinearParams {
  ParamId w;  // [in x out]
  ParamId b;  // [out]
};

LinearParams make_linear(ParameterStore& store, const std::string& name,
                         std::size_t in, std::size_t out, SeededRng& rng);
Var linear(Tape& t, TapeBinding& p, const LinearParams& lp, Var x);

struct LayerNormParams {
  ParamId gamma;
  ParamId beta;
};

LayerNormParams make_layer_norm(ParameterStore& store, const std::string& name,
                                std::size_t dim);
Var layer_norm(Tape& t, TapeBinding& p, const LayerNormParams& np, Var x);

struct AttentionParams {
  LinearParams q, k, v, o;
  std::size_t heads = 1;
  std::size_t dim = 0;
};

AttentionParams make_attention(ParameterStore& store, const std::string& name,
                               std::size_t dim, std::size_t heads, SeededRng& rng);
// Multi-head self-attention over a [tokens x dim] matrix; output shape
// matches the input.
Var attention(Tape& t, TapeBinding& p, const AttentionParams& ap, Var x);

struct BlockParams {
  LayerNormParams ln1;
  AttentionParams attn;
  LayerNormParams ln2;
  LinearParams fc1, fc2;
};

BlockParams make_block(ParameterStore& store, const std::string& name,
                       std::size_t dim, std::size_t heads, SeededRng& rng,
                       std::size_t mlp_ratio = 4);
// Pre-norm residual block: x + attn(ln(x)), then x + mlp(ln(x)).
Var transformer_block(Tape& t, TapeBinding& p, const BlockParams& bp, Var x);

enum class CellKind { LSTM, GRU };

std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view s);

struct RnnCellParams {
  CellKind kind = CellKind::LSTM;
  std::size_t hidden = 0;
  // LSTM: wx [in x 4h], wh [h x 4h], b [4h], gate order (i, f, g, o).
  // GRU:  wx [in x 3h], wh [h x 3h], b [3h], gate order (z, r, n); the
  //       reset gate scales the hidden contribution inside the candidate.
  ParamId wx, wh, b;
};

RnnCellParams make_rnn_cell(ParameterStore& store, const std::string& name,
                            CellKind kind, std::size_t in, std::size_t hidden,
                            SeededRng& rng);

struct RnnState {
  Var h;  // [hidden]
  Var c;  // [hidden], unused for GRU
};

RnnState rnn_zero_state(Tape& t, const RnnCellParams& cp);
RnnState rnn_cell_step(Tape& t, TapeBinding& p, const RnnCellParams& cp, Var x,
                       const RnnState& prev);

}  // namespace hypomimia
