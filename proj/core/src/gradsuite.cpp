#include "hypomimia/gradsuite.hpp"

#include <cmath>

#include "hypomimia/classifier.hpp"
#include "hypomimia/expression_model.hpp"
#include "hypomimia/gradcheck.hpp"
#include "hypomimia/nn.hpp"
#include "hypomimia/parameters.hpp"
#include "hypomimia/rng.hpp"
#include "hypomimia/tape.hpp"

namespace hypomimia {

namespace {

constexpr double kEpsilon = 1e-5;
constexpr double kThreshold = 1e-4;

Tensor random_tensor(std::vector<std::size_t> shape, SeededRng& rng,
                     double sigma = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, sigma);
  return t;
}

// Runs one forward/backward for the analytic gradients, then compares
// against finite differences of the same graph builder.
template <typename BuildLoss>
GradSuiteEntry check_store(std::string name, ParameterStore& store,
                           std::span<const ParamId> params, BuildLoss build) {
  {
    Tape t;
    TapeBinding p(t, store);
    Var loss = build(t, p);
    store.zero_grads();
    t.backward(loss);
    p.accumulate_grads();
  }
  auto loss_fn = [&]() {
    Tape t;
    TapeBinding p(t, static_cast<const ParameterStore&>(store));
    return t.value(build(t, p))[0];
  };
  GradCheckResult result = gradient_check(store, params, loss_fn, kEpsilon);
  GradSuiteEntry entry;
  entry.name = std::move(name);
  entry.max_rel_error = result.max_rel_error;
  entry.threshold = kThreshold;
  entry.pass = result.max_rel_error <= kThreshold;
  return entry;
}

template <typename BuildLoss>
GradSuiteEntry check_all(std::string name, ParameterStore& store, BuildLoss build) {
  std::vector<ParamId> params = store.all();
  return check_store(std::move(name), store, params, build);
}

// Mean of squares: a curvature-bearing scalar readout for stage checks.
Var squared_readout(Tape& t, Var y) { return t.mean_all(t.mul(y, y)); }

GradSuiteEntry check_patch_embedding() {
  SeededRng rng(101);
  ParameterStore store;
  LinearParams lp = make_linear(store, "patch_embed", 4, 8, rng);
  Tensor patches = random_tensor({4, 4}, rng);
  return check_all("patch_embedding", store, [&](Tape& t, TapeBinding& p) {
    return squared_readout(t, linear(t, p, lp, t.constant(patches)));
  });
}

GradSuiteEntry check_vit_block() {
  SeededRng rng(102);
  ParameterStore store;
  BlockParams bp = make_block(store, "block", 8, 2, rng);
  Tensor tokens = random_tensor({3, 8}, rng);
  return check_all("vit_block", store, [&](Tape& t, TapeBinding& p) {
    return squared_readout(t, transformer_block(t, p, bp, t.constant(tokens)));
  });
}

GradSuiteEntry check_mhsa_gate() {
  SeededRng rng(103);
  ParameterStore store;
  AttentionParams ap = make_attention(store, "gate", 8, 2, rng);
  Tensor tokens = random_tensor({3, 8}, rng);
  return check_all("mhsa_gate", store, [&](Tape& t, TapeBinding& p) {
    Var a = t.constant(tokens);
    Var gated = t.mul(a, t.sigmoid(attention(t, p, ap, a)));
    return squared_readout(t, t.mean_rows(gated));
  });
}

GradSuiteEntry check_temporal_encoder() {
  SeededRng rng(104);
  ParameterStore store;
  ParamId pos = store.add("pos", random_tensor({3, 8}, rng, 0.02));
  BlockParams bp = make_block(store, "block", 8, 2, rng);
  Tensor features = random_tensor({3, 8}, rng);
  return check_all("temporal_encoder", store, [&](Tape& t, TapeBinding& p) {
    Var x = t.add(t.constant(features), p[pos]);
    return squared_readout(t, t.mean_rows(transformer_block(t, p, bp, x)));
  });
}

ExpressionModel tiny_model(bool learnable_tau) {
  ExpressionModelConfig config;
  config.frames = 2;
  config.image_size = 8;
  config.channels = 1;
  config.patch_size = 4;
  config.embed_dim = 8;
  config.vit_depth = 1;
  config.mhsa_heads = 2;
  config.temporal_depth = 1;
  config.text_depth = 1;
  config.vocab = 48;
  config.max_text_len = 16;
  config.n_ctx = 2;
  config.tau = 0.5;
  config.learnable_tau = learnable_tau;
  return ExpressionModel(config, default_prompts(), 105);
}

GradSuiteEntry check_text_encoder() {
  ExpressionModel model = tiny_model(false);
  ParameterStore& store = model.params();
  std::vector<ParamId> text_params;
  for (ParamId id : store.all()) {
    if (store.name(id).starts_with("text.")) text_params.push_back(id);
  }
  return check_store("text_encoder", store, text_params,
                     [&](Tape& t, TapeBinding& p) {
                       Var g = model.text_feature(t, p, ExpressionLabel::Happiness);
                       return squared_readout(t, g);
                     });
}

GradSuiteEntry check_intensity_head() {
  SeededRng rng(106);
  ParameterStore store;
  ParamId f = store.add("f", random_tensor({8}, rng));
  std::array<ParamId, kNumExpressions> g;
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    g[c] = store.add("g" + std::to_string(c), random_tensor({8}, rng));
  }
  ParamId log_inv_tau = store.add("log_inv_tau", Tensor({1}, std::log(2.0)));
  return check_all("intensity_ce_head", store, [&](Tape& t, TapeBinding& p) {
    std::array<Var, kNumExpressions> sims;
    for (std::size_t c = 0; c < kNumExpressions; ++c) {
      sims[c] = t.cosine(p[f], p[g[c]]);
    }
    Var logits = t.mul_scalar(t.stack_scalars(sims), t.exp(p[log_inv_tau]));
    return t.cross_entropy_logits(logits, 1);
  });
}

GradSuiteEntry check_expression_end_to_end() {
  ExpressionModel model = tiny_model(true);
  SeededRng rng(107);
  FrameSequence video;
  for (std::size_t i = 0; i < model.config().frames; ++i) {
    Tensor frame({8, 8, 1});
    for (double& v : frame.data()) v = rng.uniform();
    video.frames.push_back(std::move(frame));
  }
  return check_all("expression_end_to_end", model.params(),
                   [&](Tape& t, TapeBinding& p) {
                     Var f = model.video_feature(t, p, video);
                     std::array<Var, kNumExpressions> g;
                     for (std::size_t c = 0; c < kNumExpressions; ++c) {
                       g[c] = model.text_feature(t, p, kExpressionOrder[c]);
                     }
                     Var logits = model.class_logits(t, p, f, g);
                     return t.cross_entropy_logits(logits, 2);
                   });
}

GradSuiteEntry check_rnn(CellKind cell, bool residual) {
  RnnConfig config;
  config.cell = cell;
  config.input_dim = 4;
  config.hidden_dim = 6;
  config.num_layers = 2;
  config.residual = residual;
  DiagnosisClassifier model(config, 108);
  SeededRng rng(109);
  ClassifierSequence seq;
  seq.mode = SequenceMode::Raw;
  for (std::size_t step = 0; step < 4; ++step) {
    seq.timesteps.push_back(random_tensor({4}, rng));
  }
  std::string name = std::string(to_string(cell)) +
                     (residual ? "_residual_on" : "_residual_off");
  return check_all(std::move(name), model.params(),
                   [&](Tape& t, TapeBinding& p) {
                     Var logits = model.forward_logits(t, p, seq);
                     return t.cross_entropy_logits(
                         logits, static_cast<std::size_t>(Diagnosis::PD));
                   });
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite() {
  std::vector<GradSuiteEntry> entries;
  entries.push_back(check_patch_embedding());
  entries.push_back(check_vit_block());
  entries.push_back(check_mhsa_gate());
  entries.push_back(check_temporal_encoder());
  entries.push_back(check_text_encoder());
  entries.push_back(check_intensity_head());
  entries.push_back(check_expression_end_to_end());
  entries.push_back(check_rnn(CellKind::LSTM, false));
  entries.push_back(check_rnn(CellKind::LSTM, true));
  entries.push_back(check_rnn(CellKind::GRU, false));
  entries.push_back(check_rnn(CellKind::GRU, true));
  return entries;
}

}  // namespace hypomimia
