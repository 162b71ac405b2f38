#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hypomimia/labels.hpp"
#include "hypomimia/nn.hpp"
#include "hypomimia/parameters.hpp"
#include "hypomimia/rng.hpp"
#include "hypomimia/tape.hpp"
#include "hypomimia/tensor.hpp"

namespace hypomimia {

/// M frames sampled from one expression video. Frames are [h x w x c]
/// tensors with values in [0, 1].
struct FrameSequence {
  std::vector<Tensor> frames;
  std::optional<ExpressionLabel> label;
};

struct ExpressionModelConfig {
  std::size_t frames = 8;  // M, sampled per video
  std::size_t image_size = 32;
  std::size_t channels = 1;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t vit_depth = 2;
  std::size_t mhsa_heads = 4;
  std::size_t temporal_depth = 1;
  std::size_t text_depth = 1;
  std::size_t vocab = 64;
  std::size_t max_text_len = 32;
  std::size_t n_ctx = 4;
  double tau = 0.07;
  bool learnable_tau = false;

  std::size_t patches_per_frame() const;
  void validate() const;  // ConfigError on violations
};

/// One descriptive phrase per expression class, in canonical order.
using PromptSet = std::array<std::string, kNumExpressions>;
PromptSet default_prompts();

struct ClassScores {
  std::array<double, kNumExpressions> probabilities;  // softmax of cos/tau
  std::array<double, kNumExpressions> intensities;    // exp(cos/tau)
  ExpressionLabel predicted;
};

// Forward declaration; defined in feature_processing.hpp.
struct IntensityRecord;

/// Dual-encoder expression-intensity model: a gated ViT over sampled
/// frames pooled by a temporal transformer on the visual side, and a
/// prompt-augmented text encoder on the textual side. A video's intensity
/// against a class is exp(cos(F, G_class)/tau).
class ExpressionModel {
 public:
  ExpressionModel(ExpressionModelConfig config, PromptSet prompts,
                  std::uint64_t seed);

  const ExpressionModelConfig& config() const { return config_; }
  const PromptSet& prompts() const { return prompts_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  double tau() const;  // current value (parameter when learnable)

  // Word-level tokenization against the model vocabulary: lowercased,
  // split on whitespace/punctuation, unknown words map to a shared id.
  std::vector<std::size_t> tokenize(const std::string& text) const;
  std::size_t vocab_used() const { return vocab_used_; }

  // Graph-building stages (training and inference share these).
  Var encode_frame(Tape& t, TapeBinding& p, const Tensor& frame) const;
  Var mhsa_gate(Tape& t, TapeBinding& p, Var tokens) const;
  // Per-frame features stacked, positional embeddings added, encoder
  // applied — the [M x d] matrix that mean-pools into F.
  Var temporal_tokens(Tape& t, TapeBinding& p, const FrameSequence& video) const;
  Var video_feature(Tape& t, TapeBinding& p, const FrameSequence& video) const;
  Var text_feature(Tape& t, TapeBinding& p, ExpressionLabel label) const;
  // cos(F, G_c)/tau for all four classes -> [4]
  Var class_logits(Tape& t, TapeBinding& p, Var f,
                   const std::array<Var, kNumExpressions>& g) const;

  // Inference evaluations (no gradients recorded).
  Tensor video_feature(const FrameSequence& video) const;
  Tensor text_feature(ExpressionLabel label) const;
  ClassScores class_scores(const FrameSequence& video) const;

  // The 16-value record for one subject: videos must be the four
  // expressions in canonical order; entry 4(j-1)+c scores video j against
  // class-c text (1-based).
  IntensityRecord extract_intensity_record(
      const std::array<FrameSequence, kNumExpressions>& videos,
      const std::string& subject_id, std::optional<Diagnosis> diagnosis) const;

 private:
  Tensor patchify(const Tensor& frame) const;
  std::vector<std::size_t> prompt_token_rows(ExpressionLabel label) const;

  ExpressionModelConfig config_;
  PromptSet prompts_;
  ParameterStore params_;
  std::vector<std::string> vocab_words_;  // row 3 + i in the embedding table
  std::size_t vocab_used_ = 0;

  ParamId patch_embed_w_, patch_embed_b_;
  ParamId cls_token_, visual_pos_;
  std::vector<BlockParams> vit_blocks_;
  AttentionParams gate_attn_;
  ParamId temporal_pos_;
  std::vector<BlockParams> temporal_blocks_;
  ParamId token_table_, ctx_vectors_, text_pos_;
  std::vector<BlockParams> text_blocks_;
  ParamId log_inv_tau_;  // only registered when learnable_tau
};

// Eq.-style intensity of a feature pair: exp(cos(f, g)/tau).
double intensity(const Tensor& f, const Tensor& g, double tau);

// Uniformly spaced frame indices over a length-n video: floor(k(n-1)/(m-1)),
// endpoints included; m = 1 picks frame 0.
std::vector<std::size_t> sample_frame_indices(std::size_t n, std::size_t m);
FrameSequence sample_frames(const std::vector<Tensor>& video, std::size_t m,
                            std::optional<ExpressionLabel> label = {});

struct ExpressionTrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  double lr_image = 1e-5;     // per-frame visual stack
  double lr_temporal = 1e-3;  // temporal and text stacks
  std::uint64_t seed = 42;
  // When positive, stop after the first epoch whose training accuracy
  // reaches this value; 0 keeps the full epoch count.
  double target_accuracy = 0.0;
};

// Minimizes 4-way cross-entropy of class_scores against labels; returns
// per-epoch loss/accuracy history (one entry per completed epoch).
std::vector<EpochStats> train_expression_model(
    ExpressionModel& model, const std::vector<FrameSequence>& dataset,
    const ExpressionTrainConfig& train_cfg);

struct ExpressionEval {
  double accuracy = 0.0;
  // confusion[true][predicted], canonical label order
  std::array<std::array<std::size_t, kNumExpressions>, kNumExpressions> confusion{};
};

ExpressionEval evaluate_expression(const ExpressionModel& model,
                                   const std::vector<FrameSequence>& dataset);

}  // namespace hypomimia
