#include "hypomimia/expression_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "hypomimia/errors.hpp"
#include "hypomimia/feature_processing.hpp"

namespace hypomimia {

namespace {

constexpr std::size_t kUnkRow = 0;
constexpr std::size_t kStartRow = 1;
constexpr std::size_t kEndRow = 2;
constexpr std::size_t kReservedRows = 3;

Tensor small_normal(std::vector<std::size_t> shape, SeededRng& rng,
                    double sigma = 0.02) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, sigma);
  return t;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      current.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace

std::size_t ExpressionModelConfig::patches_per_frame() const {
  std::size_t side = image_size / patch_size;
  return side * side;
}

void ExpressionModelConfig::validate() const {
  if (frames == 0) throw ConfigError("model config: frames must be >= 1");
  if (image_size == 0 || patch_size == 0 || image_size % patch_size != 0) {
    throw ConfigError("model config: patch_size must divide image_size");
  }
  if (channels == 0) throw ConfigError("model config: channels must be >= 1");
  if (embed_dim == 0 || mhsa_heads == 0 || embed_dim % mhsa_heads != 0) {
    throw ConfigError("model config: embed_dim must be divisible by mhsa_heads");
  }
  if (!(tau > 0.0)) throw ConfigError("model config: tau must be positive");
  if (vocab < kReservedRows + 1) {
    throw ConfigError("model config: vocab must hold the reserved tokens");
  }
  if (max_text_len < n_ctx + 3) {
    throw ConfigError(
        "model config: max_text_len must fit start/end, the context vectors "
        "and at least one word");
  }
}

PromptSet default_prompts() {
  return {
      "a relaxed face with no particular expression",
      "a smiling joyful face showing happiness",
      "a startled face with raised eyebrows showing surprise",
      "a frowning tense face showing anger",
  };
}

ExpressionModel::ExpressionModel(ExpressionModelConfig config, PromptSet prompts,
                                 std::uint64_t seed)
    : config_(config), prompts_(std::move(prompts)) {
  config_.validate();
  for (const std::string& prompt : prompts_) {
    if (prompt.empty()) throw ConfigError("prompts must be non-empty");
    for (const std::string& word : split_words(prompt)) {
      if (std::find(vocab_words_.begin(), vocab_words_.end(), word) ==
          vocab_words_.end()) {
        vocab_words_.push_back(word);
      }
    }
  }
  vocab_used_ = kReservedRows + vocab_words_.size();
  if (vocab_used_ > config_.vocab) {
    throw ConfigError("model config: vocab " + std::to_string(config_.vocab) +
                      " too small for " + std::to_string(vocab_used_) +
                      " prompt tokens");
  }

  SeededRng rng(seed);
  std::size_t d = config_.embed_dim;
  std::size_t patch_dim =
      config_.patch_size * config_.patch_size * config_.channels;
  std::size_t tokens = config_.patches_per_frame() + 1;

  SeededRng visual_rng = rng.fork(1);
  {
    LinearParams pe = make_linear(params_, "visual.patch_embed", patch_dim, d,
                                  visual_rng);
    patch_embed_w_ = pe.w;
    patch_embed_b_ = pe.b;
  }
  cls_token_ = params_.add("visual.cls", small_normal({1, d}, visual_rng));
  visual_pos_ = params_.add("visual.pos", small_normal({tokens, d}, visual_rng));
  for (std::size_t i = 0; i < config_.vit_depth; ++i) {
    vit_blocks_.push_back(make_block(params_,
                                     "visual.block" + std::to_string(i), d,
                                     config_.mhsa_heads, visual_rng));
  }
  gate_attn_ = make_attention(params_, "visual.gate", d, config_.mhsa_heads,
                              visual_rng);

  SeededRng temporal_rng = rng.fork(2);
  temporal_pos_ = params_.add("temporal.pos",
                              small_normal({config_.frames, d}, temporal_rng));
  for (std::size_t i = 0; i < config_.temporal_depth; ++i) {
    temporal_blocks_.push_back(make_block(params_,
                                          "temporal.block" + std::to_string(i),
                                          d, config_.mhsa_heads, temporal_rng));
  }

  SeededRng text_rng = rng.fork(3);
  token_table_ = params_.add("text.tokens",
                             small_normal({config_.vocab, d}, text_rng));
  ctx_vectors_ = params_.add("text.ctx",
                             small_normal({config_.n_ctx, d}, text_rng));
  text_pos_ = params_.add("text.pos",
                          small_normal({config_.max_text_len, d}, text_rng));
  for (std::size_t i = 0; i < config_.text_depth; ++i) {
    text_blocks_.push_back(make_block(params_, "text.block" + std::to_string(i),
                                      d, config_.mhsa_heads, text_rng));
  }

  if (config_.learnable_tau) {
    log_inv_tau_ =
        params_.add("tau.log_inv", Tensor({1}, std::log(1.0 / config_.tau)));
  }
}

double ExpressionModel::tau() const {
  if (config_.learnable_tau) {
    return std::exp(-params_.value(log_inv_tau_)[0]);
  }
  return config_.tau;
}

std::vector<std::size_t> ExpressionModel::tokenize(const std::string& text) const {
  std::vector<std::size_t> ids;
  for (const std::string& word : split_words(text)) {
    auto it = std::find(vocab_words_.begin(), vocab_words_.end(), word);
    ids.push_back(it == vocab_words_.end()
                      ? kUnkRow
                      : kReservedRows +
                            static_cast<std::size_t>(it - vocab_words_.begin()));
  }
  return ids;
}

Tensor ExpressionModel::patchify(const Tensor& frame) const {
  std::size_t s = config_.image_size;
  std::size_t c = config_.channels;
  if (frame.shape() != std::vector<std::size_t>{s, s, c}) {
    throw ShapeError("frame shape " + frame.shape_str() + ", model expects " +
                     shape_str(std::vector<std::size_t>{s, s, c}));
  }
  std::size_t p = config_.patch_size;
  std::size_t side = s / p;
  Tensor out({side * side, p * p * c});
  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t px = 0; px < side; ++px) {
      std::size_t row = py * side + px;
      std::size_t col = 0;
      for (std::size_t dy = 0; dy < p; ++dy) {
        for (std::size_t dx = 0; dx < p; ++dx) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            out[row * (p * p * c) + col++] =
                frame[((py * p + dy) * s + (px * p + dx)) * c + ch];
          }
        }
      }
    }
  }
  return out;
}

Var ExpressionModel::encode_frame(Tape& t, TapeBinding& p,
                                  const Tensor& frame) const {
  Var patches = t.constant(patchify(frame));
  Var embedded = t.add_row_broadcast(t.matmul(patches, p[patch_embed_w_]),
                                     p[patch_embed_b_]);
  std::array<Var, 2> with_cls = {p[cls_token_], embedded};
  Var tokens = t.add(t.concat_rows(with_cls), p[visual_pos_]);
  for (const BlockParams& block : vit_blocks_) {
    tokens = transformer_block(t, p, block, tokens);
  }
  return tokens;
}

Var ExpressionModel::mhsa_gate(Tape& t, TapeBinding& p, Var tokens) const {
  Var gated = t.mul(tokens, t.sigmoid(attention(t, p, gate_attn_, tokens)));
  return t.mean_rows(gated);
}

Var ExpressionModel::temporal_tokens(Tape& t, TapeBinding& p,
                                     const FrameSequence& video) const {
  if (video.frames.size() != config_.frames) {
    throw ShapeError("video has " + std::to_string(video.frames.size()) +
                     " frames, model expects " + std::to_string(config_.frames));
  }
  std::vector<Var> features;
  features.reserve(video.frames.size());
  for (const Tensor& frame : video.frames) {
    features.push_back(mhsa_gate(t, p, encode_frame(t, p, frame)));
  }
  Var stacked = t.add(t.concat_rows(features), p[temporal_pos_]);
  for (const BlockParams& block : temporal_blocks_) {
    stacked = transformer_block(t, p, block, stacked);
  }
  return stacked;
}

Var ExpressionModel::video_feature(Tape& t, TapeBinding& p,
                                   const FrameSequence& video) const {
  return t.mean_rows(temporal_tokens(t, p, video));
}

std::vector<std::size_t> ExpressionModel::prompt_token_rows(
    ExpressionLabel label) const {
  std::vector<std::size_t> words = tokenize(prompts_[static_cast<std::size_t>(label)]);
  std::size_t limit = config_.max_text_len - config_.n_ctx - 2;
  if (words.size() > limit) {
    throw DataError("prompt for " + std::string(to_string(label)) + " has " +
                    std::to_string(words.size()) + " tokens, limit is " +
                    std::to_string(limit));
  }
  return words;
}

Var ExpressionModel::text_feature(Tape& t, TapeBinding& p,
                                  ExpressionLabel label) const {
  std::vector<std::size_t> words = prompt_token_rows(label);
  std::vector<Var> parts;
  parts.push_back(t.gather_rows(p[token_table_], {kStartRow}));
  if (config_.n_ctx > 0) parts.push_back(p[ctx_vectors_]);
  if (!words.empty()) parts.push_back(t.gather_rows(p[token_table_], words));
  parts.push_back(t.gather_rows(p[token_table_], {kEndRow}));
  Var seq = t.concat_rows(parts);
  std::size_t len = t.value(seq).rows();
  seq = t.add(seq, t.slice_rows(p[text_pos_], 0, len));
  for (const BlockParams& block : text_blocks_) {
    seq = transformer_block(t, p, block, seq);
  }
  return t.row(seq, len - 1);
}

Var ExpressionModel::class_logits(
    Tape& t, TapeBinding& p, Var f,
    const std::array<Var, kNumExpressions>& g) const {
  std::array<Var, kNumExpressions> sims;
  for (std::size_t c = 0; c < kNumExpressions; ++c) sims[c] = t.cosine(f, g[c]);
  Var stacked = t.stack_scalars(sims);
  if (config_.learnable_tau) {
    return t.mul_scalar(stacked, t.exp(p[log_inv_tau_]));
  }
  return t.scale(stacked, 1.0 / config_.tau);
}

Tensor ExpressionModel::video_feature(const FrameSequence& video) const {
  Tape t;
  TapeBinding p(t, static_cast<const ParameterStore&>(params_));
  return t.value(video_feature(t, p, video));
}

Tensor ExpressionModel::text_feature(ExpressionLabel label) const {
  Tape t;
  TapeBinding p(t, static_cast<const ParameterStore&>(params_));
  return t.value(text_feature(t, p, label));
}

ClassScores ExpressionModel::class_scores(const FrameSequence& video) const {
  Tape t;
  TapeBinding p(t, static_cast<const ParameterStore&>(params_));
  Var f = video_feature(t, p, video);
  std::array<Var, kNumExpressions> g;
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    g[c] = text_feature(t, p, kExpressionOrder[c]);
  }
  Var logits = class_logits(t, p, f, g);
  const Tensor& lv = t.value(logits);
  Tensor probs = softmax(lv, 1);  // 1-D logits are one row
  ClassScores scores;
  std::size_t best = 0;
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    scores.probabilities[c] = probs[c];
    scores.intensities[c] = std::exp(lv[c]);
    if (lv[c] > lv[best]) best = c;
  }
  scores.predicted = kExpressionOrder[best];
  return scores;
}

IntensityRecord ExpressionModel::extract_intensity_record(
    const std::array<FrameSequence, kNumExpressions>& videos,
    const std::string& subject_id, std::optional<Diagnosis> diagnosis) const {
  for (std::size_t j = 0; j < kNumExpressions; ++j) {
    if (videos[j].label && *videos[j].label != kExpressionOrder[j]) {
      throw DataError("subject " + subject_id + ": video " +
                      std::to_string(j + 1) + " is labeled " +
                      std::string(to_string(*videos[j].label)) +
                      ", expected canonical order");
    }
  }
  Tape t;
  TapeBinding p(t, static_cast<const ParameterStore&>(params_));
  std::array<Tensor, kNumExpressions> g;
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    g[c] = t.value(text_feature(t, p, kExpressionOrder[c]));
  }
  IntensityRecord record;
  record.subject_id = subject_id;
  record.diagnosis = diagnosis;
  double current_tau = tau();
  for (std::size_t j = 0; j < kNumExpressions; ++j) {
    Tensor f = t.value(video_feature(t, p, videos[j]));
    for (std::size_t c = 0; c < kNumExpressions; ++c) {
      record.values[kNumExpressions * j + c] = intensity(f, g[c], current_tau);
    }
  }
  return record;
}

double intensity(const Tensor& f, const Tensor& g, double tau) {
  if (!(tau > 0.0)) throw ConfigError("intensity: tau must be positive");
  return std::exp(cosine_similarity(f, g) / tau);
}

std::vector<std::size_t> sample_frame_indices(std::size_t n, std::size_t m) {
  if (n == 0) throw DataError("cannot sample frames from an empty video");
  if (m == 0) throw ConfigError("frame count must be >= 1");
  std::vector<std::size_t> indices(m);
  if (m == 1) return indices;  // single frame: index 0
  for (std::size_t k = 0; k < m; ++k) {
    indices[k] = k * (n - 1) / (m - 1);
  }
  return indices;
}

FrameSequence sample_frames(const std::vector<Tensor>& video, std::size_t m,
                            std::optional<ExpressionLabel> label) {
  FrameSequence seq;
  seq.label = label;
  seq.frames.reserve(m);
  for (std::size_t idx : sample_frame_indices(video.size(), m)) {
    seq.frames.push_back(video[idx]);
  }
  return seq;
}

std::vector<EpochStats> train_expression_model(
    ExpressionModel& model, const std::vector<FrameSequence>& dataset,
    const ExpressionTrainConfig& train_cfg) {
  if (dataset.empty()) throw DataError("training dataset is empty");
  std::array<bool, kNumExpressions> seen{};
  for (const FrameSequence& video : dataset) {
    if (!video.label) throw DataError("training dataset has an unlabeled video");
    seen[static_cast<std::size_t>(*video.label)] = true;
  }
  for (std::size_t c = 0; c < kNumExpressions; ++c) {
    if (!seen[c]) {
      throw DataError("training dataset is missing class " +
                      std::string(to_string(kExpressionOrder[c])));
    }
  }
  if (train_cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  AdamConfig adam_cfg;
  adam_cfg.lr = train_cfg.lr_temporal;
  Adam adam(model.params(), adam_cfg);
  adam.set_prefix_lr("visual.", train_cfg.lr_image);

  SeededRng shuffle_rng = SeededRng(train_cfg.seed).fork(0xe9);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  history.reserve(train_cfg.epochs);
  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size();
         start += train_cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + train_cfg.batch_size);
      Tape t;
      TapeBinding p(t, model.params());
      std::array<Var, kNumExpressions> g;
      for (std::size_t c = 0; c < kNumExpressions; ++c) {
        g[c] = model.text_feature(t, p, kExpressionOrder[c]);
      }
      Var batch_loss;
      for (std::size_t s = start; s < end; ++s) {
        const FrameSequence& video = dataset[order[s]];
        Var f = model.video_feature(t, p, video);
        Var logits = model.class_logits(t, p, f, g);
        const Tensor& lv = t.value(logits);
        std::size_t target = static_cast<std::size_t>(*video.label);
        std::size_t best = 0;
        for (std::size_t c = 1; c < kNumExpressions; ++c) {
          if (lv[c] > lv[best]) best = c;
        }
        if (best == target) ++correct;
        Var sample_loss = t.cross_entropy_logits(logits, target);
        batch_loss = (s == start) ? sample_loss : t.add(batch_loss, sample_loss);
      }
      double count = static_cast<double>(end - start);
      loss_sum += t.value(batch_loss)[0];
      Var mean_loss = t.scale(batch_loss, 1.0 / count);
      if (!std::isfinite(t.value(mean_loss)[0])) {
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch + 1) + ", batch " +
                           std::to_string(start / train_cfg.batch_size + 1));
      }
      model.params().zero_grads();
      t.backward(mean_loss);
      p.accumulate_grads();
      adam.step();
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.loss = loss_sum / static_cast<double>(dataset.size());
    stats.accuracy =
        static_cast<double>(correct) / static_cast<double>(dataset.size());
    history.push_back(stats);
    if (train_cfg.target_accuracy > 0.0 &&
        stats.accuracy >= train_cfg.target_accuracy) {
      break;
    }
  }
  return history;
}

ExpressionEval evaluate_expression(const ExpressionModel& model,
                                   const std::vector<FrameSequence>& dataset) {
  if (dataset.empty()) throw DataError("evaluation dataset is empty");
  ExpressionEval eval;
  std::size_t correct = 0;
  for (const FrameSequence& video : dataset) {
    if (!video.label) throw DataError("evaluation dataset has an unlabeled video");
    ClassScores scores = model.class_scores(video);
    std::size_t truth = static_cast<std::size_t>(*video.label);
    std::size_t pred = static_cast<std::size_t>(scores.predicted);
    ++eval.confusion[truth][pred];
    if (truth == pred) ++correct;
  }
  eval.accuracy =
      static_cast<double>(correct) / static_cast<double>(dataset.size());
  return eval;
}

}  // namespace hypomimia
