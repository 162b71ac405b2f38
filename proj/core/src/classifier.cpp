#include "hypomimia/classifier.hpp"

#include <cmath>
#include <numeric>

#include "hypomimia/errors.hpp"
#include "hypomimia/tensor.hpp"

namespace hypomimia {

void RnnConfig::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || num_layers == 0) {
    throw ConfigError("classifier config: dimensions must be positive");
  }
  if (residual && num_layers < 2) {
    throw ConfigError("classifier config: residual skips need >= 2 layers");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("classifier config: dropout must lie in [0, 1)");
  }
}

DiagnosisClassifier::DiagnosisClassifier(RnnConfig config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  SeededRng rng(seed);
  for (std::size_t layer = 0; layer < config_.num_layers; ++layer) {
    std::size_t in = layer == 0 ? config_.input_dim : config_.hidden_dim;
    cells_.push_back(make_rnn_cell(params_,
                                   "rnn.layer" + std::to_string(layer + 1),
                                   config_.cell, in, config_.hidden_dim, rng));
  }
  head_ = make_linear(params_, "head", config_.hidden_dim, 2, rng);
}

Var DiagnosisClassifier::forward_impl(Tape& t, TapeBinding& p,
                                      const ClassifierSequence& seq,
                                      SeededRng* dropout_rng,
                                      LayerVars* capture) const {
  if (seq.timesteps.empty()) throw DataError("classifier sequence is empty");
  for (const Tensor& step : seq.timesteps) {
    if (step.numel() != config_.input_dim) {
      throw ShapeError("sequence timestep has dim " +
                       std::to_string(step.numel()) + ", classifier expects " +
                       std::to_string(config_.input_dim));
    }
  }
  std::vector<Var> inputs;
  inputs.reserve(seq.timesteps.size());
  for (const Tensor& step : seq.timesteps) inputs.push_back(t.constant(step));

  if (capture) capture->per_layer.resize(cells_.size());
  for (std::size_t layer = 0; layer < cells_.size(); ++layer) {
    RnnState state = rnn_zero_state(t, cells_[layer]);
    std::vector<Var> outputs;
    outputs.reserve(inputs.size());
    for (std::size_t step = 0; step < inputs.size(); ++step) {
      Var skip = inputs[step];  // previous layer's output, pre-dropout
      Var x = skip;
      if (dropout_rng && layer > 0 && config_.dropout > 0.0) {
        Tensor mask(t.value(x).shape(), 0.0);
        double keep = 1.0 - config_.dropout;
        for (double& v : mask.data()) {
          v = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
        }
        x = t.mul(x, t.constant(std::move(mask)));
      }
      state = rnn_cell_step(t, p, cells_[layer], x, state);
      // Identity skip across layers: widths only match from layer 2 on.
      outputs.push_back(config_.residual && layer > 0 ? t.add(state.h, skip)
                                                      : state.h);
    }
    if (capture) capture->per_layer[layer] = outputs;
    inputs = std::move(outputs);
  }
  return linear(t, p, head_, inputs.back());
}

Var DiagnosisClassifier::forward_logits(Tape& t, TapeBinding& p,
                                        const ClassifierSequence& seq,
                                        SeededRng* dropout_rng) const {
  return forward_impl(t, p, seq, dropout_rng, nullptr);
}

DiagnosisOutput DiagnosisClassifier::rnn_forward(const ClassifierSequence& seq) const {
  Tape t;
  TapeBinding p(t, static_cast<const ParameterStore&>(params_));
  Var logits = forward_impl(t, p, seq, nullptr, nullptr);
  const Tensor& lv = t.value(logits);
  DiagnosisOutput out;
  out.logits = {lv[0], lv[1]};
  Tensor probs = softmax(lv, 1);  // 1-D logits are one row
  out.probability_pd = probs[static_cast<std::size_t>(Diagnosis::PD)];
  out.predicted = lv[1] > lv[0] ? Diagnosis::PD : Diagnosis::HC;
  return out;
}

std::vector<Tensor> DiagnosisClassifier::layer_outputs(
    const ClassifierSequence& seq, std::size_t layer) const {
  if (layer < 1 || layer > cells_.size()) {
    throw ConfigError("layer index must lie in 1.." +
                      std::to_string(cells_.size()));
  }
  Tape t;
  TapeBinding p(t, static_cast<const ParameterStore&>(params_));
  LayerVars captured;
  forward_impl(t, p, seq, nullptr, &captured);
  std::vector<Tensor> outputs;
  outputs.reserve(captured.per_layer[layer - 1].size());
  for (Var v : captured.per_layer[layer - 1]) outputs.push_back(t.value(v));
  return outputs;
}

DiagnosisOutput predict(const IntensityRecord& record, SequenceMode mode,
                        const DiagnosisClassifier& model) {
  return model.rnn_forward(assemble_sequence(record, mode));
}

std::vector<EpochStats> train_classifier(DiagnosisClassifier& model,
                                         const std::vector<LabeledSequence>& dataset,
                                         const ClassifierTrainConfig& train_cfg) {
  if (dataset.empty()) throw DataError("classifier dataset is empty");
  bool has_hc = false, has_pd = false;
  for (const LabeledSequence& sample : dataset) {
    (sample.second == Diagnosis::PD ? has_pd : has_hc) = true;
  }
  if (!has_hc || !has_pd) {
    throw DataError("classifier training needs both diagnostic classes");
  }
  if (train_cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  AdamConfig adam_cfg;
  adam_cfg.lr = train_cfg.lr;
  Adam adam(model.params(), adam_cfg);
  SeededRng shuffle_rng = SeededRng(train_cfg.seed).fork(0xc1);
  SeededRng dropout_rng = SeededRng(train_cfg.seed).fork(0xd0);
  SeededRng* dropout = model.config().dropout > 0.0 ? &dropout_rng : nullptr;

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
      Var batch_loss;
      for (std::size_t s = start; s < end; ++s) {
        const auto& [seq, diagnosis] = dataset[order[s]];
        Var logits = model.forward_logits(t, p, seq, dropout);
        const Tensor& lv = t.value(logits);
        std::size_t target = static_cast<std::size_t>(diagnosis);
        if ((lv[1] > lv[0] ? 1u : 0u) == target) ++correct;
        Var sample_loss = t.cross_entropy_logits(logits, target);
        batch_loss = (s == start) ? sample_loss : t.add(batch_loss, sample_loss);
      }
      loss_sum += t.value(batch_loss)[0];
      Var mean_loss = t.scale(batch_loss, 1.0 / static_cast<double>(end - start));
      if (!std::isfinite(t.value(mean_loss)[0])) {
        throw NumericError("non-finite classifier loss at epoch " +
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
  }
  return history;
}

}  // namespace hypomimia
