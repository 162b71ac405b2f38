#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hypomimia/feature_processing.hpp"
#include "hypomimia/labels.hpp"
#include "hypomimia/nn.hpp"
#include "hypomimia/parameters.hpp"

namespace hypomimia {

struct RnnConfig {
  CellKind cell = CellKind::LSTM;
  std::size_t input_dim = 12;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 2;
  bool residual = true;
  double dropout = 0.0;  // applied between layers during training only

  void validate() const;  // ConfigError on violations
};

struct DiagnosisOutput {
  std::array<double, 2> logits{};  // (HC, PD)
  double probability_pd = 0.0;
  Diagnosis predicted = Diagnosis::HC;
};

/// Stacked LSTM/GRU over the 4-timestep feature sequence with optional
/// identity skips across layers (layer k >= 2 adds its input to the cell
/// output), ending in a 2-logit affine head on the final hidden state.
class DiagnosisClassifier {
 public:
  DiagnosisClassifier(RnnConfig config, std::uint64_t seed);

  const RnnConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Graph-building forward; dropout_rng enables between-layer dropout.
  Var forward_logits(Tape& t, TapeBinding& p, const ClassifierSequence& seq,
                     SeededRng* dropout_rng = nullptr) const;

  DiagnosisOutput rnn_forward(const ClassifierSequence& seq) const;

  // Per-timestep output of one layer (1-based, residual applied) — the
  // observable for the residual identity property.
  std::vector<Tensor> layer_outputs(const ClassifierSequence& seq,
                                    std::size_t layer) const;

 private:
  struct LayerVars {
    std::vector<std::vector<Var>> per_layer;  // [layer][timestep]
  };
  Var forward_impl(Tape& t, TapeBinding& p, const ClassifierSequence& seq,
                   SeededRng* dropout_rng, LayerVars* capture) const;

  RnnConfig config_;
  ParameterStore params_;
  std::vector<RnnCellParams> cells_;
  LinearParams head_;
};

DiagnosisOutput predict(const IntensityRecord& record, SequenceMode mode,
                        const DiagnosisClassifier& model);

struct ClassifierTrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::uint64_t seed = 42;
};

using LabeledSequence = std::pair<ClassifierSequence, Diagnosis>;

// Two-class cross-entropy on the logits; both classes must be present.
std::vector<EpochStats> train_classifier(DiagnosisClassifier& model,
                                         const std::vector<LabeledSequence>& dataset,
                                         const ClassifierTrainConfig& train_cfg);

}  // namespace hypomimia
