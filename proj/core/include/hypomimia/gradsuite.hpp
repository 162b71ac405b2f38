#pragma once

#include <string>
#include <vector>

namespace hypomimia {

struct GradSuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 1e-4;
  bool pass = false;
};

/// Finite-difference verification of every trainable stage at tiny fixed
/// dimensions: patch embedding, ViT block, the attention gate, temporal
/// encoder, prompt-augmented text encoder, the intensity/cross-entropy
/// head, and LSTM/GRU stacks with and without the residual skip.
std::vector<GradSuiteEntry> run_gradient_suite();

}  // namespace hypomimia
