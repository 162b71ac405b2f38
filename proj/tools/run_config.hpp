#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "hypomimia/classifier.hpp"
#include "hypomimia/data_io.hpp"
#include "hypomimia/evaluation.hpp"
#include "hypomimia/expression_model.hpp"

namespace hypomimia::cli {

struct EvalConfig {
  Averaging averaging = Averaging::BinaryPd;  // highlighted in text reports
  std::size_t k = 5;
};

/// Full run configuration: one JSON document with model / train /
/// classifier / data / eval sections. Unknown keys are rejected; absent
/// keys keep their defaults. The classifier's input_dim is derived from
/// the sequence mode at run time, never from the file.
struct RunConfig {
  ExpressionModelConfig model;
  PromptSet prompts = default_prompts();
  ExpressionTrainConfig train;
  RnnConfig classifier;
  ClassifierTrainConfig classifier_train;
  SyntheticConfig data;
  EvalConfig eval;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::optional<std::filesystem::path>& path);

// The effective configuration, every field populated.
nlohmann::ordered_json run_config_json(const RunConfig& config);

// Standard report skeleton: tool version + effective config.
nlohmann::ordered_json report_envelope(const RunConfig& config);

// Seed precedence: explicit flag, then HYPOMIMIA_SEED, then the
// config-file value.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           std::uint64_t config_seed);

}  // namespace hypomimia::cli
