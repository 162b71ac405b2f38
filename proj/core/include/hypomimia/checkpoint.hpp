#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hypomimia/classifier.hpp"
#include "hypomimia/expression_model.hpp"
#include "hypomimia/parameters.hpp"

namespace hypomimia {

/// Checkpoint container: magic "HEM1", a u32 LE byte length, that many
/// bytes of UTF-8 JSON manifest (a meta object plus ordered parameter
/// names and shapes), then each parameter's raw f64 LE values in manifest
/// order.
inline constexpr char kCheckpointMagic[4] = {'H', 'E', 'M', '1'};

struct CheckpointData {
  std::string meta_json;  // serialized JSON object
  std::vector<std::pair<std::string, Tensor>> params;
};

void save_checkpoint(const std::filesystem::path& path,
                     const ParameterStore& store, const std::string& meta_json);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into an existing store; names, order and shapes
// must match exactly.
void load_into(ParameterStore& store, const CheckpointData& data);

void save_expression_model(const std::filesystem::path& path,
                           const ExpressionModel& model);
ExpressionModel load_expression_model(const std::filesystem::path& path);

void save_classifier(const std::filesystem::path& path,
                     const DiagnosisClassifier& model);
DiagnosisClassifier load_classifier(const std::filesystem::path& path);

}  // namespace hypomimia
