#include "run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <initializer_list>

#include "hypomimia/errors.hpp"
#include "hypomimia/evaluation.hpp"
#include "hypomimia/version.hpp"

namespace hypomimia::cli {

namespace {

void check_keys(const nlohmann::json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + section + "' must be an object");
  }
  for (const auto& item : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      throw ConfigError("unknown key '" + item.key() + "' in config section '" +
                        section + "'");
    }
  }
}

template <typename T>
void fetch(const nlohmann::json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config key '" + std::string(key) + "': " + e.what());
  }
}

void parse_model(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "model",
             {"frames", "image_size", "channels", "patch_size", "embed_dim",
              "vit_depth", "mhsa_heads", "temporal_depth", "text_depth",
              "vocab", "max_text_len", "n_ctx", "tau", "learnable_tau",
              "prompts"});
  fetch(j, "frames", c.model.frames);
  fetch(j, "image_size", c.model.image_size);
  fetch(j, "channels", c.model.channels);
  fetch(j, "patch_size", c.model.patch_size);
  fetch(j, "embed_dim", c.model.embed_dim);
  fetch(j, "vit_depth", c.model.vit_depth);
  fetch(j, "mhsa_heads", c.model.mhsa_heads);
  fetch(j, "temporal_depth", c.model.temporal_depth);
  fetch(j, "text_depth", c.model.text_depth);
  fetch(j, "vocab", c.model.vocab);
  fetch(j, "max_text_len", c.model.max_text_len);
  fetch(j, "n_ctx", c.model.n_ctx);
  fetch(j, "tau", c.model.tau);
  fetch(j, "learnable_tau", c.model.learnable_tau);
  fetch(j, "prompts", c.prompts);
}

void parse_train(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "train",
             {"batch_size", "epochs", "lr_image", "lr_temporal", "seed",
              "target_accuracy"});
  fetch(j, "batch_size", c.train.batch_size);
  fetch(j, "epochs", c.train.epochs);
  fetch(j, "lr_image", c.train.lr_image);
  fetch(j, "lr_temporal", c.train.lr_temporal);
  fetch(j, "seed", c.train.seed);
  fetch(j, "target_accuracy", c.train.target_accuracy);
}

void parse_classifier(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "classifier",
             {"cell", "hidden_dim", "num_layers", "residual", "dropout",
              "batch_size", "epochs", "lr", "seed"});
  if (j.contains("cell")) {
    std::string cell;
    fetch(j, "cell", cell);
    c.classifier.cell = parse_cell_kind(cell);
  }
  fetch(j, "hidden_dim", c.classifier.hidden_dim);
  fetch(j, "num_layers", c.classifier.num_layers);
  fetch(j, "residual", c.classifier.residual);
  fetch(j, "dropout", c.classifier.dropout);
  fetch(j, "batch_size", c.classifier_train.batch_size);
  fetch(j, "epochs", c.classifier_train.epochs);
  fetch(j, "lr", c.classifier_train.lr);
  fetch(j, "seed", c.classifier_train.seed);
}

void parse_data(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "data",
             {"seed", "per_class", "subjects_per_cohort", "image_size",
              "channels", "clip_frames", "spatial_freq", "base_amplitude",
              "osc_amplitude", "period", "noise_sigma", "damp_static",
              "damp_dynamic", "records_per_cohort", "diag_mean_hc",
              "diag_mean_pd", "offdiag_mean", "intensity_sigma"});
  fetch(j, "seed", c.data.seed);
  fetch(j, "per_class", c.data.per_class);
  fetch(j, "subjects_per_cohort", c.data.subjects_per_cohort);
  fetch(j, "image_size", c.data.image_size);
  fetch(j, "channels", c.data.channels);
  fetch(j, "clip_frames", c.data.clip_frames);
  fetch(j, "spatial_freq", c.data.spatial_freq);
  fetch(j, "base_amplitude", c.data.base_amplitude);
  fetch(j, "osc_amplitude", c.data.osc_amplitude);
  fetch(j, "period", c.data.period);
  fetch(j, "noise_sigma", c.data.noise_sigma);
  fetch(j, "damp_static", c.data.damp_static);
  fetch(j, "damp_dynamic", c.data.damp_dynamic);
  fetch(j, "records_per_cohort", c.data.records_per_cohort);
  fetch(j, "diag_mean_hc", c.data.diag_mean_hc);
  fetch(j, "diag_mean_pd", c.data.diag_mean_pd);
  fetch(j, "offdiag_mean", c.data.offdiag_mean);
  fetch(j, "intensity_sigma", c.data.intensity_sigma);
}

void parse_eval(const nlohmann::json& j, RunConfig& c) {
  check_keys(j, "eval", {"averaging", "k"});
  if (j.contains("averaging")) {
    std::string avg;
    fetch(j, "averaging", avg);
    c.eval.averaging = parse_averaging(avg);
  }
  fetch(j, "k", c.eval.k);
  if (c.eval.k < 2) throw ConfigError("eval.k must be at least 2");
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
  RunConfig config;
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(doc, "(root)", {"model", "train", "classifier", "data", "eval"});
  if (doc.contains("model")) parse_model(doc.at("model"), config);
  if (doc.contains("train")) parse_train(doc.at("train"), config);
  if (doc.contains("classifier")) parse_classifier(doc.at("classifier"), config);
  if (doc.contains("data")) parse_data(doc.at("data"), config);
  if (doc.contains("eval")) parse_eval(doc.at("eval"), config);
  config.model.validate();
  config.data.validate();
  return config;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path) {
  if (!path) return RunConfig{};
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path->string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path->string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

nlohmann::ordered_json run_config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = {{"frames", c.model.frames},
                {"image_size", c.model.image_size},
                {"channels", c.model.channels},
                {"patch_size", c.model.patch_size},
                {"embed_dim", c.model.embed_dim},
                {"vit_depth", c.model.vit_depth},
                {"mhsa_heads", c.model.mhsa_heads},
                {"temporal_depth", c.model.temporal_depth},
                {"text_depth", c.model.text_depth},
                {"vocab", c.model.vocab},
                {"max_text_len", c.model.max_text_len},
                {"n_ctx", c.model.n_ctx},
                {"tau", c.model.tau},
                {"learnable_tau", c.model.learnable_tau},
                {"prompts", c.prompts}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"lr_image", c.train.lr_image},
                {"lr_temporal", c.train.lr_temporal},
                {"seed", c.train.seed},
                {"target_accuracy", c.train.target_accuracy}};
  j["classifier"] = {{"cell", std::string(to_string(c.classifier.cell))},
                     {"hidden_dim", c.classifier.hidden_dim},
                     {"num_layers", c.classifier.num_layers},
                     {"residual", c.classifier.residual},
                     {"dropout", c.classifier.dropout},
                     {"batch_size", c.classifier_train.batch_size},
                     {"epochs", c.classifier_train.epochs},
                     {"lr", c.classifier_train.lr},
                     {"seed", c.classifier_train.seed}};
  j["data"] = {{"seed", c.data.seed},
               {"per_class", c.data.per_class},
               {"subjects_per_cohort", c.data.subjects_per_cohort},
               {"image_size", c.data.image_size},
               {"channels", c.data.channels},
               {"clip_frames", c.data.clip_frames},
               {"spatial_freq", c.data.spatial_freq},
               {"base_amplitude", c.data.base_amplitude},
               {"osc_amplitude", c.data.osc_amplitude},
               {"period", c.data.period},
               {"noise_sigma", c.data.noise_sigma},
               {"damp_static", c.data.damp_static},
               {"damp_dynamic", c.data.damp_dynamic},
               {"records_per_cohort", c.data.records_per_cohort},
               {"diag_mean_hc", c.data.diag_mean_hc},
               {"diag_mean_pd", c.data.diag_mean_pd},
               {"offdiag_mean", c.data.offdiag_mean},
               {"intensity_sigma", c.data.intensity_sigma}};
  j["eval"] = {{"averaging", std::string(to_string(c.eval.averaging))},
               {"k", c.eval.k}};
  return j;
}

nlohmann::ordered_json report_envelope(const RunConfig& config) {
  nlohmann::ordered_json j;
  j["version"] = std::string(kVersion);
  j["config"] = run_config_json(config);
  return j;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("HYPOMIMIA_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw ConfigError("HYPOMIMIA_SEED is not an unsigned integer: " +
                        std::string(env));
    }
    return static_cast<std::uint64_t>(v);
  }
  return config_seed;
}

}  // namespace hypomimia::cli
