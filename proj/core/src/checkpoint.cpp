#include "hypomimia/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hypomimia/errors.hpp"

namespace hypomimia {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64_le(std::string& out, double d) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

double get_f64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return std::bit_cast<double>(v);
}

nlohmann::json expression_config_json(const ExpressionModelConfig& c) {
  return {{"frames", c.frames},
          {"image_size", c.image_size},
          {"channels", c.channels},
          {"patch_size", c.patch_size},
          {"embed_dim", c.embed_dim},
          {"vit_depth", c.vit_depth},
          {"mhsa_heads", c.mhsa_heads},
          {"temporal_depth", c.temporal_depth},
          {"text_depth", c.text_depth},
          {"vocab", c.vocab},
          {"max_text_len", c.max_text_len},
          {"n_ctx", c.n_ctx},
          {"tau", c.tau},
          {"learnable_tau", c.learnable_tau}};
}

ExpressionModelConfig expression_config_from_json(const nlohmann::json& j) {
  ExpressionModelConfig c;
  c.frames = j.at("frames").get<std::size_t>();
  c.image_size = j.at("image_size").get<std::size_t>();
  c.channels = j.at("channels").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.vit_depth = j.at("vit_depth").get<std::size_t>();
  c.mhsa_heads = j.at("mhsa_heads").get<std::size_t>();
  c.temporal_depth = j.at("temporal_depth").get<std::size_t>();
  c.text_depth = j.at("text_depth").get<std::size_t>();
  c.vocab = j.at("vocab").get<std::size_t>();
  c.max_text_len = j.at("max_text_len").get<std::size_t>();
  c.n_ctx = j.at("n_ctx").get<std::size_t>();
  c.tau = j.at("tau").get<double>();
  c.learnable_tau = j.at("learnable_tau").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const ParameterStore& store, const std::string& meta_json) {
  nlohmann::json manifest;
  try {
    manifest["meta"] = nlohmann::json::parse(meta_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint meta is not valid JSON: ") + e.what());
  }
  nlohmann::json params = nlohmann::json::array();
  for (ParamId id : store.all()) {
    params.push_back({{"name", store.name(id)},
                      {"shape", store.value(id).shape()}});
  }
  manifest["params"] = std::move(params);
  std::string manifest_bytes = manifest.dump();

  std::string bytes;
  bytes.append(kCheckpointMagic, 4);
  put_u32_le(bytes, static_cast<std::uint32_t>(manifest_bytes.size()));
  bytes.append(manifest_bytes);
  for (ParamId id : store.all()) {
    for (double v : store.value(id).data()) put_f64_le(bytes, v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw DataError(path.string() + ": bad checkpoint magic at offset 0");
  }
  if (bytes.size() < 8) {
    throw DataError(path.string() + ": truncated manifest length at offset 4");
  }
  std::size_t manifest_len = get_u32_le(p + 4);
  if (bytes.size() < 8 + manifest_len) {
    throw DataError(path.string() + ": truncated manifest at offset 8");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(8, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad manifest JSON: " + e.what());
  }
  CheckpointData data;
  data.meta_json = manifest.at("meta").dump();
  std::size_t offset = 8 + manifest_len;
  for (const auto& entry : manifest.at("params")) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<std::size_t> shape =
        entry.at("shape").get<std::vector<std::size_t>>();
    Tensor t(shape, 0.0);
    if (offset + t.numel() * 8 > bytes.size()) {
      throw DataError(path.string() + ": parameter data truncated at offset " +
                      std::to_string(offset) + " for " + name);
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
      t[i] = get_f64_le(p + offset);
      offset += 8;
    }
    data.params.emplace_back(std::move(name), std::move(t));
  }
  if (offset != bytes.size()) {
    throw DataError(path.string() + ": trailing bytes at offset " +
                    std::to_string(offset));
  }
  return data;
}

void load_into(ParameterStore& store, const CheckpointData& data) {
  if (data.params.size() != store.count()) {
    throw DataError("checkpoint holds " + std::to_string(data.params.size()) +
                    " parameters, model has " + std::to_string(store.count()));
  }
  std::vector<ParamId> ids = store.all();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& [name, tensor] = data.params[i];
    if (store.name(ids[i]) != name) {
      throw DataError("checkpoint parameter " + std::to_string(i) + " is '" +
                      name + "', model expects '" + store.name(ids[i]) + "'");
    }
    if (store.value(ids[i]).shape() != tensor.shape()) {
      throw DataError("checkpoint parameter " + name + " has shape " +
                      tensor.shape_str() + ", model expects " +
                      store.value(ids[i]).shape_str());
    }
    store.value(ids[i]) = tensor;
  }
}

void save_expression_model(const std::filesystem::path& path,
                           const ExpressionModel& model) {
  nlohmann::json meta;
  meta["kind"] = "expression";
  meta["config"] = expression_config_json(model.config());
  meta["prompts"] = model.prompts();
  save_checkpoint(path, model.params(), meta.dump());
}

ExpressionModel load_expression_model(const std::filesystem::path& path) {
  CheckpointData data = load_checkpoint(path);
  nlohmann::json meta = nlohmann::json::parse(data.meta_json);
  if (meta.value("kind", "") != "expression") {
    throw DataError(path.string() + ": not an expression model checkpoint");
  }
  ExpressionModelConfig config = expression_config_from_json(meta.at("config"));
  PromptSet prompts;
  const auto& prompt_list = meta.at("prompts");
  if (prompt_list.size() != prompts.size()) {
    throw DataError(path.string() + ": checkpoint must carry four prompts");
  }
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    prompts[i] = prompt_list.at(i).get<std::string>();
  }
  // Seed is irrelevant: every parameter is overwritten from the file.
  ExpressionModel model(config, prompts, 0);
  load_into(model.params(), data);
  return model;
}

void save_classifier(const std::filesystem::path& path,
                     const DiagnosisClassifier& model) {
  const RnnConfig& c = model.config();
  nlohmann::json meta;
  meta["kind"] = "classifier";
  meta["config"] = {{"cell", to_string(c.cell)},
                    {"input_dim", c.input_dim},
                    {"hidden_dim", c.hidden_dim},
                    {"num_layers", c.num_layers},
                    {"residual", c.residual},
                    {"dropout", c.dropout}};
  save_checkpoint(path, model.params(), meta.dump());
}

DiagnosisClassifier load_classifier(const std::filesystem::path& path) {
  CheckpointData data = load_checkpoint(path);
  nlohmann::json meta = nlohmann::json::parse(data.meta_json);
  if (meta.value("kind", "") != "classifier") {
    throw DataError(path.string() + ": not a classifier checkpoint");
  }
  const nlohmann::json& j = meta.at("config");
  RnnConfig config;
  config.cell = parse_cell_kind(j.at("cell").get<std::string>());
  config.input_dim = j.at("input_dim").get<std::size_t>();
  config.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  config.num_layers = j.at("num_layers").get<std::size_t>();
  config.residual = j.at("residual").get<bool>();
  config.dropout = j.at("dropout").get<double>();
  DiagnosisClassifier model(config, 0);
  load_into(model.params(), data);
  return model;
}

}  // namespace hypomimia
