#include "runconfig.hpp"

#include <filesystem>
#include <fstream>

#include "error.hpp"

namespace gridvit {

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mode")) c.mode = fusion_from_name(j.at("mode").get<std::string>());
    if (j.contains("folds")) c.folds = j.at("folds").get<int>();
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("manifest")) c.manifest = d.at("manifest").get<std::string>();
      if (d.contains("out_dir")) c.out_dir = d.at("out_dir").get<std::string>();
    }
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  } catch (const Error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config, std::string("bad run config: ") + e.what());
  }
  // The data mode dictates the model wiring; keep them in one place.
  c.model.fusion = c.mode;
  c.model.validate();
  c.train.seed = c.seed;
  if (c.folds < 2) fail(ErrorCode::config, "run config: folds must be >= 2");
  if (c.manifest.empty()) {
    fail(ErrorCode::config, "run config: missing key data.manifest");
  }
  if (!std::filesystem::exists(c.manifest)) {
    fail(ErrorCode::config,
         "run config: data.manifest path '" + c.manifest + "' does not exist");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open run config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config,
         "run config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json run_config_to_json(const RunConfig& c) {
  return nlohmann::json{
      {"seed", c.seed},
      {"mode", fusion_name(c.mode)},
      {"folds", c.folds},
      {"data", {{"manifest", c.manifest}, {"out_dir", c.out_dir}}},
      {"model", model_config_to_json(c.model)},
      {"train", train_config_to_json(c.train)},
  };
}

}  // namespace gridvit
