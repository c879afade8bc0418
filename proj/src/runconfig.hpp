#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "model.hpp"
#include "train.hpp"

namespace gridvit {

// One serializable source of truth for a run: model and train settings,
// data locations, the fusion mode under test, fold count, and the top-level
// seed every random stream derives from.
struct RunConfig {
  std::uint64_t seed = 7;
  FusionMode mode = FusionMode::early;
  int folds = 10;
  std::string manifest;
  std::string out_dir;
  ModelConfig model;
  TrainConfig train;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& c);

}  // namespace gridvit
