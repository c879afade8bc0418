#pragma once

#include <string>
#include <utility>

#include "model.hpp"

namespace gridvit {

// GVCK container: "GVCK1\n", one JSON header line
// {"config": {...}, "tensors": [{"name","shape","offset"}]}, then the
// concatenated little-endian 32-bit float payloads at the stated offsets
// (relative to the end of the header line).
void save_checkpoint(const ModelParams& params, const ModelConfig& config,
                     const std::string& path);

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace gridvit
