#include "checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "error.hpp"

namespace gridvit {

namespace {

constexpr char kMagic[] = "GVCK1\n";

}  // namespace

void save_checkpoint(const ModelParams& params, const ModelConfig& config,
                     const std::string& path) {
  nlohmann::json tensors = nlohmann::json::array();
  std::int64_t offset = 0;
  for_each_param(params, [&](const std::string& name, const Tensor& t) {
    if (!t.all_finite()) {
      fail(ErrorCode::non_finite, "refusing to save non-finite tensor '" + name + "'");
    }
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += static_cast<std::int64_t>(t.size() * sizeof(float));
  });
  nlohmann::json header = {{"config", model_config_to_json(config)},
                           {"tensors", tensors}};

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open checkpoint '" + path + "' for writing");
  out.write(kMagic, 6);
  const std::string hs = header.dump();
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.put('\n');
  for_each_param(params, [&](const std::string&, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  });
  if (!out) fail(ErrorCode::io, "short write to checkpoint '" + path + "'");
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint '" + path + "'");

  char magic[6];
  in.read(magic, 6);
  if (in.gcount() != 6 || std::memcmp(magic, kMagic, 6) != 0) {
    fail(ErrorCode::bad_magic, "'" + path + "' is not a GVCK1 checkpoint");
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    fail(ErrorCode::truncated, "'" + path + "' ends before the header line");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, "bad GVCK header in '" + path + "': " + e.what());
  }

  ModelConfig config;
  struct Entry {
    std::vector<int> shape;
    std::int64_t offset = 0;
  };
  std::unordered_map<std::string, Entry> entries;
  try {
    config = model_config_from_json(header.at("config"));
    for (const auto& t : header.at("tensors")) {
      Entry e;
      e.shape = t.at("shape").get<std::vector<int>>();
      e.offset = t.at("offset").get<std::int64_t>();
      entries.emplace(t.at("name").get<std::string>(), std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, "incomplete GVCK header in '" + path + "': " + e.what());
  }

  const std::streampos payload_start = in.tellg();
  ModelParams params = zero_params(config);
  std::size_t expected_count = 0;
  for_each_param(params, [&](const std::string& name, Tensor& t) {
    ++expected_count;
    auto it = entries.find(name);
    if (it == entries.end()) {
      fail(ErrorCode::shape_contradiction,
           "checkpoint '" + path + "' is missing tensor '" + name +
               "' required by its stored config");
    }
    if (it->second.shape != t.shape()) {
      std::string claimed = "[";
      for (std::size_t i = 0; i < it->second.shape.size(); ++i) {
        if (i) claimed += "x";
        claimed += std::to_string(it->second.shape[i]);
      }
      claimed += "]";
      fail(ErrorCode::shape_contradiction,
           "checkpoint tensor '" + name + "' has shape " + claimed +
               " but the stored config requires " + t.shape_str());
    }
    in.seekg(payload_start + static_cast<std::streamoff>(it->second.offset));
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != t.size() * sizeof(float)) {
      fail(ErrorCode::truncated, "checkpoint tensor '" + name +
                                     "' is truncated in '" + path + "'");
    }
    in.clear();
    if (!t.all_finite()) {
      fail(ErrorCode::non_finite,
           "checkpoint tensor '" + name + "' contains non-finite values");
    }
  });
  if (entries.size() != expected_count) {
    fail(ErrorCode::shape_contradiction,
         "checkpoint '" + path + "' carries " + std::to_string(entries.size()) +
             " tensors but the stored config defines " +
             std::to_string(expected_count));
  }
  return {std::move(params), config};
}

}  // namespace gridvit
