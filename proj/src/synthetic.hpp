#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

namespace gridvit {

// Generator recipe for a three-class labeled volume set. Classes are made
// pairwise separable by construction: lesion radius and contrast both grow
// with the grade, class 0 has no lesion at all. The seed fully determines
// every byte of the output.
struct SyntheticSpec {
  int cases_per_class = 20;
  int dz = 12;
  int h = 32;
  int w = 32;
  std::array<double, 3> lesion_radius = {0.0, 5.0, 9.0};
  std::array<double, 3> lesion_contrast = {0.0, 0.5, 1.0};
  double noise = 0.005;
  std::uint64_t seed = 7;

  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::string& path);
nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);

struct SynthResult {
  std::string manifest_path;
  std::array<int, 3> per_class = {0, 0, 0};
};

// Writes <out_dir>/volumes/*.rvf and <out_dir>/manifest.jsonl.
SynthResult gen_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace gridvit
