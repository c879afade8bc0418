#pragma once

#include <string>

#include "tensor.hpp"

namespace gridvit {

// One modality's 3-D scalar field, voxels indexed (slice z, row, col).
struct Volume {
  Tensor voxels;  // shape {dz, h, w}
  std::string modality;  // "T1" or "T2"
  std::string case_id;

  int dz() const { return voxels.dim(0); }
  int height() const { return voxels.dim(1); }
  int width() const { return voxels.dim(2); }
};

// RVF1 container: "RVF1\n", one JSON header line
// {"dz","h","w","dtype":"f32le","modality","case_id"}, then dz*h*w
// little-endian 32-bit floats in (slice, row, col) order.
void save_volume(const Volume& v, const std::string& path);
Volume load_volume(const std::string& path);

// Per-volume min-max scaling to [0,1]; a constant volume maps to all zeros.
Volume normalize_volume(const Volume& v);

}  // namespace gridvit
