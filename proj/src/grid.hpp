#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"
#include "volume.hpp"

namespace gridvit {

// One packed training/inference image: (sqrt(k)*H) x (sqrt(k)*W) x C with
// its label and provenance. C is 2 for a fused T1+T2 sample, 1 per modality.
struct GridSample {
  Tensor image;  // {grid_h, grid_w, C}
  int label = 0;
  std::string case_id;
  int window_start = 0;
  int k = 0;
};

// Returns floor(sqrt(k)) iff k is a perfect square, otherwise fails.
int grid_side(int k);

// Start indices 0, stride, ... capped at dz - k.
std::vector<int> extract_windows(int dz, int k, int stride = 1);

// floor((dz - k) / 2); ties break toward the lower index.
int central_window(int dz, int k);

// Packs k equally sized H x W slices row-major into a sqrt(k) x sqrt(k)
// mosaic: grid cell (r, c) holds slice r*sqrt(k) + c.
Tensor pack_grid(const std::vector<Tensor>& slices);

// Inverse of pack_grid.
std::vector<Tensor> unpack_grid(const Tensor& grid, int k);

// Channel 0 = T1 grid, channel 1 = T2 grid.
Tensor fuse_early(const Tensor& g1, const Tensor& g2);

// Projects channel c out of a {h, w, C} image.
Tensor grid_channel(const Tensor& image, int c);

// k consecutive slices of a volume starting at window_start, each {H, W}.
std::vector<Tensor> window_slices(const Volume& v, int window_start, int k);

}  // namespace gridvit
