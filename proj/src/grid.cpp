#include "grid.hpp"

#include <cmath>

#include "error.hpp"

namespace gridvit {

int grid_side(int k) {
  if (k < 1) fail(ErrorCode::validation, "k must be >= 1, got " + std::to_string(k));
  const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
  if (s * s != k) {
    fail(ErrorCode::validation,
         "k must be a perfect square, got " + std::to_string(k));
  }
  return s;
}

std::vector<int> extract_windows(int dz, int k, int stride) {
  if (k > dz) {
    fail(ErrorCode::validation, "volume depth " + std::to_string(dz) +
                                    " is insufficient for k = " + std::to_string(k));
  }
  if (stride < 1) fail(ErrorCode::validation, "stride must be >= 1");
  std::vector<int> starts;
  for (int s = 0; s <= dz - k; s += stride) starts.push_back(s);
  return starts;
}

int central_window(int dz, int k) {
  if (k > dz) {
    fail(ErrorCode::validation, "volume depth " + std::to_string(dz) +
                                    " is insufficient for k = " + std::to_string(k));
  }
  return (dz - k) / 2;
}

Tensor pack_grid(const std::vector<Tensor>& slices) {
  const int k = static_cast<int>(slices.size());
  const int side = grid_side(k);
  const int h = slices[0].dim(0);
  const int w = slices[0].dim(1);
  for (const Tensor& s : slices) {
    if (s.rank() != 2 || s.dim(0) != h || s.dim(1) != w) {
      fail(ErrorCode::validation,
           "grid slices must all be " + slices[0].shape_str() + ", got " +
               s.shape_str());
    }
  }
  Tensor grid({side * h, side * w});
  for (int idx = 0; idx < k; ++idx) {
    const int gr = idx / side, gc = idx % side;
    const Tensor& s = slices[static_cast<std::size_t>(idx)];
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) grid.at(gr * h + r, gc * w + c) = s.at(r, c);
  }
  return grid;
}

std::vector<Tensor> unpack_grid(const Tensor& grid, int k) {
  const int side = grid_side(k);
  if (grid.rank() != 2 || grid.dim(0) % side != 0 || grid.dim(1) % side != 0) {
    fail(ErrorCode::validation,
         "grid " + grid.shape_str() + " not divisible into " +
             std::to_string(side) + "x" + std::to_string(side) + " cells");
  }
  const int h = grid.dim(0) / side, w = grid.dim(1) / side;
  std::vector<Tensor> slices;
  slices.reserve(static_cast<std::size_t>(k));
  for (int idx = 0; idx < k; ++idx) {
    const int gr = idx / side, gc = idx % side;
    Tensor s({h, w});
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) s.at(r, c) = grid.at(gr * h + r, gc * w + c);
    slices.push_back(std::move(s));
  }
  return slices;
}

Tensor fuse_early(const Tensor& g1, const Tensor& g2) {
  if (g1.rank() != 2 || !g1.same_shape(g2)) {
    fail(ErrorCode::validation, "fuse_early extent mismatch: " + g1.shape_str() +
                                    " vs " + g2.shape_str());
  }
  const int h = g1.dim(0), w = g1.dim(1);
  Tensor out({h, w, 2});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      out.at(r, c, 0) = g1.at(r, c);
      out.at(r, c, 1) = g2.at(r, c);
    }
  return out;
}

Tensor grid_channel(const Tensor& image, int c) {
  if (image.rank() != 3 || c < 0 || c >= image.dim(2)) {
    fail(ErrorCode::validation, "no channel " + std::to_string(c) + " in " +
                                    image.shape_str());
  }
  const int h = image.dim(0), w = image.dim(1);
  Tensor out({h, w});
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w; ++col) out.at(r, col) = image.at(r, col, c);
  return out;
}

std::vector<Tensor> window_slices(const Volume& v, int window_start, int k) {
  if (window_start < 0 || window_start + k > v.dz()) {
    fail(ErrorCode::validation,
         "window [" + std::to_string(window_start) + ", " +
             std::to_string(window_start + k) + ") outside depth " +
             std::to_string(v.dz()));
  }
  std::vector<Tensor> slices;
  slices.reserve(static_cast<std::size_t>(k));
  for (int z = 0; z < k; ++z) {
    Tensor s({v.height(), v.width()});
    for (int r = 0; r < v.height(); ++r)
      for (int c = 0; c < v.width(); ++c)
        s.at(r, c) = v.voxels.at(window_start + z, r, c);
    slices.push_back(std::move(s));
  }
  return slices;
}

}  // namespace gridvit
