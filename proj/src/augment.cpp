#include "augment.hpp"

#include "error.hpp"

namespace gridvit {

namespace {

Tensor flip_horizontal(const Tensor& s) {
  const int h = s.dim(0), w = s.dim(1);
  Tensor out({h, w});
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = s.at(r, w - 1 - c);
  return out;
}

// Counter-clockwise quarter turn; square slices only.
Tensor rotate90(const Tensor& s) {
  const int n = s.dim(0);
  Tensor out({n, n});
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out.at(n - 1 - c, r) = s.at(r, c);
  return out;
}

}  // namespace

GridSample augment_with(const GridSample& sample, bool flip, int quarter_turns) {
  const Tensor& img = sample.image;
  if (img.rank() != 3) {
    fail(ErrorCode::validation, "augment expects a {h,w,C} image, got " +
                                    img.shape_str());
  }
  const int channels = img.dim(2);
  const int k = sample.k;
  const int side = grid_side(k);
  const int sh = img.dim(0) / side;
  const int sw = img.dim(1) / side;
  int r = ((quarter_turns % 4) + 4) % 4;
  if (sh != sw && (r % 2) == 1) r = r - 1;  // odd turns need square slices

  GridSample out = sample;
  for (int c = 0; c < channels; ++c) {
    std::vector<Tensor> slices = unpack_grid(grid_channel(img, c), k);
    for (Tensor& s : slices) {
      if (flip) s = flip_horizontal(s);
      for (int t = 0; t < r; ++t) s = rotate90(s);
    }
    Tensor packed = pack_grid(slices);
    for (int row = 0; row < img.dim(0); ++row)
      for (int col = 0; col < img.dim(1); ++col)
        out.image.at(row, col, c) = packed.at(row, col);
  }
  return out;
}

GridSample augment(const GridSample& sample, Rng& rng) {
  const bool flip = rng.bernoulli(0.5);
  const int r = rng.uniform_int(4);
  return augment_with(sample, flip, r);
}

}  // namespace gridvit
