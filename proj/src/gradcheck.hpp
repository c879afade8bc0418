#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace gridvit {

// Builds a scalar loss on the given tape from parameter leaves created in
// the same order as the params vector, and returns the loss node id.
using LossBuilder = std::function<Tape64::Id(Tape64&, const std::vector<Tape64::Id>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  int coords_checked = 0;
  int worst_param = -1;        // index into params
  std::size_t worst_coord = 0;
};

// Central-difference check of the tape's reverse-mode gradients, run in
// 64-bit. Samples at least min_coords coordinates, covering every parameter
// tensor, and returns max |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8). The conventional step is h = 1e-5.
GradCheckReport grad_check(const LossBuilder& f, std::vector<Tensor64> params,
                           double h, int min_coords, Rng& rng);

inline GradCheckReport grad_check(const LossBuilder& f,
                                  std::vector<Tensor64> params) {
  Rng rng(0x6c0deULL);
  return grad_check(f, std::move(params), 1e-5, 64, rng);
}

}  // namespace gridvit
