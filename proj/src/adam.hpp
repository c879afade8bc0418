#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace gridvit {

struct AdamConfig {
  float lr = 0.003f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Named view of a trainable tensor, so optimizer diagnostics can say which
// parameter misbehaved.
struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
};

// First/second moment state per parameter, step counter, and hyperparameters.
struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  AdamConfig cfg;
};

AdamState adam_init(const std::vector<NamedParam>& params, AdamConfig cfg);

// Standard Adam update with bias correction. Rejects non-finite gradients,
// naming the offending parameter. grads must parallel params.
void adam_step(const std::vector<NamedParam>& params,
               const std::vector<Tensor>& grads, AdamState& state);

}  // namespace gridvit
