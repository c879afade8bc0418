#include "adam.hpp"

#include <cmath>

#include "error.hpp"

namespace gridvit {

AdamState adam_init(const std::vector<NamedParam>& params, AdamConfig cfg) {
  if (cfg.lr < 0.0f || cfg.eps <= 0.0f || cfg.beta1 <= 0.0f ||
      cfg.beta1 >= 1.0f || cfg.beta2 <= 0.0f || cfg.beta2 >= 1.0f) {
    fail(ErrorCode::validation, "adam hyperparameters out of range");
  }
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const NamedParam& p : params) {
    st.m.emplace_back(p.tensor->shape());
    st.v.emplace_back(p.tensor->shape());
  }
  return st;
}

void adam_step(const std::vector<NamedParam>& params,
               const std::vector<Tensor>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    fail(ErrorCode::validation, "adam_step parameter/gradient/state count mismatch");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].tensor->same_shape(grads[p])) {
      fail(ErrorCode::dimension_mismatch,
           "gradient shape " + grads[p].shape_str() + " does not match parameter " +
               params[p].name + " " + params[p].tensor->shape_str());
    }
    if (!grads[p].all_finite()) {
      fail(ErrorCode::train_abort,
           "non-finite gradient for parameter " + params[p].name +
               "; update rejected at step " + std::to_string(state.step + 1));
    }
  }

  state.step += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = state.cfg.lr;
  const double eps = state.cfg.eps;

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p].tensor;
    const Tensor& g = grads[p];
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double mhat = mi / corr1;
      const double vhat = vi / corr2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

}  // namespace gridvit
