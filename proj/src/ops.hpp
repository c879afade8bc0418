#pragma once

#include <vector>

#include "tensor.hpp"

namespace gridvit {

// Plain forward tensor operations. The tape (tape.hpp) wraps these to make
// them differentiable; they are also the unit-testable contract surface.

// Standard matrix product of a [m x k] and b [k x n].
template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);

// a [m x k] times b^T where b is [n x k]; result [m x n].
template <class S>
TensorT<S> matmul_nt(const TensorT<S>& a, const TensorT<S>& b);

// a^T [k x m]^T times b [k x n]; result [m x n].
template <class S>
TensorT<S> matmul_tn(const TensorT<S>& a, const TensorT<S>& b);

template <class S>
TensorT<S> transpose(const TensorT<S>& a);

// Numerically stable softmax over one axis; rows sum to 1.
template <class S>
TensorT<S> softmax(const TensorT<S>& x, int axis);

// Per-row (last axis) normalization to zero mean / unit variance followed
// by the affine map gamma * x_hat + beta.
template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma,
                      const TensorT<S>& beta, S eps = S(1e-6));

// Exact Gaussian-error-function form: 0.5 * x * (1 + erf(x / sqrt(2))).
template <class S>
TensorT<S> gelu(const TensorT<S>& x);

// x [rows x d_in] * w [d_in x d_out] + b [d_out] broadcast over rows.
template <class S>
TensorT<S> linear_forward(const TensorT<S>& x, const TensorT<S>& w,
                          const TensorT<S>& b);

// Mean over the batch of -log softmax(logits)[label].
template <class S>
double cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels);

// d(cross_entropy)/d(logits) = (softmax - onehot) / batch. Used by the tape.
template <class S>
TensorT<S> cross_entropy_grad(const TensorT<S>& logits,
                              const std::vector<int>& labels);

// Elementwise helpers.
template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <class S>
TensorT<S> scale(const TensorT<S>& a, S c);

// BLAS thread control for the gemm-backed products above.
void set_blas_threads(int n);

}  // namespace gridvit
