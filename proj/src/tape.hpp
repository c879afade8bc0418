#pragma once

#include <functional>
#include <vector>

#include "ops.hpp"
#include "tensor.hpp"

namespace gridvit {

// One differentiable value on the tape: the forward tensor plus a gradient
// of identical shape. Gradients are allocated lazily and accumulate
// additively; leaf gradients persist across backward passes until
// zero_grad().
template <class S>
struct DualValueT {
  TensorT<S> value;
  TensorT<S> gradient;  // empty until first accumulation
  bool is_leaf = false;
  bool needs_grad = false;
};

// Reverse-mode differentiation via an explicit operation tape. Ops append
// nodes in evaluation order, so walking the tape backwards is a valid
// reverse topological order.
template <class S>
class TapeT {
 public:
  using Id = int;

  Id leaf(TensorT<S> value, bool needs_grad);

  Id matmul(Id a, Id b);
  Id matmul_nt(Id a, Id b);  // a * b^T
  Id add(Id a, Id b);
  Id add_row_broadcast(Id x, Id bias);
  Id scale(Id x, S c);
  Id prepend_row(Id row, Id mat);
  Id take_row(Id x, int r);
  Id slice_cols(Id x, int c0, int c1);
  Id concat_cols(const std::vector<Id>& xs);
  Id layer_norm(Id x, Id gamma, Id beta, S eps = S(1e-6));
  Id gelu(Id x);
  Id softmax_rows(Id x);
  Id cross_entropy(Id logits, std::vector<int> labels);

  // Seeds d(root)/d(root) = 1 and accumulates into every leaf that needs
  // gradients. root must hold exactly one element.
  void backward(Id root);

  const TensorT<S>& value(Id id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }
  // Accumulated gradient (zeros tensor if never touched).
  TensorT<S> grad(Id id) const;
  void zero_grad();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node : DualValueT<S> {
    // Propagates this node's gradient into its parents. Receives the tape
    // and the node's own id.
    std::function<void(TapeT&, Id)> backprop;
  };

  Id push(TensorT<S> value, bool needs_grad, std::function<void(TapeT&, Id)> fn);
  TensorT<S>& ensure_grad(Id id);
  void accumulate(Id id, const TensorT<S>& g);
  bool wants(Id id) const {
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
  }
  const TensorT<S>& out_grad(Id id) const {
    return nodes_[static_cast<std::size_t>(id)].gradient;
  }

  std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using Tape64 = TapeT<double>;

}  // namespace gridvit
