#include "tape.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace gridvit {

template <class S>
typename TapeT<S>::Id TapeT<S>::push(TensorT<S> value, bool needs_grad,
                                     std::function<void(TapeT&, Id)> fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backprop = std::move(fn);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

template <class S>
TensorT<S>& TapeT<S>::ensure_grad(Id id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.gradient.empty()) n.gradient = TensorT<S>(n.value.shape());
  return n.gradient;
}

template <class S>
void TapeT<S>::accumulate(Id id, const TensorT<S>& g) {
  if (!wants(id)) return;
  TensorT<S>& dst = ensure_grad(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

template <class S>
TensorT<S> TapeT<S>::grad(Id id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.gradient.empty()) return TensorT<S>(n.value.shape());
  return n.gradient;
}

template <class S>
void TapeT<S>::zero_grad() {
  for (Node& n : nodes_) n.gradient = TensorT<S>();
}

template <class S>
typename TapeT<S>::Id TapeT<S>::leaf(TensorT<S> value, bool needs_grad) {
  Id id = push(std::move(value), needs_grad, nullptr);
  nodes_[static_cast<std::size_t>(id)].is_leaf = true;
  return id;
}

template <class S>
typename TapeT<S>::Id TapeT<S>::matmul(Id a, Id b) {
  TensorT<S> y = gridvit::matmul(value(a), value(b));
  return push(std::move(y), wants(a) || wants(b), [a, b](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    if (t.wants(a)) t.accumulate(a, gridvit::matmul_nt(gy, t.value(b)));
    if (t.wants(b)) t.accumulate(b, gridvit::matmul_tn(t.value(a), gy));
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::matmul_nt(Id a, Id b) {
  TensorT<S> y = gridvit::matmul_nt(value(a), value(b));
  return push(std::move(y), wants(a) || wants(b), [a, b](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    if (t.wants(a)) t.accumulate(a, gridvit::matmul(gy, t.value(b)));
    if (t.wants(b)) t.accumulate(b, gridvit::matmul_tn(gy, t.value(a)));
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::add(Id a, Id b) {
  TensorT<S> y = gridvit::add(value(a), value(b));
  return push(std::move(y), wants(a) || wants(b), [a, b](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    t.accumulate(a, gy);
    t.accumulate(b, gy);
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::add_row_broadcast(Id x, Id bias) {
  TensorT<S> y = value(x);
  const TensorT<S>& b = value(bias);
  if (y.rank() != 2 || b.rank() != 1 || b.dim(0) != y.dim(1)) {
    fail(ErrorCode::dimension_mismatch,
         "add_row_broadcast: " + y.shape_str() + " with bias " + b.shape_str());
  }
  const int rows = y.dim(0), cols = y.dim(1);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) y.at(i, j) += b[static_cast<std::size_t>(j)];
  return push(std::move(y), wants(x) || wants(bias),
              [x, bias, rows, cols](TapeT& t, Id self) {
                const TensorT<S>& gy = t.out_grad(self);
                t.accumulate(x, gy);
                if (t.wants(bias)) {
                  TensorT<S> gb({cols});
                  for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                      gb[static_cast<std::size_t>(j)] += gy.at(i, j);
                  t.accumulate(bias, gb);
                }
              });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::scale(Id x, S c) {
  TensorT<S> y = gridvit::scale(value(x), c);
  return push(std::move(y), wants(x), [x, c](TapeT& t, Id self) {
    t.accumulate(x, gridvit::scale(t.out_grad(self), c));
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::prepend_row(Id row, Id mat) {
  const TensorT<S>& r = value(row);
  const TensorT<S>& m = value(mat);
  if (m.rank() != 2 || static_cast<int>(r.size()) != m.dim(1)) {
    fail(ErrorCode::dimension_mismatch,
         "prepend_row: row " + r.shape_str() + " onto " + m.shape_str());
  }
  const int n = m.dim(0), d = m.dim(1);
  TensorT<S> y({n + 1, d});
  for (int j = 0; j < d; ++j) y.at(0, j) = r[static_cast<std::size_t>(j)];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) y.at(i + 1, j) = m.at(i, j);
  return push(std::move(y), wants(row) || wants(mat),
              [row, mat, n, d](TapeT& t, Id self) {
                const TensorT<S>& gy = t.out_grad(self);
                if (t.wants(row)) {
                  TensorT<S> gr(t.value(row).shape());
                  for (int j = 0; j < d; ++j) gr[static_cast<std::size_t>(j)] = gy.at(0, j);
                  t.accumulate(row, gr);
                }
                if (t.wants(mat)) {
                  TensorT<S> gm({n, d});
                  for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) gm.at(i, j) = gy.at(i + 1, j);
                  t.accumulate(mat, gm);
                }
              });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::take_row(Id x, int r) {
  const TensorT<S>& m = value(x);
  if (m.rank() != 2 || r < 0 || r >= m.dim(0)) {
    fail(ErrorCode::validation,
         "take_row " + std::to_string(r) + " out of " + m.shape_str());
  }
  const int d = m.dim(1);
  TensorT<S> y({1, d});
  for (int j = 0; j < d; ++j) y.at(0, j) = m.at(r, j);
  return push(std::move(y), wants(x), [x, r, d](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    TensorT<S> gx(t.value(x).shape());
    for (int j = 0; j < d; ++j) gx.at(r, j) = gy.at(0, j);
    t.accumulate(x, gx);
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::slice_cols(Id x, int c0, int c1) {
  const TensorT<S>& m = value(x);
  if (m.rank() != 2 || c0 < 0 || c1 > m.dim(1) || c0 >= c1) {
    fail(ErrorCode::validation, "slice_cols [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") of " + m.shape_str());
  }
  const int rows = m.dim(0), w = c1 - c0;
  TensorT<S> y({rows, w});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < w; ++j) y.at(i, j) = m.at(i, c0 + j);
  return push(std::move(y), wants(x), [x, c0, rows, w](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    TensorT<S> gx(t.value(x).shape());
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < w; ++j) gx.at(i, c0 + j) = gy.at(i, j);
    t.accumulate(x, gx);
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::concat_cols(const std::vector<Id>& xs) {
  if (xs.empty()) fail(ErrorCode::validation, "concat_cols of nothing");
  const int rows = value(xs[0]).dim(0);
  int total = 0;
  bool ng = false;
  for (Id id : xs) {
    const TensorT<S>& m = value(id);
    if (m.rank() != 2 || m.dim(0) != rows) {
      fail(ErrorCode::dimension_mismatch,
           "concat_cols row mismatch at " + m.shape_str());
    }
    total += m.dim(1);
    ng = ng || wants(id);
  }
  TensorT<S> y({rows, total});
  int off = 0;
  for (Id id : xs) {
    const TensorT<S>& m = value(id);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < m.dim(1); ++j) y.at(i, off + j) = m.at(i, j);
    off += m.dim(1);
  }
  std::vector<Id> parents = xs;
  return push(std::move(y), ng, [parents, rows](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    int off = 0;
    for (Id id : parents) {
      const int w = t.value(id).dim(1);
      if (t.wants(id)) {
        TensorT<S> g({rows, w});
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < w; ++j) g.at(i, j) = gy.at(i, off + j);
        t.accumulate(id, g);
      }
      off += w;
    }
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::layer_norm(Id x, Id gamma, Id beta, S eps) {
  TensorT<S> y = gridvit::layer_norm(value(x), value(gamma), value(beta), eps);
  const bool ng = wants(x) || wants(gamma) || wants(beta);
  return push(std::move(y), ng, [x, gamma, beta, eps](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    const TensorT<S>& xv = t.value(x);
    const TensorT<S>& gv = t.value(gamma);
    const int n = xv.dim(xv.rank() - 1);
    const std::size_t rows = xv.size() / static_cast<std::size_t>(n);

    TensorT<S> gx(xv.shape());
    TensorT<S> ggamma({n});
    TensorT<S> gbeta({n});
    for (std::size_t r = 0; r < rows; ++r) {
      const S* xr = xv.data() + r * static_cast<std::size_t>(n);
      const S* gyr = gy.data() + r * static_cast<std::size_t>(n);
      double mean = 0.0;
      for (int j = 0; j < n; ++j) mean += static_cast<double>(xr[j]);
      mean /= n;
      double var = 0.0;
      for (int j = 0; j < n; ++j) {
        double d = static_cast<double>(xr[j]) - mean;
        var += d * d;
      }
      var /= n;
      const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));

      // dy through the affine, then the two mean terms of the normalization.
      double sum_g = 0.0, sum_gx = 0.0;
      std::vector<double> xhat(static_cast<std::size_t>(n));
      std::vector<double> gl(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        xhat[static_cast<std::size_t>(j)] =
            (static_cast<double>(xr[j]) - mean) * inv;
        gl[static_cast<std::size_t>(j)] =
            static_cast<double>(gyr[j]) *
            static_cast<double>(gv[static_cast<std::size_t>(j)]);
        sum_g += gl[static_cast<std::size_t>(j)];
        sum_gx += gl[static_cast<std::size_t>(j)] * xhat[static_cast<std::size_t>(j)];
      }
      S* gxr = gx.data() + r * static_cast<std::size_t>(n);
      for (int j = 0; j < n; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        gxr[j] = static_cast<S>(
            inv * (gl[js] - sum_g / n - xhat[js] * sum_gx / n));
        ggamma[js] += static_cast<S>(static_cast<double>(gyr[j]) * xhat[js]);
        gbeta[js] += gyr[j];
      }
    }
    t.accumulate(x, gx);
    t.accumulate(gamma, ggamma);
    t.accumulate(beta, gbeta);
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::gelu(Id x) {
  TensorT<S> y = gridvit::gelu(value(x));
  return push(std::move(y), wants(x), [x](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    const TensorT<S>& xv = t.value(x);
    TensorT<S> gx(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = static_cast<double>(xv[i]);
      const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
      const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014326779;
      gx[i] = static_cast<S>((cdf + v * pdf) * static_cast<double>(gy[i]));
    }
    t.accumulate(x, gx);
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::softmax_rows(Id x) {
  TensorT<S> y = gridvit::softmax(value(x), value(x).rank() - 1);
  return push(std::move(y), wants(x), [x](TapeT& t, Id self) {
    const TensorT<S>& gy = t.out_grad(self);
    const TensorT<S>& yv = t.value(self);
    const int n = yv.dim(yv.rank() - 1);
    const std::size_t rows = yv.size() / static_cast<std::size_t>(n);
    TensorT<S> gx(yv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const S* yr = yv.data() + r * static_cast<std::size_t>(n);
      const S* gyr = gy.data() + r * static_cast<std::size_t>(n);
      double dot = 0.0;
      for (int j = 0; j < n; ++j)
        dot += static_cast<double>(yr[j]) * static_cast<double>(gyr[j]);
      S* gxr = gx.data() + r * static_cast<std::size_t>(n);
      for (int j = 0; j < n; ++j)
        gxr[j] = static_cast<S>(static_cast<double>(yr[j]) *
                                (static_cast<double>(gyr[j]) - dot));
    }
    t.accumulate(x, gx);
  });
}

template <class S>
typename TapeT<S>::Id TapeT<S>::cross_entropy(Id logits, std::vector<int> labels) {
  const double loss = gridvit::cross_entropy(value(logits), labels);
  TensorT<S> y = TensorT<S>::scalar(static_cast<S>(loss));
  return push(std::move(y), wants(logits),
              [logits, labels = std::move(labels)](TapeT& t, Id self) {
                const S up = t.out_grad(self)[0];
                TensorT<S> g =
                    gridvit::cross_entropy_grad(t.value(logits), labels);
                t.accumulate(logits, gridvit::scale(g, up));
              });
}

template <class S>
void TapeT<S>::backward(Id root) {
  if (value(root).size() != 1) {
    fail(ErrorCode::validation,
         "backward requires a scalar root, got " + value(root).shape_str());
  }
  ensure_grad(root)[0] += S(1);
  for (Id id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backprop || n.gradient.empty() || !n.needs_grad) continue;
    n.backprop(*this, id);
  }
  // Intermediate gradients are per-pass scratch; only leaves keep
  // accumulating so repeated passes sum their contributions.
  for (Node& n : nodes_) {
    if (!n.is_leaf) n.gradient = TensorT<S>();
  }
}

template class TapeT<float>;
template class TapeT<double>;

}  // namespace gridvit
