#include "ops.hpp"

#include <cblas-openblas.h>

#include <cmath>
#include <string>

extern "C" void openblas_set_num_threads(int);

namespace gridvit {

void set_blas_threads(int n) { openblas_set_num_threads(n < 1 ? 1 : n); }

namespace {

template <class S>
void check_2d(const TensorT<S>& t, const char* who) {
  if (t.rank() != 2) {
    fail(ErrorCode::dimension_mismatch,
         std::string(who) + " expects a 2-D tensor, got " + t.shape_str());
  }
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k,
          const float* a, int lda, const float* b, int ldb, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, 1.0f, a, lda, b, ldb, 0.0f, c,
              ldc);
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k,
          const double* a, int lda, const double* b, int ldb, double* c,
          int ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, 1.0, a, lda, b, ldb, 0.0, c, ldc);
}

}  // namespace

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    fail(ErrorCode::dimension_mismatch,
         "matmul inner extents differ: " + a.shape_str() + " vs " +
             b.shape_str());
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  TensorT<S> c({m, n});
  gemm(CblasNoTrans, CblasNoTrans, m, n, k, a.data(), k, b.data(), n, c.data(),
       n);
  return c;
}

template <class S>
TensorT<S> matmul_nt(const TensorT<S>& a, const TensorT<S>& b) {
  check_2d(a, "matmul_nt");
  check_2d(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    fail(ErrorCode::dimension_mismatch,
         "matmul_nt inner extents differ: " + a.shape_str() + " vs " +
             b.shape_str());
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  TensorT<S> c({m, n});
  gemm(CblasNoTrans, CblasTrans, m, n, k, a.data(), k, b.data(), k, c.data(),
       n);
  return c;
}

template <class S>
TensorT<S> matmul_tn(const TensorT<S>& a, const TensorT<S>& b) {
  check_2d(a, "matmul_tn");
  check_2d(b, "matmul_tn");
  if (a.dim(0) != b.dim(0)) {
    fail(ErrorCode::dimension_mismatch,
         "matmul_tn inner extents differ: " + a.shape_str() + " vs " +
             b.shape_str());
  }
  const int m = a.dim(1), k = a.dim(0), n = b.dim(1);
  TensorT<S> c({m, n});
  gemm(CblasTrans, CblasNoTrans, m, n, k, a.data(), m, b.data(), n, c.data(),
       n);
  return c;
}

template <class S>
TensorT<S> transpose(const TensorT<S>& a) {
  check_2d(a, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  TensorT<S> out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

template <class S>
TensorT<S> softmax(const TensorT<S>& x, int axis) {
  if (axis < 0 || axis >= x.rank()) {
    fail(ErrorCode::validation,
         "softmax axis " + std::to_string(axis) + " out of range for " +
             x.shape_str());
  }
  const int n = x.dim(axis);
  std::size_t inner = 1, outer = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x.dim(i));
  for (int i = axis + 1; i < x.rank(); ++i)
    inner *= static_cast<std::size_t>(x.dim(i));

  TensorT<S> out(x.shape());
  const S* in = x.data();
  S* o = out.data();
  for (std::size_t ou = 0; ou < outer; ++ou) {
    for (std::size_t in_i = 0; in_i < inner; ++in_i) {
      const std::size_t base = ou * static_cast<std::size_t>(n) * inner + in_i;
      double mx = static_cast<double>(in[base]);
      for (int j = 1; j < n; ++j) {
        double v = static_cast<double>(in[base + static_cast<std::size_t>(j) * inner]);
        if (v > mx) mx = v;
      }
      double sum = 0.0;
      for (int j = 0; j < n; ++j) {
        const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
        double e = std::exp(static_cast<double>(in[idx]) - mx);
        o[idx] = static_cast<S>(e);
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int j = 0; j < n; ++j) {
        const std::size_t idx = base + static_cast<std::size_t>(j) * inner;
        o[idx] = static_cast<S>(static_cast<double>(o[idx]) * inv);
      }
    }
  }
  return out;
}

template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma,
                      const TensorT<S>& beta, S eps) {
  const int n = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != n || beta.rank() != 1 ||
      beta.dim(0) != n) {
    fail(ErrorCode::dimension_mismatch,
         "layer_norm gamma/beta must have the normalized extent " +
             std::to_string(n));
  }
  if (eps <= S(0)) fail(ErrorCode::validation, "layer_norm eps must be > 0");
  const std::size_t rows = x.size() / static_cast<std::size_t>(n);
  TensorT<S> out(x.shape());
  const S* in = x.data();
  S* o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* row = in + r * static_cast<std::size_t>(n);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += static_cast<double>(row[j]);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = static_cast<double>(row[j]) - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    S* orow = o + r * static_cast<std::size_t>(n);
    for (int j = 0; j < n; ++j) {
      double xh = (static_cast<double>(row[j]) - mean) * inv;
      orow[j] = static_cast<S>(xh * static_cast<double>(gamma[static_cast<std::size_t>(j)]) +
                               static_cast<double>(beta[static_cast<std::size_t>(j)]));
    }
  }
  return out;
}

template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
  TensorT<S> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = static_cast<double>(x[i]);
    out[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244)));
  }
  return out;
}

template <class S>
TensorT<S> linear_forward(const TensorT<S>& x, const TensorT<S>& w,
                          const TensorT<S>& b) {
  check_2d(x, "linear_forward");
  check_2d(w, "linear_forward");
  if (b.rank() != 1 || b.dim(0) != w.dim(1)) {
    fail(ErrorCode::dimension_mismatch,
         "linear_forward bias " + b.shape_str() + " does not match weight " +
             w.shape_str());
  }
  TensorT<S> y = matmul(x, w);
  const int rows = y.dim(0), cols = y.dim(1);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) y.at(i, j) += b[static_cast<std::size_t>(j)];
  return y;
}

template <class S>
double cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels) {
  check_2d(logits, "cross_entropy");
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch || batch < 1) {
    fail(ErrorCode::validation,
         "cross_entropy needs one label per logit row (" +
             std::to_string(batch) + " rows, " +
             std::to_string(labels.size()) + " labels)");
  }
  double total = 0.0;
  for (int i = 0; i < batch; ++i) {
    const int lbl = labels[static_cast<std::size_t>(i)];
    if (lbl < 0 || lbl >= classes) {
      fail(ErrorCode::validation,
           "label " + std::to_string(lbl) + " at row " + std::to_string(i) +
               " outside [0, " + std::to_string(classes) + ")");
    }
    double mx = static_cast<double>(logits.at(i, 0));
    for (int j = 1; j < classes; ++j)
      mx = std::max(mx, static_cast<double>(logits.at(i, j)));
    double lse = 0.0;
    for (int j = 0; j < classes; ++j)
      lse += std::exp(static_cast<double>(logits.at(i, j)) - mx);
    lse = std::log(lse) + mx;
    total += lse - static_cast<double>(logits.at(i, lbl));
  }
  return total / batch;
}

template <class S>
TensorT<S> cross_entropy_grad(const TensorT<S>& logits,
                              const std::vector<int>& labels) {
  TensorT<S> g = softmax(logits, 1);
  const int batch = logits.dim(0);
  const S inv = S(1) / static_cast<S>(batch);
  for (int i = 0; i < batch; ++i) {
    g.at(i, labels[static_cast<std::size_t>(i)]) -= S(1);
    for (int j = 0; j < logits.dim(1); ++j) g.at(i, j) *= inv;
  }
  return g;
}

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::dimension_mismatch,
         "add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  TensorT<S> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
  TensorT<S> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * c;
  return out;
}

#define GRIDVIT_INSTANTIATE_OPS(S)                                            \
  template TensorT<S> matmul<S>(const TensorT<S>&, const TensorT<S>&);        \
  template TensorT<S> matmul_nt<S>(const TensorT<S>&, const TensorT<S>&);     \
  template TensorT<S> matmul_tn<S>(const TensorT<S>&, const TensorT<S>&);     \
  template TensorT<S> transpose<S>(const TensorT<S>&);                        \
  template TensorT<S> softmax<S>(const TensorT<S>&, int);                     \
  template TensorT<S> layer_norm<S>(const TensorT<S>&, const TensorT<S>&,     \
                                    const TensorT<S>&, S);                    \
  template TensorT<S> gelu<S>(const TensorT<S>&);                             \
  template TensorT<S> linear_forward<S>(const TensorT<S>&, const TensorT<S>&, \
                                        const TensorT<S>&);                   \
  template double cross_entropy<S>(const TensorT<S>&,                         \
                                   const std::vector<int>&);                  \
  template TensorT<S> cross_entropy_grad<S>(const TensorT<S>&,                \
                                            const std::vector<int>&);         \
  template TensorT<S> add<S>(const TensorT<S>&, const TensorT<S>&);           \
  template TensorT<S> scale<S>(const TensorT<S>&, S);

GRIDVIT_INSTANTIATE_OPS(float)
GRIDVIT_INSTANTIATE_OPS(double)

#undef GRIDVIT_INSTANTIATE_OPS

}  // namespace gridvit
