#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace gridvit {

// Dense row-major tensor. Single precision is the working type throughout
// the model; the double instantiation exists for gradient checking.
template <class S>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), S(0)) {}

  TensorT(std::vector<int> shape, std::vector<S> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      fail(ErrorCode::dimension_mismatch,
           "tensor data length " + std::to_string(data_.size()) +
               " does not match shape " + shape_str());
    }
  }

  static TensorT zeros(std::vector<int> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<int> shape, S v) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static TensorT scalar(S v) { return TensorT({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  std::vector<S>& values() { return data_; }
  const std::vector<S>& values() const { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  S operator[](std::size_t i) const { return data_[i]; }

  S& at(int i, int j) {
    return data_[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                 static_cast<std::size_t>(j)];
  }
  S at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                 static_cast<std::size_t>(j)];
  }
  S& at(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                  static_cast<std::size_t>(j)) *
                     static_cast<std::size_t>(dim(2)) +
                 static_cast<std::size_t>(k)];
  }
  S at(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) +
                  static_cast<std::size_t>(j)) *
                     static_cast<std::size_t>(dim(2)) +
                 static_cast<std::size_t>(k)];
  }

  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (S v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  S min_value() const {
    S m = data_.empty() ? S(0) : data_[0];
    for (S v : data_) m = v < m ? v : m;
    return m;
  }

  S max_value() const {
    S m = data_.empty() ? S(0) : data_[0];
    for (S v : data_) m = v > m ? v : m;
    return m;
  }

  template <class T>
  TensorT<T> cast() const {
    std::vector<T> d(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<T>(data_[i]);
    return TensorT<T>(shape_, std::move(d));
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << "x";
      os << shape_[i];
    }
    os << "]";
    return os.str();
  }

 private:
  static std::size_t checked_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
      if (e <= 0) {
        fail(ErrorCode::validation, "tensor extents must be positive");
      }
      n *= static_cast<std::size_t>(e);
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<int> shape_;
  std::vector<S> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace gridvit
