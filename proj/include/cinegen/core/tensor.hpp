#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "cinegen/core/error.hpp"

namespace cinegen {

/// Dense n-rank array: a flat Eigen column with row-major logical indexing.
/// Heavy math goes through Eigen::Map views of the flat storage.
template <typename S>
class TensorT {
 public:
  using Scalar = S;
  using Array = Eigen::Array<S, Eigen::Dynamic, 1>;
  using Index = Eigen::Index;

  TensorT() = default;

  explicit TensorT(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(Array::Zero(count(shape_))) {}

  TensorT(std::vector<Index> shape, Array data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_as<ShapeError>(data_.size() == count(shape_),
                         "tensor data size does not match shape");
  }

  static TensorT zeros(std::vector<Index> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<Index> shape, S value) {
    TensorT t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static Index count(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) {
      check_as<ShapeError>(d >= 0, "negative tensor dimension");
      n *= d;
    }
    return n;
  }

  Index numel() const { return data_.size(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }

  Index dim(int i) const {
    check_as<ShapeError>(i >= 0 && i < rank(), "tensor dim index out of range");
    return shape_[static_cast<size_t>(i)];
  }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  Array& array() { return data_; }
  const Array& array() const { return data_; }

  /// Metadata-only reshape; element count must be preserved.
  TensorT& reshape(std::vector<Index> shape) {
    check_as<ShapeError>(count(shape) == numel(), "reshape changes element count");
    shape_ = std::move(shape);
    return *this;
  }

  TensorT reshaped(std::vector<Index> shape) const {
    TensorT t = *this;
    t.reshape(std::move(shape));
    return t;
  }

  template <typename... Ix>
  S& operator()(Ix... idx) {
    return data_[flat_index({static_cast<Index>(idx)...})];
  }

  template <typename... Ix>
  S operator()(Ix... idx) const {
    return data_[flat_index({static_cast<Index>(idx)...})];
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Index flat_index(std::initializer_list<Index> idx) const {
    check_as<ShapeError>(static_cast<int>(idx.size()) == rank(),
                         "tensor index rank mismatch");
    Index flat = 0;
    int i = 0;
    for (Index ix : idx) {
      const Index d = shape_[static_cast<size_t>(i)];
      check_as<ShapeError>(ix >= 0 && ix < d, "tensor index out of bounds");
      flat = flat * d + ix;
      ++i;
    }
    return flat;
  }

  std::vector<Index> shape_;
  Array data_;
};

using Tensor = TensorT<double>;

/// Video clips travel as rank-5 tensors [batch, frames, channels, height, width].
using VideoArray = Tensor;

using MatrixX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
using RowMatrixX =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorX = Eigen::Matrix<double, Eigen::Dynamic, 1>;
using ArrayX = Eigen::Array<double, Eigen::Dynamic, 1>;

/// Row-major [rows, cols] view over contiguous tensor storage.
inline Eigen::Map<RowMatrixX> as_matrix(Tensor& t, Eigen::Index rows,
                                        Eigen::Index cols) {
  check_as<ShapeError>(rows * cols == t.numel(), "matrix view size mismatch");
  return Eigen::Map<RowMatrixX>(t.data(), rows, cols);
}

inline Eigen::Map<const RowMatrixX> as_matrix(const Tensor& t, Eigen::Index rows,
                                              Eigen::Index cols) {
  check_as<ShapeError>(rows * cols == t.numel(), "matrix view size mismatch");
  return Eigen::Map<const RowMatrixX>(t.data(), rows, cols);
}

}  // namespace cinegen
