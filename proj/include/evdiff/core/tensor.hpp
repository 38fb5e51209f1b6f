#pragma once

#include <Eigen/Core>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "evdiff/core/errors.hpp"

namespace evdiff {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatMap = Eigen::Map<RowMat<Scalar>>;

template <typename Scalar>
using ConstMatMap = Eigen::Map<const RowMat<Scalar>>;

/// Dense n-d array, row-major, flat storage. Shapes are fixed at creation;
/// Eigen maps give matrix views onto the flat data.
template <typename Scalar>
struct Tensor {
  std::vector<int> shape;
  VecX<Scalar> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = VecX<Scalar>::Zero(numel_of(t.shape));
    return t;
  }

  static Tensor from(std::vector<int> shape, std::initializer_list<Scalar> values) {
    Tensor t = zeros(std::move(shape));
    if (static_cast<int>(values.size()) != t.numel())
      throw DimensionError("Tensor::from: value count does not match shape");
    int i = 0;
    for (const Scalar v : values) t.data[i++] = v;
    return t;
  }

  static int numel_of(const std::vector<int>& shape) {
    int n = 1;
    for (const int d : shape) {
      if (d <= 0) throw DimensionError("Tensor: shape entries must be positive");
      n *= d;
    }
    return n;
  }

  int numel() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }

  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const {
    int c = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return c;
  }

  /// 2-d view: first shape dim as rows, the rest flattened into columns.
  MatMap<Scalar> mat() { return MatMap<Scalar>(data.data(), rows(), cols()); }
  ConstMatMap<Scalar> mat() const { return ConstMatMap<Scalar>(data.data(), rows(), cols()); }

  void check_finite(const std::string& what) const {
    if (!data.allFinite())
      throw NumericError("non-finite values in tensor '" + what + "'");
  }
};

}  // namespace evdiff
