#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>

#include "actrans/errors.hpp"

namespace actrans::nn {

// Dense NCHW tensor over a flat Eigen array. Vectors and matrices use
// trailing singleton dims ((n) -> n,1,1,1; (n,f) -> n,f,1,1).
template <typename S>
struct Tensor {
  std::array<int, 4> shape{0, 0, 0, 0};
  Eigen::Array<S, Eigen::Dynamic, 1> data;

  Tensor() = default;
  Tensor(int n, int c, int h, int w) { resize(n, c, h, w); }

  static Tensor zeros(int n, int c, int h, int w) {
    Tensor t(n, c, h, w);
    t.data.setZero();
    return t;
  }

  void resize(int n, int c, int h, int w) {
    shape = {n, c, h, w};
    data.resize(static_cast<Eigen::Index>(n) * c * h * w);
  }

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }
  Eigen::Index count() const { return data.size(); }

  S& at(int n_, int c_, int y, int x) {
    return data[((static_cast<Eigen::Index>(n_) * shape[1] + c_) * shape[2] +
                 y) *
                    shape[3] +
                x];
  }
  S at(int n_, int c_, int y, int x) const {
    return data[((static_cast<Eigen::Index>(n_) * shape[1] + c_) * shape[2] +
                 y) *
                    shape[3] +
                x];
  }

  using Plane = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Eigen::Map<Plane> plane(int n_, int c_) {
    return Eigen::Map<Plane>(
        data.data() +
            (static_cast<Eigen::Index>(n_) * shape[1] + c_) * shape[2] *
                shape[3],
        shape[2], shape[3]);
  }
  Eigen::Map<const Plane> plane(int n_, int c_) const {
    return Eigen::Map<const Plane>(
        data.data() +
            (static_cast<Eigen::Index>(n_) * shape[1] + c_) * shape[2] *
                shape[3],
        shape[2], shape[3]);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out;
    out.shape = shape;
    out.data = data.template cast<T>();
    return out;
  }
};

// Named learnable tensor with its gradient accumulator.
template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  void init_shape(int n, int c, int h, int w) {
    value.resize(n, c, h, w);
    grad = Tensor<S>::zeros(n, c, h, w);
  }
};

template <typename S>
using ParamRefs = std::vector<Param<S>*>;

}  // namespace actrans::nn
