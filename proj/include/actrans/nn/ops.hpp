#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "actrans/nn/tensor.hpp"
#include "actrans/rng.hpp"

// Functional forward/backward pairs for the small conv nets used here.
// Forward passes are pure; backward passes take whatever the forward saved,
// return the input gradient, and accumulate parameter gradients only when
// asked (frozen networks are walked with accum_params = false).

namespace actrans::nn {

template <typename S>
using MatRM =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <typename S>
void im2col(const Tensor<S>& x, int n, int k, int stride, int pad,
            MatRM<S>& col) {
  const int ci = x.c(), h = x.h(), w = x.w();
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  col.resize(ci * k * k, oh * ow);
  for (int c = 0; c < ci; ++c) {
    const auto plane = x.plane(n, c);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        S* dst = col.data() + static_cast<Eigen::Index>((c * k + ky) * k + kx) *
                                  (oh * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane(iy, ix)
                                                              : S(0);
          }
        }
      }
  }
}

template <typename S>
void col2im_add(const MatRM<S>& col, int n, int k, int stride, int pad,
                Tensor<S>& dx) {
  const int ci = dx.c(), h = dx.h(), w = dx.w();
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  for (int c = 0; c < ci; ++c) {
    auto plane = dx.plane(n, c);
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const S* src = col.data() +
                       static_cast<Eigen::Index>((c * k + ky) * k + kx) *
                           (oh * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) plane(iy, ix) += src[ox];
          }
          src += ow;
        }
      }
  }
}

}  // namespace detail

// --- conv2d (square kernel, weight (co, ci, k, k), bias (co)) --------------

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Param<S>& weight,
                 const Param<S>& bias, int stride, int pad) {
  const int co = weight.value.n(), ci = weight.value.c(), k = weight.value.h();
  if (ci != x.c()) throw dimension_error("conv2d channel mismatch");
  const int oh = conv_out_dim(x.h(), k, stride, pad);
  const int ow = conv_out_dim(x.w(), k, stride, pad);
  if (oh < 1 || ow < 1) throw dimension_error("conv2d output would be empty");

  Tensor<S> y(x.n(), co, oh, ow);
  Eigen::Map<const MatRM<S>> wmat(weight.value.data.data(), co, ci * k * k);
  MatRM<S> col;
  for (int n = 0; n < x.n(); ++n) {
    detail::im2col(x, n, k, stride, pad, col);
    Eigen::Map<MatRM<S>> out(y.data.data() +
                                 static_cast<Eigen::Index>(n) * co * oh * ow,
                             co, oh * ow);
    out.noalias() = wmat * col;
    for (int c = 0; c < co; ++c) out.row(c).array() += bias.value.data[c];
  }
  return y;
}

template <typename S>
Tensor<S> conv2d_backward(const Tensor<S>& x, Param<S>& weight, Param<S>& bias,
                          const Tensor<S>& dy, int stride, int pad,
                          bool accum_params) {
  const int co = weight.value.n(), ci = weight.value.c(), k = weight.value.h();
  const int oh = dy.h(), ow = dy.w();
  Tensor<S> dx = Tensor<S>::zeros(x.n(), x.c(), x.h(), x.w());
  Eigen::Map<const MatRM<S>> wmat(weight.value.data.data(), co, ci * k * k);
  Eigen::Map<MatRM<S>> dwmat(weight.grad.data.data(), co, ci * k * k);
  MatRM<S> col, dcol;
  for (int n = 0; n < x.n(); ++n) {
    Eigen::Map<const MatRM<S>> dout(
        dy.data.data() + static_cast<Eigen::Index>(n) * co * oh * ow, co,
        oh * ow);
    if (accum_params) {
      detail::im2col(x, n, k, stride, pad, col);
      dwmat.noalias() += dout * col.transpose();
      for (int c = 0; c < co; ++c) bias.grad.data[c] += dout.row(c).sum();
    }
    dcol.noalias() = wmat.transpose() * dout;
    detail::col2im_add(dcol, n, k, stride, pad, dx);
  }
  return dx;
}

// --- instance norm (per sample, per channel; affine) ------------------------

template <typename S>
struct InstNormCtx {
  Tensor<S> xhat;
  std::vector<S> inv_std;  // n * c entries
};

template <typename S>
Tensor<S> instnorm(const Tensor<S>& x, const Param<S>& gamma,
                   const Param<S>& beta, InstNormCtx<S>& ctx,
                   S eps = S(1e-5)) {
  Tensor<S> y(x.n(), x.c(), x.h(), x.w());
  ctx.xhat.resize(x.n(), x.c(), x.h(), x.w());
  ctx.inv_std.assign(static_cast<std::size_t>(x.n()) * x.c(), S(0));
  const S m = S(1) / S(x.h() * x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const auto xp = x.plane(n, c);
      const S mu = xp.sum() * m;
      const S var = (xp - mu).square().sum() * m;
      const S inv = S(1) / std::sqrt(var + eps);
      ctx.inv_std[static_cast<std::size_t>(n) * x.c() + c] = inv;
      auto xh = ctx.xhat.plane(n, c);
      xh = (xp - mu) * inv;
      y.plane(n, c) = xh * gamma.value.data[c] + beta.value.data[c];
    }
  return y;
}

template <typename S>
Tensor<S> instnorm_backward(const InstNormCtx<S>& ctx, Param<S>& gamma,
                            Param<S>& beta, const Tensor<S>& dy,
                            bool accum_params) {
  const auto& xhat = ctx.xhat;
  Tensor<S> dx(xhat.n(), xhat.c(), xhat.h(), xhat.w());
  const S m = S(1) / S(xhat.h() * xhat.w());
  for (int n = 0; n < xhat.n(); ++n)
    for (int c = 0; c < xhat.c(); ++c) {
      const auto dyp = dy.plane(n, c);
      const auto xh = xhat.plane(n, c);
      if (accum_params) {
        gamma.grad.data[c] += (dyp * xh).sum();
        beta.grad.data[c] += dyp.sum();
      }
      const S inv = ctx.inv_std[static_cast<std::size_t>(n) * xhat.c() + c];
      const S g = gamma.value.data[c];
      const S mean_dy = dyp.sum() * m;
      const S mean_dy_xhat = (dyp * xh).sum() * m;
      dx.plane(n, c) = (dyp - mean_dy - xh * mean_dy_xhat) * (g * inv);
    }
  return dx;
}

// --- pointwise activations --------------------------------------------------

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S slope) {
  Tensor<S> y;
  y.shape = x.shape;
  y.data = (x.data >= S(0)).select(x.data, x.data * slope);
  return y;
}

// Uses the forward output: y > 0 iff x > 0 (also valid for slope = 0).
template <typename S>
Tensor<S> leaky_relu_backward(const Tensor<S>& y, const Tensor<S>& dy,
                              S slope) {
  Tensor<S> dx;
  dx.shape = dy.shape;
  dx.data = (y.data > S(0)).select(dy.data, dy.data * slope);
  return dx;
}

template <typename S>
Tensor<S> tanh_op(const Tensor<S>& x) {
  Tensor<S> y;
  y.shape = x.shape;
  y.data = x.data.tanh();
  return y;
}

template <typename S>
Tensor<S> tanh_backward(const Tensor<S>& y, const Tensor<S>& dy) {
  Tensor<S> dx;
  dx.shape = dy.shape;
  dx.data = dy.data * (S(1) - y.data.square());
  return dx;
}

// Clamp with pass-through gradient strictly inside [lo, hi].
template <typename S>
Tensor<S> clamp_op(const Tensor<S>& x, S lo, S hi) {
  Tensor<S> y;
  y.shape = x.shape;
  y.data = x.data.max(lo).min(hi);
  return y;
}

template <typename S>
Tensor<S> clamp_backward(const Tensor<S>& x, const Tensor<S>& dy, S lo, S hi) {
  Tensor<S> dx;
  dx.shape = dy.shape;
  dx.data = (x.data > lo && x.data < hi).select(dy.data, S(0));
  return dx;
}

// --- nearest-neighbor 2x upsampling ------------------------------------------

template <typename S>
Tensor<S> upsample2x(const Tensor<S>& x) {
  Tensor<S> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const auto xp = x.plane(n, c);
      auto yp = y.plane(n, c);
      for (int iy = 0; iy < x.h(); ++iy)
        for (int ix = 0; ix < x.w(); ++ix) {
          const S v = xp(iy, ix);
          yp(2 * iy, 2 * ix) = v;
          yp(2 * iy, 2 * ix + 1) = v;
          yp(2 * iy + 1, 2 * ix) = v;
          yp(2 * iy + 1, 2 * ix + 1) = v;
        }
    }
  return y;
}

template <typename S>
Tensor<S> upsample2x_backward(const Tensor<S>& dy) {
  Tensor<S> dx(dy.n(), dy.c(), dy.h() / 2, dy.w() / 2);
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c) {
      const auto dyp = dy.plane(n, c);
      auto dxp = dx.plane(n, c);
      for (int iy = 0; iy < dx.h(); ++iy)
        for (int ix = 0; ix < dx.w(); ++ix)
          dxp(iy, ix) = dyp(2 * iy, 2 * ix) + dyp(2 * iy, 2 * ix + 1) +
                        dyp(2 * iy + 1, 2 * ix) + dyp(2 * iy + 1, 2 * ix + 1);
    }
  return dx;
}

// --- global average pooling: (n,c,h,w) -> (n,c,1,1) -------------------------

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  Tensor<S> y(x.n(), x.c(), 1, 1);
  const S m = S(1) / S(x.h() * x.w());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) y.at(n, c, 0, 0) = x.plane(n, c).sum() * m;
  return y;
}

template <typename S>
Tensor<S> global_avg_pool_backward(const Tensor<S>& dy, int h, int w) {
  Tensor<S> dx(dy.n(), dy.c(), h, w);
  const S m = S(1) / S(h * w);
  for (int n = 0; n < dy.n(); ++n)
    for (int c = 0; c < dy.c(); ++c)
      dx.plane(n, c).setConstant(dy.at(n, c, 0, 0) * m);
  return dx;
}

// --- fully connected: x (n, f) -> y (n, out); weight (out, f), bias (out) ---

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Param<S>& weight,
                 const Param<S>& bias) {
  const int f = weight.value.c(), out = weight.value.n();
  if (x.c() * x.h() * x.w() != f) throw dimension_error("linear shape mismatch");
  Tensor<S> y(x.n(), out, 1, 1);
  Eigen::Map<const MatRM<S>> xm(x.data.data(), x.n(), f);
  Eigen::Map<const MatRM<S>> wm(weight.value.data.data(), out, f);
  Eigen::Map<MatRM<S>> ym(y.data.data(), x.n(), out);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() +=
      Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(
          bias.value.data.data(), out);
  return y;
}

template <typename S>
Tensor<S> linear_backward(const Tensor<S>& x, Param<S>& weight, Param<S>& bias,
                          const Tensor<S>& dy, bool accum_params) {
  const int f = weight.value.c(), out = weight.value.n();
  Tensor<S> dx;
  dx.shape = x.shape;
  dx.data.resize(x.data.size());
  Eigen::Map<const MatRM<S>> xm(x.data.data(), x.n(), f);
  Eigen::Map<const MatRM<S>> dym(dy.data.data(), x.n(), out);
  Eigen::Map<const MatRM<S>> wm(weight.value.data.data(), out, f);
  if (accum_params) {
    Eigen::Map<MatRM<S>> dwm(weight.grad.data.data(), out, f);
    dwm.noalias() += dym.transpose() * xm;
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> dbm(bias.grad.data.data(),
                                                        out);
    dbm.noalias() += dym.colwise().sum().transpose();
  }
  Eigen::Map<MatRM<S>> dxm(dx.data.data(), x.n(), f);
  dxm.noalias() = dym * wm;
  return dx;
}

// --- initialization ----------------------------------------------------------

template <typename S>
void he_init(Param<S>& p, Rng& rng) {
  const int fan_in = p.value.c() * p.value.h() * p.value.w();
  const double std = std::sqrt(2.0 / std::max(1, fan_in));
  for (Eigen::Index i = 0; i < p.value.data.size(); ++i)
    p.value.data[i] = static_cast<S>(rng.normal(std));
}

template <typename S>
void zero_init(Param<S>& p) {
  p.value.data.setZero();
}

}  // namespace actrans::nn
