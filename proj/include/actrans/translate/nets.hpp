#pragma once

#include <string>
#include <vector>

#include "actrans/nn/checkpoint.hpp"
#include "actrans/nn/ops.hpp"
#include "actrans/rng.hpp"

namespace actrans::translate {

// Residual image-to-image generator: stem conv, two stride-2 downsamplings,
// R residual blocks, two nearest-neighbor upsamplings, 1-channel head. The
// head is zero-initialized, so at initialization the template-mode output
// equals the input exactly and the direct-mode output is all zeros.
template <typename S>
class Generator {
 public:
  Generator() = default;

  Generator(int channels, int res_blocks, bool template_mode)
      : channels_(channels), res_blocks_(res_blocks),
        template_mode_(template_mode) {
    auto conv = [](nn::Param<S>& w, nn::Param<S>& b, const std::string& name,
                   int co, int ci) {
      w.name = name + ".w";
      w.init_shape(co, ci, 3, 3);
      b.name = name + ".b";
      b.init_shape(co, 1, 1, 1);
    };
    auto norm = [](nn::Param<S>& g, nn::Param<S>& b, const std::string& name,
                   int c) {
      g.name = name + ".g";
      g.init_shape(c, 1, 1, 1);
      b.name = name + ".b";
      b.init_shape(c, 1, 1, 1);
    };
    const int c = channels_;
    conv(stem_w_, stem_b_, "stem", c, 1);
    norm(stem_g_, stem_bt_, "stem.in", c);
    conv(down1_w_, down1_b_, "down1", 2 * c, c);
    norm(down1_g_, down1_bt_, "down1.in", 2 * c);
    conv(down2_w_, down2_b_, "down2", 4 * c, 2 * c);
    norm(down2_g_, down2_bt_, "down2.in", 4 * c);
    res_.resize(res_blocks_);
    for (int i = 0; i < res_blocks_; ++i) {
      const std::string base = "res" + std::to_string(i);
      conv(res_[i].w1, res_[i].b1, base + ".c1", 4 * c, 4 * c);
      norm(res_[i].g1, res_[i].bt1, base + ".in1", 4 * c);
      conv(res_[i].w2, res_[i].b2, base + ".c2", 4 * c, 4 * c);
      norm(res_[i].g2, res_[i].bt2, base + ".in2", 4 * c);
    }
    conv(up1_w_, up1_b_, "up1", 2 * c, 4 * c);
    norm(up1_g_, up1_bt_, "up1.in", 2 * c);
    conv(up2_w_, up2_b_, "up2", c, 2 * c);
    norm(up2_g_, up2_bt_, "up2.in", c);
    conv(head_w_, head_b_, "head", 1, c);
  }

  void init(Rng& rng) {
    auto norm_init = [](nn::Param<S>& g, nn::Param<S>& b) {
      g.value.data.setConstant(S(1));
      b.value.data.setZero();
    };
    nn::he_init(stem_w_, rng);
    nn::zero_init(stem_b_);
    norm_init(stem_g_, stem_bt_);
    nn::he_init(down1_w_, rng);
    nn::zero_init(down1_b_);
    norm_init(down1_g_, down1_bt_);
    nn::he_init(down2_w_, rng);
    nn::zero_init(down2_b_);
    norm_init(down2_g_, down2_bt_);
    for (auto& r : res_) {
      nn::he_init(r.w1, rng);
      nn::zero_init(r.b1);
      norm_init(r.g1, r.bt1);
      nn::he_init(r.w2, rng);
      nn::zero_init(r.b2);
      norm_init(r.g2, r.bt2);
    }
    nn::he_init(up1_w_, rng);
    nn::zero_init(up1_b_);
    norm_init(up1_g_, up1_bt_);
    nn::he_init(up2_w_, rng);
    nn::zero_init(up2_b_);
    norm_init(up2_g_, up2_bt_);
    nn::zero_init(head_w_);  // identity (template) / zero (direct) at init
    nn::zero_init(head_b_);
  }

  bool template_mode() const { return template_mode_; }
  int channels() const { return channels_; }
  int res_blocks() const { return res_blocks_; }

  struct ResCtx {
    nn::Tensor<S> in, z1, a1, z2pre;
    nn::InstNormCtx<S> n1, n2;
  };

  struct Ctx {
    nn::Tensor<S> x;
    nn::Tensor<S> stem_in, stem_act, d1_act, d2_act;
    nn::InstNormCtx<S> stem_n, d1_n, d2_n;
    std::vector<ResCtx> res;
    nn::Tensor<S> u1_up_in, u1_conv_in, u1_act;
    nn::Tensor<S> u2_up_in, u2_conv_in, u2_act;
    nn::InstNormCtx<S> u1_n, u2_n;
    nn::Tensor<S> head_in, residual, pre_out, y;
  };

  // x is (n, 1, h, w) in [-1, 1] with h, w divisible by 4.
  Ctx forward(const nn::Tensor<S>& x) const {
    if (x.h() % 4 != 0 || x.w() % 4 != 0)
      throw dimension_error("generator input size must be divisible by 4");
    Ctx ctx;
    ctx.x = x;

    ctx.stem_in = x;
    nn::Tensor<S> t = nn::conv2d(x, stem_w_, stem_b_, 1, 1);
    t = nn::instnorm(t, stem_g_, stem_bt_, ctx.stem_n);
    ctx.stem_act = nn::leaky_relu(t, S(0));

    t = nn::conv2d(ctx.stem_act, down1_w_, down1_b_, 2, 1);
    t = nn::instnorm(t, down1_g_, down1_bt_, ctx.d1_n);
    ctx.d1_act = nn::leaky_relu(t, S(0));

    t = nn::conv2d(ctx.d1_act, down2_w_, down2_b_, 2, 1);
    t = nn::instnorm(t, down2_g_, down2_bt_, ctx.d2_n);
    ctx.d2_act = nn::leaky_relu(t, S(0));

    ctx.res.resize(res_blocks_);
    nn::Tensor<S> r = ctx.d2_act;
    for (int i = 0; i < res_blocks_; ++i) {
      auto& rc = ctx.res[i];
      rc.in = r;
      nn::Tensor<S> h = nn::conv2d(r, res_[i].w1, res_[i].b1, 1, 1);
      h = nn::instnorm(h, res_[i].g1, res_[i].bt1, rc.n1);
      rc.a1 = nn::leaky_relu(h, S(0));
      h = nn::conv2d(rc.a1, res_[i].w2, res_[i].b2, 1, 1);
      h = nn::instnorm(h, res_[i].g2, res_[i].bt2, rc.n2);
      r.data = rc.in.data + h.data;
    }

    ctx.u1_up_in = r;
    ctx.u1_conv_in = nn::upsample2x(r);
    t = nn::conv2d(ctx.u1_conv_in, up1_w_, up1_b_, 1, 1);
    t = nn::instnorm(t, up1_g_, up1_bt_, ctx.u1_n);
    ctx.u1_act = nn::leaky_relu(t, S(0));

    ctx.u2_up_in = ctx.u1_act;
    ctx.u2_conv_in = nn::upsample2x(ctx.u1_act);
    t = nn::conv2d(ctx.u2_conv_in, up2_w_, up2_b_, 1, 1);
    t = nn::instnorm(t, up2_g_, up2_bt_, ctx.u2_n);
    ctx.u2_act = nn::leaky_relu(t, S(0));

    ctx.head_in = ctx.u2_act;
    ctx.residual = nn::conv2d(ctx.u2_act, head_w_, head_b_, 1, 1);
    if (template_mode_) {
      ctx.pre_out.shape = ctx.residual.shape;
      ctx.pre_out.data = x.data + ctx.residual.data;
      ctx.y = nn::clamp_op(ctx.pre_out, S(-1), S(1));
    } else {
      ctx.y = nn::tanh_op(ctx.residual);
    }
    return ctx;
  }

  nn::Tensor<S> backward(const Ctx& ctx, const nn::Tensor<S>& dy,
                         bool accum_params) {
    nn::Tensor<S> d;
    nn::Tensor<S> dx_direct;  // template-mode skip gradient into x
    if (template_mode_) {
      d = nn::clamp_backward(ctx.pre_out, dy, S(-1), S(1));
      dx_direct = d;
    } else {
      d = nn::tanh_backward(ctx.y, dy);
    }
    d = nn::conv2d_backward(ctx.head_in, head_w_, head_b_, d, 1, 1,
                            accum_params);

    d = nn::leaky_relu_backward(ctx.u2_act, d, S(0));
    d = nn::instnorm_backward(ctx.u2_n, up2_g_, up2_bt_, d, accum_params);
    d = nn::conv2d_backward(ctx.u2_conv_in, up2_w_, up2_b_, d, 1, 1,
                            accum_params);
    d = nn::upsample2x_backward(d);

    d = nn::leaky_relu_backward(ctx.u1_act, d, S(0));
    d = nn::instnorm_backward(ctx.u1_n, up1_g_, up1_bt_, d, accum_params);
    d = nn::conv2d_backward(ctx.u1_conv_in, up1_w_, up1_b_, d, 1, 1,
                            accum_params);
    d = nn::upsample2x_backward(d);

    for (int i = res_blocks_ - 1; i >= 0; --i) {
      const auto& rc = ctx.res[i];
      nn::Tensor<S> db = nn::instnorm_backward(rc.n2, res_[i].g2, res_[i].bt2,
                                               d, accum_params);
      db = nn::conv2d_backward(rc.a1, res_[i].w2, res_[i].b2, db, 1, 1,
                               accum_params);
      db = nn::leaky_relu_backward(rc.a1, db, S(0));
      db = nn::instnorm_backward(rc.n1, res_[i].g1, res_[i].bt1, db,
                                 accum_params);
      db = nn::conv2d_backward(rc.in, res_[i].w1, res_[i].b1, db, 1, 1,
                               accum_params);
      d.data += db.data;  // skip connection
    }

    d = nn::leaky_relu_backward(ctx.d2_act, d, S(0));
    d = nn::instnorm_backward(ctx.d2_n, down2_g_, down2_bt_, d, accum_params);
    d = nn::conv2d_backward(ctx.d1_act, down2_w_, down2_b_, d, 2, 1,
                            accum_params);

    d = nn::leaky_relu_backward(ctx.d1_act, d, S(0));
    d = nn::instnorm_backward(ctx.d1_n, down1_g_, down1_bt_, d, accum_params);
    d = nn::conv2d_backward(ctx.stem_act, down1_w_, down1_b_, d, 2, 1,
                            accum_params);

    d = nn::leaky_relu_backward(ctx.stem_act, d, S(0));
    d = nn::instnorm_backward(ctx.stem_n, stem_g_, stem_bt_, d, accum_params);
    d = nn::conv2d_backward(ctx.stem_in, stem_w_, stem_b_, d, 1, 1,
                            accum_params);

    if (template_mode_) d.data += dx_direct.data;
    return d;
  }

  nn::ParamRefs<S> params() {
    nn::ParamRefs<S> out{&stem_w_, &stem_b_, &stem_g_, &stem_bt_,
                         &down1_w_, &down1_b_, &down1_g_, &down1_bt_,
                         &down2_w_, &down2_b_, &down2_g_, &down2_bt_};
    for (auto& r : res_) {
      out.push_back(&r.w1);
      out.push_back(&r.b1);
      out.push_back(&r.g1);
      out.push_back(&r.bt1);
      out.push_back(&r.w2);
      out.push_back(&r.b2);
      out.push_back(&r.g2);
      out.push_back(&r.bt2);
    }
    out.insert(out.end(), {&up1_w_, &up1_b_, &up1_g_, &up1_bt_, &up2_w_,
                           &up2_b_, &up2_g_, &up2_bt_, &head_w_, &head_b_});
    return out;
  }

  std::vector<const nn::Param<S>*> params() const {
    auto& self = const_cast<Generator&>(*this);
    std::vector<const nn::Param<S>*> out;
    for (auto* p : self.params()) out.push_back(p);
    return out;
  }

  void append_to_checkpoint(nn::Checkpoint& ckpt,
                            const std::string& prefix) const {
    for (const nn::Param<S>* p : params())
      ckpt.tensors.emplace_back(prefix + p->name,
                                p->value.template cast<float>());
  }

  void load_from_checkpoint(const nn::Checkpoint& ckpt,
                            const std::string& prefix) {
    for (nn::Param<S>* p : params()) {
      const auto& t = ckpt.tensor(prefix + p->name);
      if (t.shape != p->value.shape)
        throw format_error("checkpoint tensor shape mismatch: " + p->name);
      p->value = t.template cast<S>();
    }
  }

 private:
  struct ResBlock {
    nn::Param<S> w1, b1, g1, bt1, w2, b2, g2, bt2;
  };

  int channels_ = 16;
  int res_blocks_ = 4;
  bool template_mode_ = true;

  nn::Param<S> stem_w_, stem_b_, stem_g_, stem_bt_;
  nn::Param<S> down1_w_, down1_b_, down1_g_, down1_bt_;
  nn::Param<S> down2_w_, down2_b_, down2_g_, down2_bt_;
  std::vector<ResBlock> res_;
  nn::Param<S> up1_w_, up1_b_, up1_g_, up1_bt_;
  nn::Param<S> up2_w_, up2_b_, up2_g_, up2_bt_;
  nn::Param<S> head_w_, head_b_;
};

// Patch discriminator: `layers` stride-2 convs with leaky ReLU (instance
// norm except on the first), then a 1-channel stride-1 conv producing the
// patch score map.
template <typename S>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;

  PatchDiscriminator(int base_channels, int layers)
      : base_channels_(base_channels), layers_(layers) {
    int ci = 1;
    conv_.resize(layers_);
    for (int i = 0; i < layers_; ++i) {
      const int co = channels(i);
      const std::string base = "conv" + std::to_string(i);
      conv_[i].w.name = base + ".w";
      conv_[i].w.init_shape(co, ci, 3, 3);
      conv_[i].b.name = base + ".b";
      conv_[i].b.init_shape(co, 1, 1, 1);
      conv_[i].g.name = base + ".in.g";
      conv_[i].g.init_shape(co, 1, 1, 1);
      conv_[i].bt.name = base + ".in.b";
      conv_[i].bt.init_shape(co, 1, 1, 1);
      ci = co;
    }
    head_w_.name = "head.w";
    head_w_.init_shape(1, ci, 3, 3);
    head_b_.name = "head.b";
    head_b_.init_shape(1, 1, 1, 1);
  }

  int channels(int layer) const {
    int c = base_channels_ << layer;
    return c > 256 ? 256 : c;
  }
  int layers() const { return layers_; }

  void init(Rng& rng) {
    for (auto& l : conv_) {
      nn::he_init(l.w, rng);
      nn::zero_init(l.b);
      l.g.value.data.setConstant(S(1));
      l.bt.value.data.setZero();
    }
    nn::he_init(head_w_, rng);
    nn::zero_init(head_b_);
  }

  struct Ctx {
    std::vector<nn::Tensor<S>> inputs;
    std::vector<nn::Tensor<S>> acts;
    std::vector<nn::InstNormCtx<S>> norms;
    nn::Tensor<S> head_in, map;
  };

  Ctx forward(const nn::Tensor<S>& x) const {
    Ctx ctx;
    ctx.inputs.reserve(layers_);
    ctx.acts.reserve(layers_);
    ctx.norms.resize(layers_);
    nn::Tensor<S> cur = x;
    for (int i = 0; i < layers_; ++i) {
      ctx.inputs.push_back(cur);
      nn::Tensor<S> z = nn::conv2d(cur, conv_[i].w, conv_[i].b, 2, 1);
      if (i > 0) z = nn::instnorm(z, conv_[i].g, conv_[i].bt, ctx.norms[i]);
      cur = nn::leaky_relu(z, S(0.2));
      ctx.acts.push_back(cur);
    }
    ctx.head_in = cur;
    ctx.map = nn::conv2d(cur, head_w_, head_b_, 1, 1);
    return ctx;
  }

  nn::Tensor<S> backward(const Ctx& ctx, const nn::Tensor<S>& dmap,
                         bool accum_params) {
    nn::Tensor<S> d = nn::conv2d_backward(ctx.head_in, head_w_, head_b_, dmap,
                                          1, 1, accum_params);
    for (int i = layers_ - 1; i >= 0; --i) {
      d = nn::leaky_relu_backward(ctx.acts[i], d, S(0.2));
      if (i > 0)
        d = nn::instnorm_backward(ctx.norms[i], conv_[i].g, conv_[i].bt, d,
                                  accum_params);
      d = nn::conv2d_backward(ctx.inputs[i], conv_[i].w, conv_[i].b, d, 2, 1,
                              accum_params);
    }
    return d;
  }

  nn::ParamRefs<S> params() {
    nn::ParamRefs<S> out;
    for (int i = 0; i < layers_; ++i) {
      out.push_back(&conv_[i].w);
      out.push_back(&conv_[i].b);
      if (i > 0) {
        out.push_back(&conv_[i].g);
        out.push_back(&conv_[i].bt);
      }
    }
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
  }

  std::vector<const nn::Param<S>*> params() const {
    auto& self = const_cast<PatchDiscriminator&>(*this);
    std::vector<const nn::Param<S>*> out;
    for (auto* p : self.params()) out.push_back(p);
    return out;
  }

  void append_to_checkpoint(nn::Checkpoint& ckpt,
                            const std::string& prefix) const {
    for (const nn::Param<S>* p : params())
      ckpt.tensors.emplace_back(prefix + p->name,
                                p->value.template cast<float>());
  }

  void load_from_checkpoint(const nn::Checkpoint& ckpt,
                            const std::string& prefix) {
    for (nn::Param<S>* p : params()) {
      const auto& t = ckpt.tensor(prefix + p->name);
      if (t.shape != p->value.shape)
        throw format_error("checkpoint tensor shape mismatch: " + p->name);
      p->value = t.template cast<S>();
    }
  }

 private:
  struct Layer {
    nn::Param<S> w, b, g, bt;
  };

  int base_channels_ = 32;
  int layers_ = 3;
  std::vector<Layer> conv_;
  nn::Param<S> head_w_, head_b_;
};

}  // namespace actrans::translate
