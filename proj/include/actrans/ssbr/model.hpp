#pragma once

#include <string>
#include <vector>

#include "actrans/nn/checkpoint.hpp"
#include "actrans/nn/ops.hpp"
#include "actrans/nn/tensor.hpp"
#include "actrans/rng.hpp"

namespace actrans::ssbr {

struct SsbrArch {
  int depth = 4;          // strided conv blocks
  int base_channels = 16; // doubled per block, capped at 256
  int input_h = 64, input_w = 64;
};

// Slice-position regressor: strided conv blocks with leaky ReLU, global
// average pooling and a 1-unit tanh head, so every score lands in (-1, 1).
// Fully convolutional; input_h/w records the trained resolution.
template <typename S>
class SsbrNet {
 public:
  SsbrNet() = default;

  explicit SsbrNet(const SsbrArch& arch) : arch_(arch) {
    int ci = 1;
    conv_w_.resize(arch.depth);
    conv_b_.resize(arch.depth);
    for (int i = 0; i < arch.depth; ++i) {
      const int co = channels(i);
      conv_w_[i].name = "conv" + std::to_string(i) + ".w";
      conv_w_[i].init_shape(co, ci, 3, 3);
      conv_b_[i].name = "conv" + std::to_string(i) + ".b";
      conv_b_[i].init_shape(co, 1, 1, 1);
      ci = co;
    }
    fc_w_.name = "fc.w";
    fc_w_.init_shape(1, ci, 1, 1);
    fc_b_.name = "fc.b";
    fc_b_.init_shape(1, 1, 1, 1);
  }

  int channels(int block) const {
    int c = arch_.base_channels << block;
    return c > 256 ? 256 : c;
  }

  const SsbrArch& arch() const { return arch_; }

  void init(Rng& rng) {
    for (int i = 0; i < arch_.depth; ++i) {
      nn::he_init(conv_w_[i], rng);
      nn::zero_init(conv_b_[i]);
    }
    nn::he_init(fc_w_, rng);
    nn::zero_init(fc_b_);
  }

  struct Ctx {
    std::vector<nn::Tensor<S>> inputs;  // conv inputs per block
    std::vector<nn::Tensor<S>> acts;    // post-activation per block
    nn::Tensor<S> gap;                  // (n, C, 1, 1)
    nn::Tensor<S> scores;               // (n, 1, 1, 1), tanh output
    int last_h = 0, last_w = 0;
  };

  // One score in (-1, 1) per input slice. `x` is (n, 1, h, w) in [-1, 1].
  Ctx forward(const nn::Tensor<S>& x) const {
    Ctx ctx;
    ctx.inputs.reserve(arch_.depth);
    ctx.acts.reserve(arch_.depth);
    nn::Tensor<S> cur = x;
    for (int i = 0; i < arch_.depth; ++i) {
      ctx.inputs.push_back(cur);
      nn::Tensor<S> z = nn::conv2d(cur, conv_w_[i], conv_b_[i], 2, 1);
      cur = nn::leaky_relu(z, S(kSlope));
      ctx.acts.push_back(cur);
    }
    ctx.last_h = cur.h();
    ctx.last_w = cur.w();
    ctx.gap = nn::global_avg_pool(cur);
    nn::Tensor<S> fc = nn::linear(ctx.gap, fc_w_, fc_b_);
    ctx.scores = nn::tanh_op(fc);
    return ctx;
  }

  // Gradient w.r.t. the input slices; parameter gradients accumulate only
  // when `accum_params` (the translator walks a frozen copy with false).
  nn::Tensor<S> backward(const Ctx& ctx, const nn::Tensor<S>& dscores,
                         bool accum_params) {
    nn::Tensor<S> d = nn::tanh_backward(ctx.scores, dscores);
    d = nn::linear_backward(ctx.gap, fc_w_, fc_b_, d, accum_params);
    d = nn::global_avg_pool_backward(d, ctx.last_h, ctx.last_w);
    for (int i = arch_.depth - 1; i >= 0; --i) {
      d = nn::leaky_relu_backward(ctx.acts[i], d, S(kSlope));
      d = nn::conv2d_backward(ctx.inputs[i], conv_w_[i], conv_b_[i], d, 2, 1,
                              accum_params);
    }
    return d;
  }

  nn::ParamRefs<S> params() {
    nn::ParamRefs<S> out;
    for (int i = 0; i < arch_.depth; ++i) {
      out.push_back(&conv_w_[i]);
      out.push_back(&conv_b_[i]);
    }
    out.push_back(&fc_w_);
    out.push_back(&fc_b_);
    return out;
  }

  std::vector<const nn::Param<S>*> params() const {
    std::vector<const nn::Param<S>*> out;
    for (int i = 0; i < arch_.depth; ++i) {
      out.push_back(&conv_w_[i]);
      out.push_back(&conv_b_[i]);
    }
    out.push_back(&fc_w_);
    out.push_back(&fc_b_);
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
      const nn::Tensor<float>& t = ckpt.tensor(prefix + p->name);
      if (t.shape != p->value.shape)
        throw format_error("checkpoint tensor shape mismatch: " + p->name);
      p->value = t.template cast<S>();
    }
  }

  static SsbrArch arch_from_manifest(const nn::CheckpointManifest& m,
                                     const std::string& prefix) {
    SsbrArch a;
    a.depth = m.get_int(prefix + "depth");
    a.base_channels = m.get_int(prefix + "base_channels");
    a.input_h = m.get_int(prefix + "input_h");
    a.input_w = m.get_int(prefix + "input_w");
    return a;
  }

  void arch_to_manifest(nn::CheckpointManifest& m,
                        const std::string& prefix) const {
    m.set_int(prefix + "depth", arch_.depth);
    m.set_int(prefix + "base_channels", arch_.base_channels);
    m.set_int(prefix + "input_h", arch_.input_h);
    m.set_int(prefix + "input_w", arch_.input_w);
  }

 private:
  static constexpr double kSlope = 0.1;

  SsbrArch arch_;
  std::vector<nn::Param<S>> conv_w_, conv_b_;
  nn::Param<S> fc_w_, fc_b_;
};

}  // namespace actrans::ssbr
