#pragma once

#include <cmath>
#include <vector>

#include "actrans/nn/tensor.hpp"

namespace actrans::nn {

// Adam with bias correction. Parameter order is fixed at construction, which
// keeps update order (and therefore results) deterministic.
template <typename S>
class Adam {
 public:
  Adam(const ParamRefs<S>& params, S lr, S beta1 = S(0.9), S beta2 = S(0.999),
       S eps = S(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Param<S>* p : params) {
      m_.push_back(Tensor<S>::zeros(p->value.n(), p->value.c(), p->value.h(),
                                    p->value.w()));
      v_.push_back(Tensor<S>::zeros(p->value.n(), p->value.c(), p->value.h(),
                                    p->value.w()));
    }
  }

  void step(const ParamRefs<S>& params) {
    ++t_;
    const S bc1 = S(1) - std::pow(beta1_, S(t_));
    const S bc2 = S(1) - std::pow(beta2_, S(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      m_[i].data = beta1_ * m_[i].data + (S(1) - beta1_) * p.grad.data;
      v_[i].data =
          beta2_ * v_[i].data + (S(1) - beta2_) * p.grad.data.square();
      p.value.data -=
          lr_ * (m_[i].data / bc1) / ((v_[i].data / bc2).sqrt() + eps_);
    }
  }

  static void zero_grads(const ParamRefs<S>& params) {
    for (Param<S>* p : params) p->grad.data.setZero();
  }

  long step_count() const { return t_; }

 private:
  S lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<S>> m_, v_;
};

}  // namespace actrans::nn
