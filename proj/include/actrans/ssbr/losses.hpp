#pragma once

#include <Eigen/Core>
#include <cmath>

#include "actrans/errors.hpp"

// Training losses of the slice-position regressor. Rows index volumes in the
// mini-batch (K), columns index the P sampled slices, cranial to caudal.

namespace actrans::ssbr {

template <typename S>
using ScoreMat =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LossWeights {
  double alpha = 5e-3;  // order
  double beta = 1.0;    // anatomy
  double gamma = 10.0;  // range normalization
};

// log(1 + e^x) without overflow; -log(sigmoid(d)) == softplus(-d).
template <typename S>
S softplus(S x) {
  return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                   : std::exp(x) / (S(1) + std::exp(x));
}

// Smoothed L1 with unit transition: x^2/2 inside [-1,1], |x| - 1/2 outside.
template <typename S>
S huber(S x) {
  const S a = std::abs(x);
  return a <= S(1) ? x * x / S(2) : a - S(1) / S(2);
}

template <typename S>
S huber_grad(S x) {
  return std::abs(x) <= S(1) ? x : (x > S(0) ? S(1) : S(-1));
}

// Sum over volumes and adjacent slice pairs of -log sigmoid(score_{p+1} -
// score_p); penalizes out-of-order scores.
template <typename S>
S loss_order(const ScoreMat<S>& scores) {
  if (scores.cols() < 2) throw dimension_error("loss_order needs P >= 2");
  S loss = S(0);
  for (Eigen::Index k = 0; k < scores.rows(); ++k)
    for (Eigen::Index p = 0; p + 1 < scores.cols(); ++p)
      loss += softplus(-(scores(k, p + 1) - scores(k, p)));
  return loss;
}

template <typename S>
ScoreMat<S> loss_order_grad(const ScoreMat<S>& scores) {
  ScoreMat<S> g = ScoreMat<S>::Zero(scores.rows(), scores.cols());
  for (Eigen::Index k = 0; k < scores.rows(); ++k)
    for (Eigen::Index p = 0; p + 1 < scores.cols(); ++p) {
      const S d = scores(k, p + 1) - scores(k, p);
      const S s = sigmoid(-d);  // d/dd softplus(-d) = -sigmoid(-d)
      g(k, p + 1) -= s;
      g(k, p) += s;
    }
  return g;
}

// Pins the first sampled slice of each volume to -1 and the last to +1.
template <typename S>
S loss_norm(const ScoreMat<S>& scores) {
  if (scores.cols() < 2) throw dimension_error("loss_norm needs P >= 2");
  S loss = S(0);
  const Eigen::Index last = scores.cols() - 1;
  for (Eigen::Index k = 0; k < scores.rows(); ++k)
    loss += huber(scores(k, 0) + S(1)) + huber(scores(k, last) - S(1));
  return loss;
}

template <typename S>
ScoreMat<S> loss_norm_grad(const ScoreMat<S>& scores) {
  ScoreMat<S> g = ScoreMat<S>::Zero(scores.rows(), scores.cols());
  const Eigen::Index last = scores.cols() - 1;
  for (Eigen::Index k = 0; k < scores.rows(); ++k) {
    g(k, 0) += huber_grad(scores(k, 0) + S(1));
    g(k, last) += huber_grad(scores(k, last) - S(1));
  }
  return g;
}

// Pulls adjacent score differences toward the body-mask change between the
// same slices: sum f(delta_bm - (score_{p+1} - score_p)).
template <typename S>
S loss_anat(const ScoreMat<S>& scores, const ScoreMat<S>& bm_deltas) {
  if (bm_deltas.rows() != scores.rows() ||
      bm_deltas.cols() != scores.cols() - 1)
    throw dimension_error("loss_anat needs bm_deltas of shape K x (P-1)");
  S loss = S(0);
  for (Eigen::Index k = 0; k < scores.rows(); ++k)
    for (Eigen::Index p = 0; p + 1 < scores.cols(); ++p) {
      const S delta = scores(k, p + 1) - scores(k, p);
      loss += huber(bm_deltas(k, p) - delta);
    }
  return loss;
}

template <typename S>
ScoreMat<S> loss_anat_grad(const ScoreMat<S>& scores,
                           const ScoreMat<S>& bm_deltas) {
  ScoreMat<S> g = ScoreMat<S>::Zero(scores.rows(), scores.cols());
  for (Eigen::Index k = 0; k < scores.rows(); ++k)
    for (Eigen::Index p = 0; p + 1 < scores.cols(); ++p) {
      const S delta = scores(k, p + 1) - scores(k, p);
      const S d = huber_grad(bm_deltas(k, p) - delta);
      g(k, p + 1) -= d;
      g(k, p) += d;
    }
  return g;
}

template <typename S>
S loss_ssbr(const ScoreMat<S>& scores, const ScoreMat<S>& bm_deltas,
            const LossWeights& w) {
  return S(w.alpha) * loss_order(scores) + S(w.beta) * loss_anat(scores, bm_deltas) +
         S(w.gamma) * loss_norm(scores);
}

template <typename S>
ScoreMat<S> loss_ssbr_grad(const ScoreMat<S>& scores,
                           const ScoreMat<S>& bm_deltas,
                           const LossWeights& w) {
  return (S(w.alpha) * loss_order_grad(scores) +
          S(w.beta) * loss_anat_grad(scores, bm_deltas) +
          S(w.gamma) * loss_norm_grad(scores))
      .eval();
}

}  // namespace actrans::ssbr
