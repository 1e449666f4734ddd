#include "actrans/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace actrans::pairing {

int pbs_pair(int n, int num_n, int num_m) {
  if (num_n < 1 || num_m < 1) throw dimension_error("pbs_pair needs N, M >= 1");
  if (n < 0 || n >= num_n) throw dimension_error("pbs_pair index out of range");
  const double m = double(n) * double(num_m) / double(num_n);
  const int r = static_cast<int>(m >= 0 ? std::floor(m + 0.5) : std::ceil(m - 0.5));
  return std::clamp(r, 0, num_m - 1);
}

std::vector<double> sample_target_scores(int j, Rng& rng) {
  if (j < 1) throw config_error("need at least one target score");
  std::vector<double> out(j);
  for (double& t : out) t = rng.uniform(-1.0, 1.0);
  return out;
}

int select_by_score(const std::vector<double>& scores, double target) {
  if (scores.empty()) throw data_error("select_by_score on empty series");
  int best = 0;
  double best_d = std::abs(scores[0] - target);
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    const double d = std::abs(scores[i] - target);
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = i;
    }
  }
  return best;
}

nn::Tensor<float> PairedBatch::tensor_a(int h, int w) const {
  nn::Tensor<float> t(static_cast<int>(pairs.size()), 1, h, w);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    t.plane(static_cast<int>(i), 0) = pairs[i].slice_a;
  return t;
}

nn::Tensor<float> PairedBatch::tensor_b(int h, int w) const {
  nn::Tensor<float> t(static_cast<int>(pairs.size()), 1, h, w);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    t.plane(static_cast<int>(i), 0) = pairs[i].slice_b;
  return t;
}

namespace {

void attach_slices(SlicePair& p, const ssbr::PreparedVolume& va,
                   const ssbr::PreparedVolume& vb, int out_h, int out_w) {
  p.slice_a = vol::resize_bilinear(va.norm.slice(p.idx_a), out_h, out_w);
  p.slice_b = vol::resize_bilinear(vb.norm.slice(p.idx_b), out_h, out_w);
  p.mask_a = vol::resize_mask_nearest(va.masks[p.idx_a].bits, out_h, out_w);
  p.mask_b = vol::resize_mask_nearest(vb.masks[p.idx_b].bits, out_h, out_w);
}

}  // namespace

PairedBatch make_paired_batch(const ssbr::PreparedVolume& va,
                              const ssbr::PreparedVolume& vb,
                              const ssbr::SsbrNet<float>& model, int j,
                              Rng& rng, int out_h, int out_w) {
  const ssbr::ScoreSeries sa = ssbr::score_volume(model, va.norm, va.roi);
  const ssbr::ScoreSeries sb = ssbr::score_volume(model, vb.norm, vb.roi);
  if (sa.scores.empty() || sb.scores.empty())
    throw data_error("empty score series");

  PairedBatch batch;
  batch.pairs.resize(j);
  const auto targets = sample_target_scores(j, rng);
  for (int i = 0; i < j; ++i) {
    auto& p = batch.pairs[i];
    p.target_score = targets[i];
    const int la = select_by_score(sa.scores, p.target_score);
    const int lb = select_by_score(sb.scores, p.target_score);
    p.idx_a = va.roi.top + la;
    p.idx_b = vb.roi.top + lb;
    p.score_a = sa.scores[la];
    p.score_b = sb.scores[lb];
    attach_slices(p, va, vb, out_h, out_w);
  }
  return batch;
}

PairedBatch make_pbs_batch(const ssbr::PreparedVolume& va,
                           const ssbr::PreparedVolume& vb, int j, Rng& rng,
                           int out_h, int out_w) {
  const int len_a = va.roi_len(), len_b = vb.roi_len();
  PairedBatch batch;
  batch.pairs.resize(j);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < j; ++i) {
    auto& p = batch.pairs[i];
    const int la = rng.uniform_int(0, len_a - 1);
    const int lb = pbs_pair(la, len_a, len_b);
    p.idx_a = va.roi.top + la;
    p.idx_b = vb.roi.top + lb;
    p.target_score = nan;
    p.score_a = nan;
    p.score_b = nan;
    attach_slices(p, va, vb, out_h, out_w);
  }
  return batch;
}

}  // namespace actrans::pairing
