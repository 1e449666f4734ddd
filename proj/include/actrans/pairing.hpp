#pragma once

#include <vector>

#include "actrans/ssbr/train.hpp"

namespace actrans::pairing {

// Position-based selection baseline: m = clamp(round(n * M / N), 0, M-1),
// rounding half away from zero.
int pbs_pair(int n, int num_n, int num_m);

// J i.i.d. uniform targets in [-1, 1].
std::vector<double> sample_target_scores(int j, Rng& rng);

// Index of the score closest to target; ties go to the lowest index.
int select_by_score(const std::vector<double>& scores, double target);

struct SlicePair {
  int idx_a = 0, idx_b = 0;  // absolute slice indices inside the ROIs
  double target_score = 0, score_a = 0, score_b = 0;
  vol::ImageF slice_a, slice_b;    // normalized, resized to the batch size
  vol::MaskBits mask_a, mask_b;    // body masks, nearest-resized to match
};

struct PairedBatch {
  std::vector<SlicePair> pairs;

  nn::Tensor<float> tensor_a(int h, int w) const;
  nn::Tensor<float> tensor_b(int h, int w) const;
};

// The five-step selection: restrict to ROIs, score both with the regressor,
// sample J targets, pick the closest-score slice per domain.
PairedBatch make_paired_batch(const ssbr::PreparedVolume& va,
                              const ssbr::PreparedVolume& vb,
                              const ssbr::SsbrNet<float>& model, int j,
                              Rng& rng, int out_h, int out_w);

// Proportional-position baseline over the same ROIs; score fields are NaN.
PairedBatch make_pbs_batch(const ssbr::PreparedVolume& va,
                           const ssbr::PreparedVolume& vb, int j, Rng& rng,
                           int out_h, int out_w);

}  // namespace actrans::pairing
