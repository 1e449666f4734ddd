#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "actrans/ssbr/losses.hpp"
#include "actrans/ssbr/model.hpp"
#include "actrans/volume.hpp"

namespace actrans::ssbr {

struct SsbrConfig {
  SsbrArch arch;
  LossWeights weights;
  int k_volumes = 2;          // K volumes per mini-batch
  int slices_per_volume = 4;  // P sampled slices per volume
  double learning_rate = 1e-3;
  long steps = 2000;
  std::uint64_t seed = 0;
  // Rescale each volume's bm deltas to sum to 2 (the score range) so both
  // sides of the anatomy loss live on the same scale.
  bool renorm_bm_delta = false;
  float window_lo = vol::kDefaultWindowLoHu;
  float window_hi = vol::kDefaultWindowHiHu;
  vol::RoiParams roi_params{};
};

// A volume readied for sampling: normalized intensities plus the
// full-resolution per-slice body masks and the abdominal ROI, all computed
// once from the HU source.
struct PreparedVolume {
  std::string id;
  vol::Volume norm;
  std::vector<vol::BodyMask> masks;
  vol::RoiBounds roi;

  int roi_len() const { return roi.bottom - roi.top + 1; }
};

PreparedVolume prepare_volume(const vol::Volume& hu, const SsbrConfig& cfg,
                              std::string id = {});

struct SsbrBatch {
  nn::Tensor<float> slices;    // (K*P, 1, h, w), volume-major
  ScoreMat<float> bm_deltas;   // K x (P-1)
  std::vector<std::vector<int>> indices;  // absolute slice indices per volume
};

// Samples K volumes and P slices each: equally spaced ROI positions plus
// uniform jitter of half a stride, kept strictly increasing. Volumes whose
// ROI is shorter than P are skipped.
SsbrBatch make_ssbr_batch(const std::vector<PreparedVolume>& volumes,
                          const SsbrConfig& cfg, Rng& rng);

struct ScoreSeries {
  std::string volume_id;
  std::vector<double> scores;  // one per ROI slice, cranial to caudal
};

// One score per ROI slice; the volume must already be normalized.
ScoreSeries score_volume(const SsbrNet<float>& net, const vol::Volume& v,
                         const vol::RoiBounds& roi);

// Runs `cfg.steps` Adam steps of the combined loss. Writes one log line per
// step ("step loss L_order L_anat L_norm") when a log stream is given.
SsbrNet<float> train_ssbr(const SsbrConfig& cfg,
                          const std::vector<PreparedVolume>& volumes,
                          std::ostream* log);

nn::Checkpoint ssbr_to_checkpoint(const SsbrNet<float>& net,
                                  const SsbrConfig& cfg, long steps_done);
void save_ssbr_checkpoint(const SsbrNet<float>& net, const SsbrConfig& cfg,
                          long steps_done, const std::filesystem::path& path);
SsbrNet<float> load_ssbr_checkpoint(const std::filesystem::path& path);

}  // namespace actrans::ssbr
