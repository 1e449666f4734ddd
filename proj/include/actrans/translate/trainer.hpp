#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "actrans/nn/adam.hpp"
#include "actrans/pairing.hpp"
#include "actrans/translate/nets.hpp"

namespace actrans::translate {

struct TranslatorConfig {
  int gen_channels = 16;
  int gen_blocks = 4;
  int disc_channels = 32;
  int disc_layers = 3;
  double w_adv = 1.0, w_cyc = 10.0, w_id = 0.5, w_acl = 1.0;
  bool template_mode = true;    // generator predicts a residual over the input
  bool mask_postprocess = true; // body-mask cleanup at inference
  int image_h = 64, image_w = 64;
  double learning_rate = 2e-4;
  long steps = 2000;
  int fake_pool_size = 50;
  std::uint64_t seed = 0;
  std::string strategy = "ssbr";  // slice selection: "ssbr" or "pbs"
  int batch_j = 8;
  long checkpoint_every = 500;
  float window_lo = vol::kDefaultWindowLoHu;
  float window_hi = vol::kDefaultWindowHiHu;

  void validate() const;
};

// Replay buffer of generated images; feeds the discriminators a mix of
// current and historical fakes.
class FakePool {
 public:
  explicit FakePool(int capacity) : capacity_(capacity) {}

  nn::Tensor<float> query(const nn::Tensor<float>& fresh, Rng& rng);

 private:
  int capacity_;
  std::vector<nn::Tensor<float>> images_;  // each (1, 1, h, w)
};

struct StepLosses {
  double adv_g = 0, cyc = 0, id = 0, acl = 0, disc_a = 0, disc_b = 0;
};

// Mean absolute score difference between real and generated slices under a
// frozen regressor. Gradients (taken by the trainer) flow only into the
// generated slices.
double loss_acl(const ssbr::SsbrNet<float>& scorer,
                const nn::Tensor<float>& real, const nn::Tensor<float>& fake);

// Owns both generators, both discriminators, their optimizers, the replay
// pools and a frozen copy of the slice scorer.
class Trainer {
 public:
  Trainer(const TranslatorConfig& cfg,
          std::optional<ssbr::SsbrNet<float>> scorer);

  StepLosses step(const nn::Tensor<float>& real_a,
                  const nn::Tensor<float>& real_b);

  long steps_done() const { return steps_done_; }
  const TranslatorConfig& config() const { return cfg_; }
  Generator<float>& g_ab() { return g_ab_; }
  Generator<float>& g_ba() { return g_ba_; }
  const Generator<float>& g_ab() const { return g_ab_; }
  const Generator<float>& g_ba() const { return g_ba_; }
  PatchDiscriminator<float>& d_a() { return d_a_; }
  PatchDiscriminator<float>& d_b() { return d_b_; }
  const ssbr::SsbrNet<float>* scorer() const {
    return scorer_ ? &*scorer_ : nullptr;
  }

  nn::Checkpoint to_checkpoint() const;

 private:
  // Seeds all four networks and collects the parameter lists; runs before
  // the optimizers are constructed.
  void init_nets(const TranslatorConfig& cfg);

  TranslatorConfig cfg_;
  Generator<float> g_ab_, g_ba_;
  PatchDiscriminator<float> d_a_, d_b_;
  std::optional<ssbr::SsbrNet<float>> scorer_;
  nn::ParamRefs<float> g_params_, da_params_, db_params_;
  nn::Adam<float> g_adam_, da_adam_, db_adam_;
  FakePool pool_a_, pool_b_;
  Rng pool_rng_;
  long steps_done_ = 0;
};

// Replace everything outside the body mask with the air value -1; pixels
// inside the mask pass through untouched.
vol::ImageF apply_mask_postprocess(const Eigen::Ref<const vol::ImageF>& fake,
                                   const vol::MaskBits& mask);

// Slice-by-slice translation of the ROI. HU input is windowed first (the
// masks for postprocessing come from the HU slices); an already-normalized
// volume is accepted only with mask_postprocess off.
vol::Volume translate_volume(const Generator<float>& g, const vol::Volume& v,
                             const vol::RoiBounds& roi, bool mask_postprocess,
                             float window_lo = vol::kDefaultWindowLoHu,
                             float window_hi = vol::kDefaultWindowHiHu);

Generator<float> load_generator(const nn::Checkpoint& ckpt,
                                const std::string& prefix);

// Training loop: pick one volume per domain, build an anatomically-paired
// (or PBS) batch, run one trainer step. Writes periodic checkpoints and a
// per-step loss log when given an output directory / stream.
Trainer train_translation(const TranslatorConfig& cfg,
                          const std::vector<ssbr::PreparedVolume>& vols_a,
                          const std::vector<ssbr::PreparedVolume>& vols_b,
                          const ssbr::SsbrNet<float>* scorer,
                          const std::filesystem::path& out_dir,
                          std::ostream* log);

}  // namespace actrans::translate
