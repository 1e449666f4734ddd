#include "actrans/ssbr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "actrans/nn/adam.hpp"

namespace actrans::ssbr {

PreparedVolume prepare_volume(const vol::Volume& hu, const SsbrConfig& cfg,
                              std::string id) {
  if (hu.normalized)
    throw state_error("prepare_volume expects HU intensities");
  PreparedVolume out;
  out.id = std::move(id);
  out.roi = vol::select_abdominal_roi(hu, cfg.roi_params);
  out.masks.reserve(hu.nz);
  for (int z = 0; z < hu.nz; ++z) out.masks.push_back(vol::body_mask(hu.slice(z)));
  out.norm = vol::normalize_intensity(hu, cfg.window_lo, cfg.window_hi);
  return out;
}

namespace {

// Equally spaced ROI positions with +-stride/2 jitter, rounded half-up and
// deduplicated so indices stay strictly increasing inside the ROI. With
// roi_len == P this degenerates to the full index range.
std::vector<int> sample_slice_indices(const vol::RoiBounds& roi, int p,
                                      Rng& rng) {
  const int len = roi.bottom - roi.top + 1;
  const double stride = (p > 1) ? double(len - 1) / double(p - 1) : 0.0;
  std::vector<int> idx(p);
  for (int i = 0; i < p; ++i) {
    const double base = roi.top + i * stride;
    const double jitter = (rng.uniform() - 0.5) * stride;
    const int pos = static_cast<int>(std::floor(base + jitter + 0.5));
    idx[i] = std::clamp(pos, roi.top, roi.bottom);
  }
  std::sort(idx.begin(), idx.end());
  for (int i = 1; i < p; ++i)
    if (idx[i] <= idx[i - 1]) idx[i] = idx[i - 1] + 1;
  for (int i = p - 1; i > 0; --i) {
    if (idx[i] > roi.bottom) idx[i] = roi.bottom;
    if (idx[i - 1] >= idx[i]) idx[i - 1] = idx[i] - 1;
  }
  return idx;
}

}  // namespace

SsbrBatch make_ssbr_batch(const std::vector<PreparedVolume>& volumes,
                          const SsbrConfig& cfg, Rng& rng) {
  const int k = cfg.k_volumes, p = cfg.slices_per_volume;
  if (p < 2) throw config_error("slices_per_volume must be >= 2");

  std::vector<int> eligible;
  for (std::size_t i = 0; i < volumes.size(); ++i)
    if (volumes[i].roi_len() >= p) eligible.push_back(static_cast<int>(i));
  if (eligible.empty())
    throw data_error("no volume has an ROI with at least P slices");

  SsbrBatch batch;
  batch.slices.resize(k * p, 1, cfg.arch.input_h, cfg.arch.input_w);
  batch.bm_deltas.resize(k, p - 1);
  batch.indices.resize(k);

  for (int kk = 0; kk < k; ++kk) {
    const auto& v =
        volumes[eligible[rng.uniform_int(0, int(eligible.size()) - 1)]];
    auto idx = sample_slice_indices(v.roi, p, rng);
    for (int i = 0; i < p; ++i) {
      const vol::ImageF img = vol::resize_bilinear(
          v.norm.slice(idx[i]), cfg.arch.input_h, cfg.arch.input_w);
      batch.slices.plane(kk * p + i, 0) = img;
    }
    double sum = 0.0;
    for (int i = 0; i + 1 < p; ++i) {
      const double d = vol::bm_delta(v.masks[idx[i]], v.masks[idx[i + 1]]);
      batch.bm_deltas(kk, i) = static_cast<float>(d);
      sum += d;
    }
    if (cfg.renorm_bm_delta && sum > 0.0)
      batch.bm_deltas.row(kk) *= static_cast<float>(2.0 / sum);
    batch.indices[kk] = std::move(idx);
  }
  return batch;
}

ScoreSeries score_volume(const SsbrNet<float>& net, const vol::Volume& v,
                         const vol::RoiBounds& roi) {
  if (!v.normalized) throw state_error("score_volume expects a normalized volume");
  if (roi.top < 0 || roi.bottom >= v.nz || roi.top > roi.bottom)
    throw dimension_error("ROI out of range");
  const auto& arch = net.arch();
  const int len = roi.bottom - roi.top + 1;
  nn::Tensor<float> x(len, 1, arch.input_h, arch.input_w);
  for (int i = 0; i < len; ++i)
    x.plane(i, 0) =
        vol::resize_bilinear(v.slice(roi.top + i), arch.input_h, arch.input_w);
  const auto ctx = net.forward(x);
  ScoreSeries out;
  out.scores.resize(len);
  for (int i = 0; i < len; ++i) out.scores[i] = ctx.scores.data[i];
  return out;
}

SsbrNet<float> train_ssbr(const SsbrConfig& cfg,
                          const std::vector<PreparedVolume>& volumes,
                          std::ostream* log) {
  SsbrNet<float> net(cfg.arch);
  Rng init_rng = Rng::substream(cfg.seed, "ssbr/init");
  net.init(init_rng);
  Rng batch_rng = Rng::substream(cfg.seed, "ssbr/batches");

  auto params = net.params();
  nn::Adam<float> adam(params, static_cast<float>(cfg.learning_rate));

  const int k = cfg.k_volumes, p = cfg.slices_per_volume;
  char line[256];
  for (long step = 0; step < cfg.steps; ++step) {
    SsbrBatch batch = make_ssbr_batch(volumes, cfg, batch_rng);
    const auto ctx = net.forward(batch.slices);

    ScoreMat<float> scores(k, p);
    for (int kk = 0; kk < k; ++kk)
      for (int i = 0; i < p; ++i) scores(kk, i) = ctx.scores.data[kk * p + i];

    const double l_order = loss_order(scores);
    const double l_anat = loss_anat(scores, batch.bm_deltas);
    const double l_norm = loss_norm(scores);
    const double total = cfg.weights.alpha * l_order +
                         cfg.weights.beta * l_anat + cfg.weights.gamma * l_norm;
    if (!std::isfinite(total)) {
      std::snprintf(line, sizeof line,
                    "non-finite SSBR loss at step %ld (order=%g anat=%g norm=%g)",
                    step, l_order, l_anat, l_norm);
      throw data_error(line);
    }

    const ScoreMat<float> g = loss_ssbr_grad(scores, batch.bm_deltas, cfg.weights);
    nn::Tensor<float> dscores(k * p, 1, 1, 1);
    for (int kk = 0; kk < k; ++kk)
      for (int i = 0; i < p; ++i) dscores.data[kk * p + i] = g(kk, i);

    net.backward(ctx, dscores, true);
    adam.step(params);
    nn::Adam<float>::zero_grads(params);

    if (log) {
      std::snprintf(line, sizeof line, "%ld %.6f %.6f %.6f %.6f", step, total,
                    l_order, l_anat, l_norm);
      (*log) << line << "\n";
    }
  }
  return net;
}

nn::Checkpoint ssbr_to_checkpoint(const SsbrNet<float>& net,
                                  const SsbrConfig& cfg, long steps_done) {
  nn::Checkpoint ckpt;
  auto& m = ckpt.manifest;
  m.set("kind", "ssbr");
  net.arch_to_manifest(m, "arch.");
  m.set_double("loss.alpha", cfg.weights.alpha);
  m.set_double("loss.beta", cfg.weights.beta);
  m.set_double("loss.gamma", cfg.weights.gamma);
  m.set_int("k_volumes", cfg.k_volumes);
  m.set_int("slices_per_volume", cfg.slices_per_volume);
  m.set_double("learning_rate", cfg.learning_rate);
  m.set_int("steps_done", steps_done);
  m.set_int("seed", static_cast<long>(cfg.seed));
  net.append_to_checkpoint(ckpt, "");
  return ckpt;
}

void save_ssbr_checkpoint(const SsbrNet<float>& net, const SsbrConfig& cfg,
                          long steps_done, const std::filesystem::path& path) {
  nn::save_checkpoint(ssbr_to_checkpoint(net, cfg, steps_done), path);
}

SsbrNet<float> load_ssbr_checkpoint(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.manifest.at("kind") != "ssbr")
    throw format_error("not an SSBR checkpoint: " + path.string());
  SsbrNet<float> net(
      SsbrNet<float>::arch_from_manifest(ckpt.manifest, "arch."));
  net.load_from_checkpoint(ckpt, "");
  return net;
}

}  // namespace actrans::ssbr
