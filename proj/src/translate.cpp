#include "actrans/translate/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace actrans::translate {

void TranslatorConfig::validate() const {
  if (gen_channels < 1 || gen_blocks < 0 || disc_channels < 1 ||
      disc_layers < 1)
    throw config_error("bad network size configuration");
  if (w_adv < 0 || w_cyc < 0 || w_id < 0 || w_acl < 0)
    throw config_error("loss weights must be non-negative");
  if (image_h % 4 != 0 || image_w % 4 != 0)
    throw config_error("image size must be divisible by 4");
  if (batch_j < 1) throw config_error("batch size must be >= 1");
  if (fake_pool_size < 1) throw config_error("fake pool size must be >= 1");
  if (strategy != "ssbr" && strategy != "pbs")
    throw config_error("strategy must be 'ssbr' or 'pbs'");
}

nn::Tensor<float> FakePool::query(const nn::Tensor<float>& fresh, Rng& rng) {
  nn::Tensor<float> out(fresh.n(), fresh.c(), fresh.h(), fresh.w());
  for (int n = 0; n < fresh.n(); ++n) {
    nn::Tensor<float> img(1, fresh.c(), fresh.h(), fresh.w());
    img.plane(0, 0) = fresh.plane(n, 0);
    if (static_cast<int>(images_.size()) < capacity_) {
      images_.push_back(img);
      out.plane(n, 0) = img.plane(0, 0);
    } else if (rng.uniform() < 0.5) {
      out.plane(n, 0) = img.plane(0, 0);
    } else {
      const int j = rng.uniform_int(0, capacity_ - 1);
      out.plane(n, 0) = images_[j].plane(0, 0);
      images_[j] = img;
    }
  }
  return out;
}

namespace {

double l1_mean(const nn::Tensor<float>& x, const nn::Tensor<float>& y) {
  return (x.data - y.data).abs().cast<double>().sum() /
         static_cast<double>(x.count());
}

// scale * sign(x - y) / count
nn::Tensor<float> l1_grad(const nn::Tensor<float>& x,
                          const nn::Tensor<float>& y, double scale) {
  nn::Tensor<float> g;
  g.shape = x.shape;
  const float s = static_cast<float>(scale / static_cast<double>(x.count()));
  g.data = (x.data - y.data).sign() * s;
  return g;
}

double lsgan_loss(const nn::Tensor<float>& map, float target) {
  return (map.data - target).square().cast<double>().sum() /
         static_cast<double>(map.count());
}

nn::Tensor<float> lsgan_grad(const nn::Tensor<float>& map, float target,
                             double scale) {
  nn::Tensor<float> g;
  g.shape = map.shape;
  const float s =
      static_cast<float>(2.0 * scale / static_cast<double>(map.count()));
  g.data = (map.data - target) * s;
  return g;
}

}  // namespace

double loss_acl(const ssbr::SsbrNet<float>& scorer,
                const nn::Tensor<float>& real, const nn::Tensor<float>& fake) {
  if (!real.same_shape(fake)) throw dimension_error("ACL batch size mismatch");
  const auto cr = scorer.forward(real);
  const auto cf = scorer.forward(fake);
  return (cr.scores.data - cf.scores.data).abs().cast<double>().sum() /
         static_cast<double>(real.n());
}

Trainer::Trainer(const TranslatorConfig& cfg,
                 std::optional<ssbr::SsbrNet<float>> scorer)
    : cfg_(cfg),
      g_ab_(cfg.gen_channels, cfg.gen_blocks, cfg.template_mode),
      g_ba_(cfg.gen_channels, cfg.gen_blocks, cfg.template_mode),
      d_a_(cfg.disc_channels, cfg.disc_layers),
      d_b_(cfg.disc_channels, cfg.disc_layers),
      scorer_(std::move(scorer)),
      g_params_(),
      da_params_(),
      db_params_(),
      g_adam_((init_nets(cfg), g_params_), static_cast<float>(cfg.learning_rate),
              0.5f),
      da_adam_(da_params_, static_cast<float>(cfg.learning_rate), 0.5f),
      db_adam_(db_params_, static_cast<float>(cfg.learning_rate), 0.5f),
      pool_a_(cfg.fake_pool_size),
      pool_b_(cfg.fake_pool_size),
      pool_rng_(Rng::substream(cfg.seed, "translate/pool")) {
  cfg_.validate();
  if (cfg_.w_acl > 0 && !scorer_)
    throw config_error("ACL weight > 0 requires a trained slice scorer");
  if (cfg_.w_acl > 0 &&
      (scorer_->arch().input_h != cfg_.image_h ||
       scorer_->arch().input_w != cfg_.image_w))
    throw config_error("scorer input size must match the translator image size");
}

void Trainer::init_nets(const TranslatorConfig& cfg) {
  Rng r_gab = Rng::substream(cfg.seed, "translate/init/g_ab");
  Rng r_gba = Rng::substream(cfg.seed, "translate/init/g_ba");
  Rng r_da = Rng::substream(cfg.seed, "translate/init/d_a");
  Rng r_db = Rng::substream(cfg.seed, "translate/init/d_b");
  g_ab_.init(r_gab);
  g_ba_.init(r_gba);
  d_a_.init(r_da);
  d_b_.init(r_db);
  g_params_ = g_ab_.params();
  for (auto* p : g_ba_.params()) g_params_.push_back(p);
  da_params_ = d_a_.params();
  db_params_ = d_b_.params();
}

StepLosses Trainer::step(const nn::Tensor<float>& real_a,
                         const nn::Tensor<float>& real_b) {
  if (!real_a.same_shape(real_b))
    throw dimension_error("domain batches must have equal shapes");
  StepLosses out;

  // --- generator update -----------------------------------------------------
  auto c_fake_b = g_ab_.forward(real_a);
  auto c_fake_a = g_ba_.forward(real_b);
  auto c_rec_a = g_ba_.forward(c_fake_b.y);
  auto c_rec_b = g_ab_.forward(c_fake_a.y);

  auto c_db = d_b_.forward(c_fake_b.y);
  auto c_da = d_a_.forward(c_fake_a.y);
  out.adv_g = lsgan_loss(c_db.map, 1.f) + lsgan_loss(c_da.map, 1.f);
  out.cyc = l1_mean(c_rec_a.y, real_a) + l1_mean(c_rec_b.y, real_b);

  nn::Tensor<float> d_fake_b =
      d_b_.backward(c_db, lsgan_grad(c_db.map, 1.f, cfg_.w_adv), false);
  nn::Tensor<float> d_fake_a =
      d_a_.backward(c_da, lsgan_grad(c_da.map, 1.f, cfg_.w_adv), false);
  d_fake_b.data +=
      g_ba_.backward(c_rec_a, l1_grad(c_rec_a.y, real_a, cfg_.w_cyc), true)
          .data;
  d_fake_a.data +=
      g_ab_.backward(c_rec_b, l1_grad(c_rec_b.y, real_b, cfg_.w_cyc), true)
          .data;

  if (scorer_ && cfg_.w_acl > 0) {
    const int j = real_a.n();
    auto acl_dir = [&](const nn::Tensor<float>& real,
                       const nn::Tensor<float>& fake,
                       nn::Tensor<float>& dfake) {
      const auto cr = scorer_->forward(real);
      auto cf = scorer_->forward(fake);
      double loss = 0.0;
      nn::Tensor<float> ds(j, 1, 1, 1);
      for (int i = 0; i < j; ++i) {
        const float diff = cf.scores.data[i] - cr.scores.data[i];
        loss += std::abs(diff);
        ds.data[i] = static_cast<float>(
            cfg_.w_acl * (diff > 0.f ? 1.0 : (diff < 0.f ? -1.0 : 0.0)) / j);
      }
      dfake.data += scorer_->backward(cf, ds, false).data;
      return loss / j;
    };
    out.acl = acl_dir(real_a, c_fake_b.y, d_fake_b) +
              acl_dir(real_b, c_fake_a.y, d_fake_a);
  }

  if (cfg_.w_id > 0) {
    auto c_id_b = g_ab_.forward(real_b);
    auto c_id_a = g_ba_.forward(real_a);
    out.id = l1_mean(c_id_b.y, real_b) + l1_mean(c_id_a.y, real_a);
    g_ab_.backward(c_id_b, l1_grad(c_id_b.y, real_b, cfg_.w_id), true);
    g_ba_.backward(c_id_a, l1_grad(c_id_a.y, real_a, cfg_.w_id), true);
  }

  g_ab_.backward(c_fake_b, d_fake_b, true);
  g_ba_.backward(c_fake_a, d_fake_a, true);
  g_adam_.step(g_params_);
  nn::Adam<float>::zero_grads(g_params_);

  // --- discriminator updates (pool-sampled fakes) ----------------------------
  const nn::Tensor<float> pooled_b = pool_b_.query(c_fake_b.y, pool_rng_);
  const nn::Tensor<float> pooled_a = pool_a_.query(c_fake_a.y, pool_rng_);

  {
    auto cr = d_b_.forward(real_b);
    auto cf = d_b_.forward(pooled_b);
    out.disc_b = 0.5 * (lsgan_loss(cr.map, 1.f) + lsgan_loss(cf.map, 0.f));
    d_b_.backward(cr, lsgan_grad(cr.map, 1.f, 0.5), true);
    d_b_.backward(cf, lsgan_grad(cf.map, 0.f, 0.5), true);
    db_adam_.step(db_params_);
    nn::Adam<float>::zero_grads(db_params_);
  }
  {
    auto cr = d_a_.forward(real_a);
    auto cf = d_a_.forward(pooled_a);
    out.disc_a = 0.5 * (lsgan_loss(cr.map, 1.f) + lsgan_loss(cf.map, 0.f));
    d_a_.backward(cr, lsgan_grad(cr.map, 1.f, 0.5), true);
    d_a_.backward(cf, lsgan_grad(cf.map, 0.f, 0.5), true);
    da_adam_.step(da_params_);
    nn::Adam<float>::zero_grads(da_params_);
  }

  const double total =
      out.adv_g + out.cyc + out.id + out.acl + out.disc_a + out.disc_b;
  if (!std::isfinite(total)) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "non-finite translator loss at step %ld",
                  steps_done_);
    throw data_error(msg);
  }
  ++steps_done_;
  return out;
}

nn::Checkpoint Trainer::to_checkpoint() const {
  nn::Checkpoint ckpt;
  auto& m = ckpt.manifest;
  m.set("kind", "translator");
  m.set_int("gen_channels", cfg_.gen_channels);
  m.set_int("gen_blocks", cfg_.gen_blocks);
  m.set_int("disc_channels", cfg_.disc_channels);
  m.set_int("disc_layers", cfg_.disc_layers);
  m.set_int("template_mode", cfg_.template_mode ? 1 : 0);
  m.set_int("mask_postprocess", cfg_.mask_postprocess ? 1 : 0);
  m.set_int("image_h", cfg_.image_h);
  m.set_int("image_w", cfg_.image_w);
  m.set_double("w_adv", cfg_.w_adv);
  m.set_double("w_cyc", cfg_.w_cyc);
  m.set_double("w_id", cfg_.w_id);
  m.set_double("w_acl", cfg_.w_acl);
  m.set_double("learning_rate", cfg_.learning_rate);
  m.set_int("fake_pool_size", cfg_.fake_pool_size);
  m.set_int("steps_done", steps_done_);
  m.set_int("seed", static_cast<long>(cfg_.seed));
  m.set("strategy", cfg_.strategy);
  g_ab_.append_to_checkpoint(ckpt, "g_ab.");
  g_ba_.append_to_checkpoint(ckpt, "g_ba.");
  d_a_.append_to_checkpoint(ckpt, "d_a.");
  d_b_.append_to_checkpoint(ckpt, "d_b.");
  return ckpt;
}

vol::ImageF apply_mask_postprocess(const Eigen::Ref<const vol::ImageF>& fake,
                                   const vol::MaskBits& mask) {
  if (mask.rows() != fake.rows() || mask.cols() != fake.cols())
    throw dimension_error("mask/slice shape mismatch");
  vol::ImageF out(fake.rows(), fake.cols());
  for (Eigen::Index y = 0; y < fake.rows(); ++y)
    for (Eigen::Index x = 0; x < fake.cols(); ++x)
      out(y, x) = mask(y, x) ? fake(y, x) : -1.f;
  return out;
}

vol::Volume translate_volume(const Generator<float>& g, const vol::Volume& v,
                             const vol::RoiBounds& roi, bool mask_postprocess,
                             float window_lo, float window_hi) {
  if (roi.top < 0 || roi.bottom >= v.nz || roi.top > roi.bottom)
    throw dimension_error("ROI out of range");
  if (v.normalized && mask_postprocess)
    throw state_error(
        "mask postprocessing needs HU input to derive body masks");

  std::vector<vol::MaskBits> masks;
  vol::Volume norm;
  if (v.normalized) {
    norm = v;
  } else {
    if (mask_postprocess) {
      masks.reserve(roi.bottom - roi.top + 1);
      for (int z = roi.top; z <= roi.bottom; ++z)
        masks.push_back(vol::body_mask(v.slice(z)).bits);
    }
    norm = vol::normalize_intensity(v, window_lo, window_hi);
  }

  vol::Volume out;
  out.nz = roi.bottom - roi.top + 1;
  out.ny = v.ny;
  out.nx = v.nx;
  out.dz = v.dz;
  out.dy = v.dy;
  out.dx = v.dx;
  out.normalized = true;
  out.modality = (v.modality == vol::Modality::contrast_a)
                     ? vol::Modality::noncontrast_b
                     : (v.modality == vol::Modality::noncontrast_b
                            ? vol::Modality::contrast_a
                            : vol::Modality::unknown);
  out.voxels.resize(out.voxel_count());

  nn::Tensor<float> x(1, 1, v.ny, v.nx);
  for (int i = 0; i < out.nz; ++i) {
    x.plane(0, 0) = norm.slice(roi.top + i);
    const auto ctx = g.forward(x);
    vol::ImageF fake = ctx.y.plane(0, 0);
    if (mask_postprocess) fake = apply_mask_postprocess(fake, masks[i]);
    out.set_slice(i, fake);
  }
  return out;
}

Generator<float> load_generator(const nn::Checkpoint& ckpt,
                                const std::string& prefix) {
  if (ckpt.manifest.at("kind") != "translator")
    throw format_error("not a translator checkpoint");
  Generator<float> g(ckpt.manifest.get_int("gen_channels"),
                     ckpt.manifest.get_int("gen_blocks"),
                     ckpt.manifest.get_int("template_mode") != 0);
  g.load_from_checkpoint(ckpt, prefix);
  return g;
}

Trainer train_translation(const TranslatorConfig& cfg,
                          const std::vector<ssbr::PreparedVolume>& vols_a,
                          const std::vector<ssbr::PreparedVolume>& vols_b,
                          const ssbr::SsbrNet<float>* scorer,
                          const std::filesystem::path& out_dir,
                          std::ostream* log) {
  cfg.validate();
  if (vols_a.empty() || vols_b.empty())
    throw data_error("need at least one volume per domain");
  if (cfg.strategy == "ssbr" && scorer == nullptr)
    throw config_error("ssbr pairing strategy requires a trained scorer");

  std::optional<ssbr::SsbrNet<float>> frozen;
  if (scorer) frozen = *scorer;
  Trainer trainer(cfg, std::move(frozen));

  Rng rng_data = Rng::substream(cfg.seed, "translate/data");
  Rng rng_pair = Rng::substream(cfg.seed, "pairing");

  const bool persist = !out_dir.empty();
  auto write_ckpt = [&](const std::string& name) {
    if (persist) nn::save_checkpoint(trainer.to_checkpoint(), out_dir / name);
  };
  write_ckpt("translator_step000000.ckpt");

  std::filesystem::path last_ckpt = out_dir / "translator_step000000.ckpt";
  char buf[256];
  for (long s = 0; s < cfg.steps; ++s) {
    const auto& va = vols_a[rng_data.uniform_int(0, int(vols_a.size()) - 1)];
    const auto& vb = vols_b[rng_data.uniform_int(0, int(vols_b.size()) - 1)];
    pairing::PairedBatch batch =
        (cfg.strategy == "ssbr")
            ? pairing::make_paired_batch(va, vb, *scorer, cfg.batch_j,
                                         rng_pair, cfg.image_h, cfg.image_w)
            : pairing::make_pbs_batch(va, vb, cfg.batch_j, rng_pair,
                                      cfg.image_h, cfg.image_w);
    StepLosses losses;
    try {
      losses = trainer.step(batch.tensor_a(cfg.image_h, cfg.image_w),
                            batch.tensor_b(cfg.image_h, cfg.image_w));
    } catch (const data_error& e) {
      throw data_error(std::string(e.what()) +
                       "; last good checkpoint: " + last_ckpt.string());
    }
    if (log) {
      std::snprintf(buf, sizeof buf, "%ld %.6f %.6f %.6f %.6f %.6f %.6f", s,
                    losses.adv_g, losses.cyc, losses.id, losses.acl,
                    losses.disc_a, losses.disc_b);
      (*log) << buf << "\n";
    }
    if (persist && cfg.checkpoint_every > 0 &&
        (s + 1) % cfg.checkpoint_every == 0 && s + 1 < cfg.steps) {
      std::snprintf(buf, sizeof buf, "translator_step%06ld.ckpt", s + 1);
      write_ckpt(buf);
      last_ckpt = out_dir / buf;
    }
  }
  write_ckpt("translator_final.ckpt");
  return trainer;
}

}  // namespace actrans::translate
