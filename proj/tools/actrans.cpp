// actrans: phantom generation, slice-score regression, anatomically-paired
// slice selection, contrast translation training/inference, and evaluation.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "actrans/gradcheck.hpp"
#include "actrans/metrics.hpp"
#include "actrans/pairing.hpp"
#include "actrans/phantom.hpp"
#include "actrans/ssbr/train.hpp"
#include "actrans/translate/trainer.hpp"
#include "actrans/volume.hpp"

namespace fs = std::filesystem;
using namespace actrans;

namespace {

std::vector<fs::path> list_avol(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir))
    throw io_error("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".avol")
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw data_error("no .avol volumes in " + dir.string());
  return out;
}

// Resolved-config snapshot, written next to the command's artifacts.
void write_snapshot(CLI::App& cmd, const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw io_error("cannot write " + path.string());
  os << "# resolved configuration: " << cmd.get_name() << "\n";
  os << cmd.config_to_str(true, false);
}

struct SsbrCliOpts {
  ssbr::SsbrConfig cfg;
  int input_size = 64;

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", cfg.steps, "optimization steps");
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
    cmd->add_option("--alpha", cfg.weights.alpha, "order loss weight");
    cmd->add_option("--beta", cfg.weights.beta, "anatomy loss weight");
    cmd->add_option("--gamma", cfg.weights.gamma, "range loss weight");
    cmd->add_option("--k", cfg.k_volumes, "volumes per mini-batch");
    cmd->add_option("--p", cfg.slices_per_volume, "slices per volume");
    cmd->add_option("--depth", cfg.arch.depth, "conv blocks");
    cmd->add_option("--base-channels", cfg.arch.base_channels,
                    "channels of the first block");
    cmd->add_option("--input-size", input_size, "square network input size");
    cmd->add_flag("--renorm-bm-delta", cfg.renorm_bm_delta,
                  "rescale per-volume mask deltas to sum to 2");
    cmd->add_option("--window-lo", cfg.window_lo, "HU window low edge");
    cmd->add_option("--window-hi", cfg.window_hi, "HU window high edge");
    cmd->add_option("--tau-lung", cfg.roi_params.tau_lung,
                    "air-fraction threshold ending the lungs");
    cmd->add_option("--tau-bowel", cfg.roi_params.tau_bowel,
                    "air-fraction threshold ending the bowel");
    cmd->add_flag("--roi-whole-slice", cfg.roi_params.whole_slice_fraction,
                  "use the whole-slice air fraction instead of in-body");
  }

  ssbr::SsbrConfig resolve(std::uint64_t seed) {
    cfg.arch.input_h = input_size;
    cfg.arch.input_w = input_size;
    cfg.seed = seed;
    return cfg;
  }
};

std::vector<ssbr::PreparedVolume> prepare_dir(const fs::path& dir,
                                              const ssbr::SsbrConfig& cfg) {
  std::vector<ssbr::PreparedVolume> out;
  for (const auto& p : list_avol(dir)) {
    vol::Volume hu = vol::load_volume(p);
    out.push_back(ssbr::prepare_volume(hu, cfg, p.stem().string()));
  }
  return out;
}

int cmd_gen_phantoms(const fs::path& out_dir, std::uint64_t seed, int count,
                     int slices_a, int slices_b, int size, double warp_a,
                     double warp_b, double contrast_delta, double noise_sigma,
                     bool preview, CLI::App& cmd) {
  fs::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    phantom::PhantomSpec spec;
    spec.seed = seed + static_cast<std::uint64_t>(i);
    spec.n_slices_a = slices_a;
    spec.n_slices_b = slices_b;
    spec.height = size;
    spec.width = size;
    spec.warp_a.amp = warp_a;
    spec.warp_b.amp = warp_b;
    spec.contrast_delta_hu = contrast_delta;
    spec.noise_sigma_hu = noise_sigma;
    const phantom::PhantomPair pair = phantom::generate_phantom_pair(spec);

    char name[64];
    std::snprintf(name, sizeof name, "phantom_%03d", i);
    vol::save_volume(pair.a, out_dir / (std::string(name) + "_a.avol"));
    vol::save_volume(pair.b, out_dir / (std::string(name) + "_b.avol"));
    phantom::write_manifest(pair, spec,
                            out_dir / (std::string(name) + ".manifest"));
    if (preview) {
      const vol::Volume na = vol::normalize_intensity(pair.a);
      const vol::Volume nb = vol::normalize_intensity(pair.b);
      vol::write_pgm(na.slice(na.nz / 2),
                     out_dir / (std::string(name) + "_a.pgm"));
      vol::write_pgm(nb.slice(nb.nz / 2),
                     out_dir / (std::string(name) + "_b.pgm"));
    }
  }
  write_snapshot(cmd, out_dir / "gen_phantoms_config.txt");
  std::cout << "wrote " << count << " phantom pair(s) to " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_train_ssbr(const fs::path& data_dir, const fs::path& out_dir,
                   SsbrCliOpts& opts, std::uint64_t seed, CLI::App& cmd) {
  const ssbr::SsbrConfig cfg = opts.resolve(seed);
  fs::create_directories(out_dir);

  std::vector<ssbr::PreparedVolume> volumes;
  int n_a = 0, n_b = 0;
  for (const auto& p : list_avol(data_dir)) {
    vol::Volume hu = vol::load_volume(p);
    if (hu.modality == vol::Modality::contrast_a) ++n_a;
    if (hu.modality == vol::Modality::noncontrast_b) ++n_b;
    volumes.push_back(ssbr::prepare_volume(hu, cfg, p.stem().string()));
  }
  if (n_a < 2 || n_b < 2)
    throw data_error(
        "joint training needs at least 2 volumes of each modality");

  std::ofstream log(out_dir / "ssbr_train.log", std::ios::trunc);
  const ssbr::SsbrNet<float> net = ssbr::train_ssbr(cfg, volumes, &log);
  ssbr::save_ssbr_checkpoint(net, cfg, cfg.steps, out_dir / "ssbr.ckpt");
  write_snapshot(cmd, out_dir / "train_ssbr_config.txt");
  std::cout << "wrote " << (out_dir / "ssbr.ckpt").string() << "\n";
  return 0;
}

int cmd_score(const fs::path& ckpt_path, const fs::path& vol_path,
              const fs::path& out_file, const SsbrCliOpts& opts,
              CLI::App& cmd) {
  const ssbr::SsbrNet<float> net = ssbr::load_ssbr_checkpoint(ckpt_path);
  vol::Volume v = vol::load_volume(vol_path);
  vol::RoiBounds roi;
  vol::Volume norm;
  if (v.normalized) {
    roi = vol::RoiBounds{0, v.nz - 1, false};
    norm = v;
  } else {
    roi = vol::select_abdominal_roi(v, opts.cfg.roi_params);
    norm = vol::normalize_intensity(v, opts.cfg.window_lo, opts.cfg.window_hi);
  }
  const ssbr::ScoreSeries series = ssbr::score_volume(net, norm, roi);

  std::ofstream os;
  std::ostream* out = &std::cout;
  if (!out_file.empty()) {
    os.open(out_file, std::ios::trunc);
    if (!os) throw io_error("cannot write " + out_file.string());
    out = &os;
  }
  (*out) << "# slice score (roi " << roi.top << ".." << roi.bottom
         << (roi.fallback ? ", fallback" : "") << ")\n";
  char buf[64];
  for (std::size_t i = 0; i < series.scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d %.6f", roi.top + static_cast<int>(i),
                  series.scores[i]);
    (*out) << buf << "\n";
  }
  if (!out_file.empty())
    write_snapshot(cmd, out_file.parent_path() / "score_config.txt");
  return 0;
}

int cmd_pair(const fs::path& ckpt_path, const fs::path& vol_a,
             const fs::path& vol_b, int j, std::uint64_t seed,
             const std::string& strategy, const fs::path& manifest_path,
             const fs::path& out_file, SsbrCliOpts& opts, CLI::App& cmd) {
  const ssbr::SsbrConfig cfg = opts.resolve(seed);
  const ssbr::PreparedVolume va =
      ssbr::prepare_volume(vol::load_volume(vol_a), cfg, vol_a.stem().string());
  const ssbr::PreparedVolume vb =
      ssbr::prepare_volume(vol::load_volume(vol_b), cfg, vol_b.stem().string());

  Rng rng = Rng::substream(seed, "pairing");
  pairing::PairedBatch batch;
  if (strategy == "ssbr") {
    if (ckpt_path.empty()) throw config_error("ssbr strategy needs --ckpt");
    const ssbr::SsbrNet<float> net = ssbr::load_ssbr_checkpoint(ckpt_path);
    batch = pairing::make_paired_batch(va, vb, net, j, rng,
                                       net.arch().input_h, net.arch().input_w);
  } else if (strategy == "pbs") {
    batch = pairing::make_pbs_batch(va, vb, j, rng, cfg.arch.input_h,
                                    cfg.arch.input_w);
  } else {
    throw config_error("strategy must be 'ssbr' or 'pbs'");
  }

  std::optional<phantom::Manifest> manifest;
  if (!manifest_path.empty()) manifest = phantom::read_manifest(manifest_path);

  std::ofstream os;
  std::ostream* out = &std::cout;
  if (!out_file.empty()) {
    os.open(out_file, std::ios::trunc);
    if (!os) throw io_error("cannot write " + out_file.string());
    out = &os;
  }
  (*out) << "# j target_score idx_A score_A idx_B score_B"
         << (manifest ? " offset" : "") << "\n";
  char buf[160];
  double offset_sum = 0.0;
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    const auto& p = batch.pairs[i];
    std::snprintf(buf, sizeof buf, "%zu %.6f %d %.6f %d %.6f", i,
                  p.target_score, p.idx_a, p.score_a, p.idx_b, p.score_b);
    (*out) << buf;
    if (manifest) {
      const double off =
          phantom::anatomical_offset(p.idx_a, p.idx_b, manifest->corr);
      offset_sum += off;
      std::snprintf(buf, sizeof buf, " %.3f", off);
      (*out) << buf;
    }
    (*out) << "\n";
  }
  if (manifest) {
    std::snprintf(buf, sizeof buf, "# mean_offset = %.4f",
                  offset_sum / batch.pairs.size());
    (*out) << buf << "\n";
  }
  if (!out_file.empty())
    write_snapshot(cmd, out_file.parent_path() / "pair_config.txt");
  return 0;
}

struct TranslateCliOpts {
  translate::TranslatorConfig cfg;
  int image_size = 64;

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", cfg.steps, "training steps");
    cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
    cmd->add_option("--w-adv", cfg.w_adv, "adversarial loss weight");
    cmd->add_option("--w-cyc", cfg.w_cyc, "cycle-consistency loss weight");
    cmd->add_option("--w-id", cfg.w_id, "identity loss weight");
    cmd->add_option("--w-acl", cfg.w_acl, "anatomical constraint loss weight");
    cmd->add_flag("--template,!--no-template", cfg.template_mode,
                  "generator predicts a residual over its input");
    cmd->add_flag("--mask,!--no-mask", cfg.mask_postprocess,
                  "body-mask postprocessing at inference");
    cmd->add_option("--image-size", image_size, "square training image size");
    cmd->add_option("--gen-channels", cfg.gen_channels, "generator width");
    cmd->add_option("--gen-blocks", cfg.gen_blocks, "residual blocks");
    cmd->add_option("--disc-channels", cfg.disc_channels,
                    "discriminator width");
    cmd->add_option("--disc-layers", cfg.disc_layers,
                    "strided discriminator layers");
    cmd->add_option("--pool-size", cfg.fake_pool_size,
                    "fake replay pool size");
    cmd->add_option("--batch-j", cfg.batch_j, "slice pairs per step");
    cmd->add_option("--strategy", cfg.strategy, "slice selection: ssbr or pbs");
    cmd->add_option("--checkpoint-every", cfg.checkpoint_every,
                    "checkpoint interval in steps");
    cmd->add_option("--window-lo", cfg.window_lo, "HU window low edge");
    cmd->add_option("--window-hi", cfg.window_hi, "HU window high edge");
  }

  translate::TranslatorConfig resolve(std::uint64_t seed) {
    cfg.image_h = image_size;
    cfg.image_w = image_size;
    cfg.seed = seed;
    return cfg;
  }
};

int cmd_train_translate(const fs::path& data_a, const fs::path& data_b,
                        const fs::path& ssbr_ckpt, const fs::path& out_dir,
                        TranslateCliOpts& opts, std::uint64_t seed,
                        CLI::App& cmd) {
  const translate::TranslatorConfig cfg = opts.resolve(seed);
  fs::create_directories(out_dir);

  ssbr::SsbrConfig prep_cfg;  // windowing/ROI defaults for data preparation
  prep_cfg.window_lo = cfg.window_lo;
  prep_cfg.window_hi = cfg.window_hi;
  const auto vols_a = prepare_dir(data_a, prep_cfg);
  const auto vols_b = prepare_dir(data_b, prep_cfg);

  std::optional<ssbr::SsbrNet<float>> scorer;
  if (!ssbr_ckpt.empty()) scorer = ssbr::load_ssbr_checkpoint(ssbr_ckpt);
  if ((cfg.strategy == "ssbr" || cfg.w_acl > 0) && !scorer)
    throw config_error(
        "--ssbr checkpoint is required for ssbr pairing or w_acl > 0");

  std::ofstream log(out_dir / "translate_train.log", std::ios::trunc);
  translate::train_translation(cfg, vols_a, vols_b,
                               scorer ? &*scorer : nullptr, out_dir, &log);
  write_snapshot(cmd, out_dir / "train_translate_config.txt");
  std::cout << "wrote " << (out_dir / "translator_final.ckpt").string()
            << "\n";
  return 0;
}

int cmd_translate(const fs::path& ckpt_path, const fs::path& in_path,
                  const std::string& direction, int mask_flag, bool no_roi,
                  const fs::path& out_path, const fs::path& pgm_dir,
                  float window_lo, float window_hi, CLI::App& cmd) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(ckpt_path);
  std::string prefix;
  if (direction == "ab")
    prefix = "g_ab.";
  else if (direction == "ba")
    prefix = "g_ba.";
  else
    throw config_error("direction must be 'ab' or 'ba'");
  const translate::Generator<float> g = translate::load_generator(ckpt, prefix);

  const bool mask = (mask_flag < 0)
                        ? ckpt.manifest.get_int("mask_postprocess") != 0
                        : mask_flag != 0;

  vol::Volume v = vol::load_volume(in_path);
  vol::RoiBounds roi;
  if (no_roi || v.normalized)
    roi = vol::RoiBounds{0, v.nz - 1, false};
  else
    roi = vol::select_abdominal_roi(v);
  const vol::Volume out =
      translate::translate_volume(g, v, roi, mask, window_lo, window_hi);
  vol::save_volume(out, out_path);

  if (!pgm_dir.empty()) {
    fs::create_directories(pgm_dir);
    char name[32];
    for (int z = 0; z < out.nz; ++z) {
      std::snprintf(name, sizeof name, "slice_%04d.pgm", z);
      vol::write_pgm(out.slice(z), pgm_dir / name);
    }
  }
  write_snapshot(cmd, out_path.parent_path() / "translate_config.txt");
  std::cout << "wrote " << out_path.string() << " (slices " << roi.top << ".."
            << roi.bottom << ")\n";
  return 0;
}

int cmd_evaluate(const fs::path& real_path, const fs::path& fake_path,
                 int real_top, int real_bottom, const fs::path& report_path,
                 float window_lo, float window_hi, CLI::App& cmd) {
  vol::Volume real = vol::load_volume(real_path);
  vol::Volume fake = vol::load_volume(fake_path);
  if (!real.normalized)
    real = vol::normalize_intensity(real, window_lo, window_hi);
  if (!fake.normalized)
    fake = vol::normalize_intensity(fake, window_lo, window_hi);

  if (real_top >= 0 || real_bottom >= 0) {
    const int top = std::max(real_top, 0);
    const int bottom = (real_bottom >= 0) ? real_bottom : real.nz - 1;
    if (top > bottom || bottom >= real.nz)
      throw dimension_error("bad --real-top/--real-bottom range");
    vol::Volume cut = real;
    cut.nz = bottom - top + 1;
    cut.voxels.assign(real.voxels.begin() +
                          static_cast<std::ptrdiff_t>(top) * real.ny * real.nx,
                      real.voxels.begin() + static_cast<std::ptrdiff_t>(
                                                bottom + 1) *
                                                real.ny * real.nx);
    real = std::move(cut);
  }

  const metrics::MetricsReport report = metrics::evaluate_paired(real, fake);
  metrics::print_report_table(report, std::cout);
  if (!report_path.empty()) {
    metrics::write_report_kv(report, report_path);
    write_snapshot(cmd, report_path.parent_path() / "evaluate_config.txt");
  }
  return 0;
}

int cmd_gradcheck(double tolerance) {
  const auto results = gradcheck::run_all(tolerance);
  bool all_pass = true;
  char buf[128];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-16s max_rel_err=%.3e  %s",
                  r.name.c_str(), r.max_rel_err, r.pass ? "PASS" : "FAIL");
    std::cout << buf << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anatomically-constrained CT contrast translation toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-phantoms",
                                 "generate paired pseudo-abdomen volumes");
  fs::path gen_out;
  int gen_count = 1, gen_slices_a = 96, gen_slices_b = 96, gen_size = 64;
  double gen_warp_a = 0.0, gen_warp_b = 0.0, gen_contrast = 160.0,
         gen_noise = 20.0;
  bool gen_preview = false;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", seed, "root seed");
  gen->add_option("--count", gen_count, "number of pairs");
  gen->add_option("--slices-a", gen_slices_a, "slices in volume A");
  gen->add_option("--slices-b", gen_slices_b, "slices in volume B");
  gen->add_option("--size", gen_size, "slice height and width");
  gen->add_option("--warp-a", gen_warp_a, "slice-density warp amplitude, A");
  gen->add_option("--warp-b", gen_warp_b, "slice-density warp amplitude, B");
  gen->add_option("--contrast-delta", gen_contrast,
                  "contrast enhancement in HU (domain A)");
  gen->add_option("--noise-sigma", gen_noise, "Gaussian noise sigma in HU");
  gen->add_flag("--preview-pgm", gen_preview, "export middle-slice PGMs");
  gen->set_config("--config");

  auto* tssbr =
      app.add_subcommand("train-ssbr", "train the slice-position regressor");
  fs::path tssbr_data, tssbr_out;
  SsbrCliOpts ssbr_opts;
  tssbr->add_option("--data", tssbr_data, "directory of .avol volumes")
      ->required();
  tssbr->add_option("--out", tssbr_out, "output directory")->required();
  tssbr->add_option("--seed", seed, "root seed");
  ssbr_opts.attach(tssbr);
  tssbr->set_config("--config");

  auto* score = app.add_subcommand("score", "score one volume's ROI slices");
  fs::path score_ckpt, score_vol, score_out;
  SsbrCliOpts score_opts;
  score->add_option("--ckpt", score_ckpt, "SSBR checkpoint")->required();
  score->add_option("--volume", score_vol, "input .avol")->required();
  score->add_option("--out", score_out, "output table (default stdout)");
  score->add_option("--window-lo", score_opts.cfg.window_lo, "HU window low");
  score->add_option("--window-hi", score_opts.cfg.window_hi, "HU window high");
  score->add_option("--tau-lung", score_opts.cfg.roi_params.tau_lung,
                    "air-fraction threshold ending the lungs");
  score->add_option("--tau-bowel", score_opts.cfg.roi_params.tau_bowel,
                    "air-fraction threshold ending the bowel");
  score->set_config("--config");

  auto* pair = app.add_subcommand("pair", "select anatomically-paired slices");
  fs::path pair_ckpt, pair_a, pair_b, pair_manifest, pair_out;
  int pair_j = 8;
  std::string pair_strategy = "ssbr";
  SsbrCliOpts pair_opts;
  pair->add_option("--ckpt", pair_ckpt, "SSBR checkpoint (ssbr strategy)");
  pair->add_option("--vol-a", pair_a, "domain A volume")->required();
  pair->add_option("--vol-b", pair_b, "domain B volume")->required();
  pair->add_option("--j", pair_j, "number of pairs");
  pair->add_option("--seed", seed, "root seed");
  pair->add_option("--strategy", pair_strategy, "ssbr or pbs");
  pair->add_option("--manifest", pair_manifest,
                   "phantom manifest (adds offset column)");
  pair->add_option("--out", pair_out, "output table (default stdout)");
  pair->add_option("--window-lo", pair_opts.cfg.window_lo, "HU window low");
  pair->add_option("--window-hi", pair_opts.cfg.window_hi, "HU window high");
  pair->set_config("--config");

  auto* ttrans =
      app.add_subcommand("train-translate", "train the contrast translator");
  fs::path ttrans_a, ttrans_b, ttrans_ssbr, ttrans_out;
  TranslateCliOpts trans_opts;
  ttrans->add_option("--data-a", ttrans_a, "domain A volume directory")
      ->required();
  ttrans->add_option("--data-b", ttrans_b, "domain B volume directory")
      ->required();
  ttrans->add_option("--ssbr", ttrans_ssbr, "trained SSBR checkpoint");
  ttrans->add_option("--out", ttrans_out, "output directory")->required();
  ttrans->add_option("--seed", seed, "root seed");
  trans_opts.attach(ttrans);
  ttrans->set_config("--config");

  auto* trans = app.add_subcommand("translate", "translate a volume's ROI");
  fs::path trans_ckpt, trans_in, trans_out_path, trans_pgm;
  std::string trans_dir = "ab";
  int trans_mask = -1;  // -1: use the checkpoint's setting
  bool trans_no_roi = false;
  float trans_lo = vol::kDefaultWindowLoHu, trans_hi = vol::kDefaultWindowHiHu;
  trans->add_option("--ckpt", trans_ckpt, "translator checkpoint")->required();
  trans->add_option("--input", trans_in, "input .avol")->required();
  trans->add_option("--direction", trans_dir, "ab or ba");
  trans->add_option("--mask", trans_mask,
                    "1/0 body-mask postprocess (default: checkpoint setting)");
  trans->add_flag("--no-roi", trans_no_roi, "translate every slice");
  trans->add_option("--out", trans_out_path, "output .avol")->required();
  trans->add_option("--dump-pgm", trans_pgm, "directory for PGM slice dumps");
  trans->add_option("--window-lo", trans_lo, "HU window low");
  trans->add_option("--window-hi", trans_hi, "HU window high");
  trans->set_config("--config");

  auto* eval = app.add_subcommand("evaluate", "paired image-quality metrics");
  fs::path eval_real, eval_fake, eval_report;
  int eval_top = -1, eval_bottom = -1;
  float eval_lo = vol::kDefaultWindowLoHu, eval_hi = vol::kDefaultWindowHiHu;
  eval->add_option("--real", eval_real, "reference .avol")->required();
  eval->add_option("--fake", eval_fake, "generated .avol")->required();
  eval->add_option("--real-top", eval_top, "first reference slice");
  eval->add_option("--real-bottom", eval_bottom, "last reference slice");
  eval->add_option("--report", eval_report, "key-value report path");
  eval->add_option("--window-lo", eval_lo, "HU window low");
  eval->add_option("--window-hi", eval_hi, "HU window high");
  eval->set_config("--config");

  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference gradient verification");
  double gc_tol = 1e-4;
  gc->add_option("--tolerance", gc_tol, "max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, --help exits 0
  }

  try {
    if (gen->parsed())
      return cmd_gen_phantoms(gen_out, seed, gen_count, gen_slices_a,
                              gen_slices_b, gen_size, gen_warp_a, gen_warp_b,
                              gen_contrast, gen_noise, gen_preview, *gen);
    if (tssbr->parsed())
      return cmd_train_ssbr(tssbr_data, tssbr_out, ssbr_opts, seed, *tssbr);
    if (score->parsed())
      return cmd_score(score_ckpt, score_vol, score_out, score_opts, *score);
    if (pair->parsed())
      return cmd_pair(pair_ckpt, pair_a, pair_b, pair_j, seed, pair_strategy,
                      pair_manifest, pair_out, pair_opts, *pair);
    if (ttrans->parsed())
      return cmd_train_translate(ttrans_a, ttrans_b, ttrans_ssbr, ttrans_out,
                                 trans_opts, seed, *ttrans);
    if (trans->parsed())
      return cmd_translate(trans_ckpt, trans_in, trans_dir, trans_mask,
                           trans_no_roi, trans_out_path, trans_pgm, trans_lo,
                           trans_hi, *trans);
    if (eval->parsed())
      return cmd_evaluate(eval_real, eval_fake, eval_top, eval_bottom,
                          eval_report, eval_lo, eval_hi, *eval);
    if (gc->parsed()) return cmd_gradcheck(gc_tol);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
