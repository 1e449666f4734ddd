#include "actrans/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "actrans/rng.hpp"

namespace actrans::phantom {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double Warp::operator()(double t) const {
  return t + amp * std::sin(kPi * t) * t * (1.0 - t);
}

double Warp::inverse(double u) const {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((*this)(mid) < u)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

void Warp::validate() const {
  if (std::abs(amp) > 1.2)
    throw config_error("warp amplitude too large for monotonicity");
  double prev = 0.0;
  for (int i = 1; i <= 512; ++i) {
    const double t = i / 512.0;
    const double g = (*this)(t);
    if (g <= prev) throw config_error("warp is not strictly increasing");
    prev = g;
  }
}

void PhantomSpec::validate() const {
  if (n_slices_a < 2 || n_slices_b < 2)
    throw config_error("phantom needs at least 2 slices per volume");
  if (height < 16 || width < 16)
    throw config_error("phantom slices must be at least 16x16");
  warp_a.validate();
  warp_b.validate();
  const auto& an = anatomy;
  if (!(0.0 < an.lung_end_t && an.lung_end_t < an.bowel_start_t &&
        an.bowel_start_t < an.bowel_end_t && an.bowel_end_t < 1.0))
    throw config_error("degenerate anatomy spans");
}

namespace {

struct GasPocket {
  double phase;
  double omega;
  double rad_scale;
};

// Per-pair anatomy constants drawn once from the shared seed so both volumes
// depict the same body.
struct SharedAnatomy {
  std::vector<GasPocket> pockets;
  double body_cx_wobble;
  double organ_skew;
};

SharedAnatomy draw_shared(const PhantomSpec& spec) {
  Rng rng = Rng::substream(spec.seed, "phantom/anatomy");
  SharedAnatomy s;
  s.pockets.resize(spec.anatomy.n_gas_pockets);
  for (auto& p : s.pockets) {
    p.phase = rng.uniform(0.0, 2.0 * kPi);
    p.omega = rng.uniform(1.5, 4.0);
    p.rad_scale = rng.uniform(0.85, 1.15);
  }
  s.body_cx_wobble = rng.uniform(-0.03, 0.03);
  s.organ_skew = rng.uniform(0.9, 1.1);
  return s;
}

inline bool in_ellipse(double u, double v, double cx, double cy, double rx,
                       double ry) {
  if (rx <= 0.0 || ry <= 0.0) return false;
  const double du = (u - cx) / rx;
  const double dv = (v - cy) / ry;
  return du * du + dv * dv <= 1.0;
}

// Paints one slice at anatomical coordinate t. `delta` is the contrast bump
// (nonzero only in domain A).
void paint_slice(vol::ImageF& img, double t, double delta,
                 const AnatomyProfile& an, const SharedAnatomy& sh) {
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());

  const double rx = an.body_rx0 + (an.body_rx1 - an.body_rx0) * t;
  const double ry = an.body_ry0 + (an.body_ry1 - an.body_ry0) * t;
  const double cx = sh.body_cx_wobble * std::sin(2.0 * kPi * t);
  const double cy = 0.02;

  // Lung cross-section holds its area until just before lung_end_t, then
  // collapses sharply so the air-fraction landmark is crisp.
  double lung_scale = 0.0;
  if (t < an.lung_end_t) {
    const double s = 1.0 - t / an.lung_end_t;
    lung_scale = std::pow(s, 0.125);
  }

  // Liver-like organ, ramping in and out over [0.18, 0.62].
  double organ_w = 0.0;
  if (t > 0.18 && t < 0.62)
    organ_w = std::sin(kPi * (t - 0.18) / 0.44) * sh.organ_skew;

  // Paired kidney-like organs over [0.42, 0.78].
  double kidney_w = 0.0;
  if (t > 0.42 && t < 0.78) kidney_w = std::sin(kPi * (t - 0.42) / 0.36);

  // Bowel gas: quick onset after bowel_start_t, hard stop at bowel_end_t.
  double gas_ramp = 0.0;
  if (t >= an.bowel_start_t && t <= an.bowel_end_t)
    gas_ramp = std::min(1.0, (t - an.bowel_start_t) / 0.06);

  const double spine_r = 0.085 + 0.02 * t;
  const double aorta_r = 0.040 + 0.012 * t;
  const double cava_r = 0.048 + 0.010 * t;

  for (int y = 0; y < h; ++y) {
    const double v = (y + 0.5) / h * 2.0 - 1.0;
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w * 2.0 - 1.0;

      double hu = an.hu_air;
      if (in_ellipse(u, v, cx, cy, rx, ry)) {
        hu = an.hu_tissue;

        if (lung_scale > 0.0) {
          const double lrx = 0.34 * rx * lung_scale;
          const double lry = 0.46 * ry * lung_scale;
          if (in_ellipse(u, v, cx - 0.44 * rx, cy - 0.26 * ry, lrx, lry) ||
              in_ellipse(u, v, cx + 0.44 * rx, cy - 0.26 * ry, lrx, lry))
            hu = an.hu_lung;
        }

        if (organ_w > 0.0 &&
            in_ellipse(u, v, cx - 0.38 * rx, cy - 0.08 * ry, 0.36 * rx * organ_w,
                       0.32 * ry * organ_w))
          hu = an.hu_organ + 0.5 * delta;

        if (kidney_w > 0.0) {
          const double krx = 0.11 * rx * kidney_w;
          const double kry = 0.14 * ry * kidney_w;
          if (in_ellipse(u, v, cx - 0.34 * rx, cy + 0.24 * ry, krx, kry) ||
              in_ellipse(u, v, cx + 0.34 * rx, cy + 0.24 * ry, krx, kry))
            hu = an.hu_kidney + 0.5 * delta;
        }

        if (gas_ramp > 0.0) {
          for (const auto& p : sh.pockets) {
            const double theta = p.phase + p.omega * t;
            const double gx = cx + 0.38 * rx * std::cos(theta);
            const double gy = cy + 0.18 * ry + 0.28 * ry * std::sin(theta);
            const double gr = 0.105 * p.rad_scale * gas_ramp;
            if (in_ellipse(u, v, gx, gy, gr, gr)) hu = an.hu_gas;
          }
        }

        // Spine and the two large vessels sit on top of everything else.
        if (in_ellipse(u, v, cx, cy + 0.60 * ry, spine_r, spine_r))
          hu = an.hu_bone;
        if (in_ellipse(u, v, cx - 0.08, cy + 0.28 * ry, aorta_r, aorta_r) ||
            in_ellipse(u, v, cx + 0.11, cy + 0.28 * ry, cava_r, cava_r))
          hu = an.hu_vessel + delta;
      }

      img(y, x) = static_cast<float>(hu);
    }
  }
}

vol::Volume render_volume(const PhantomSpec& spec, const SharedAnatomy& sh,
                          int n_slices, const Warp& warp, double delta,
                          vol::Modality modality, Rng noise_rng,
                          Landmarks* lm) {
  vol::Volume v;
  v.nz = n_slices;
  v.ny = spec.height;
  v.nx = spec.width;
  v.dz = 5.f;
  v.dy = 1.f;
  v.dx = 1.f;
  v.modality = modality;
  v.normalized = false;
  v.voxels.resize(v.voxel_count());

  lm->lung_end = n_slices - 1;
  lm->bowel_end = 0;
  bool saw_lung_end = false;

  vol::ImageF img(spec.height, spec.width);
  for (int z = 0; z < n_slices; ++z) {
    const double t = warp(static_cast<double>(z) / (n_slices - 1));
    paint_slice(img, t, delta, spec.anatomy, sh);
    if (!saw_lung_end && t >= spec.anatomy.lung_end_t) {
      lm->lung_end = z;
      saw_lung_end = true;
    }
    const double onset =
        spec.anatomy.bowel_start_t;  // gas ramp is zero exactly at onset
    if (t > onset && t <= spec.anatomy.bowel_end_t) lm->bowel_end = z;

    if (spec.noise_sigma_hu > 0.0) {
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const double n = noise_rng.normal(spec.noise_sigma_hu);
          const double hu =
              std::clamp(std::round(img(y, x) + n), -1024.0, 3071.0);
          v.at(z, y, x) = static_cast<float>(hu);
        }
    } else {
      v.set_slice(z, img);
    }
  }
  return v;
}

}  // namespace

PhantomPair generate_phantom_pair(const PhantomSpec& spec) {
  spec.validate();
  const SharedAnatomy sh = draw_shared(spec);

  PhantomPair pair;
  pair.a = render_volume(spec, sh, spec.n_slices_a, spec.warp_a,
                         spec.contrast_delta_hu, vol::Modality::contrast_a,
                         Rng::substream(spec.seed, "phantom/noise/a"),
                         &pair.lm_a);
  pair.b = render_volume(spec, sh, spec.n_slices_b, spec.warp_b, 0.0,
                         vol::Modality::noncontrast_b,
                         Rng::substream(spec.seed, "phantom/noise/b"),
                         &pair.lm_b);

  pair.corr.b_of_a.resize(spec.n_slices_a);
  for (int n = 0; n < spec.n_slices_a; ++n) {
    const double t = spec.warp_a(static_cast<double>(n) / (spec.n_slices_a - 1));
    pair.corr.b_of_a[n] = spec.warp_b.inverse(t) * (spec.n_slices_b - 1);
  }
  return pair;
}

double anatomical_offset(int idx_a, int idx_b, const CorrespondenceMap& corr) {
  return std::abs(static_cast<double>(idx_b) - corr.map(idx_a));
}

void write_manifest(const PhantomPair& pair, const PhantomSpec& spec,
                    const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw io_error("cannot write " + path.string());
  char buf[64];
  os << "seed = " << spec.seed << "\n";
  os << "n_slices_a = " << spec.n_slices_a << "\n";
  os << "n_slices_b = " << spec.n_slices_b << "\n";
  os << "height = " << spec.height << "\n";
  os << "width = " << spec.width << "\n";
  std::snprintf(buf, sizeof buf, "%.6f", spec.warp_a.amp);
  os << "warp_amp_a = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.6f", spec.warp_b.amp);
  os << "warp_amp_b = " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.3f", spec.contrast_delta_hu);
  os << "contrast_delta_hu = " << buf << "\n";
  os << "lm_lung_end_a = " << pair.lm_a.lung_end << "\n";
  os << "lm_bowel_end_a = " << pair.lm_a.bowel_end << "\n";
  os << "lm_lung_end_b = " << pair.lm_b.lung_end << "\n";
  os << "lm_bowel_end_b = " << pair.lm_b.bowel_end << "\n";
  for (std::size_t n = 0; n < pair.corr.b_of_a.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%.6f", pair.corr.b_of_a[n]);
    os << "corr_" << n << " = " << buf << "\n";
  }
  if (!os) throw io_error("write failed: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open " + path.string());
  Manifest m;
  std::vector<std::pair<int, double>> corr;
  std::string line;
  int n_a = -1;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(val);
    if (key == "n_slices_a")
      n_a = std::stoi(val);
    else if (key == "lm_lung_end_a")
      m.lm_a.lung_end = std::stoi(val);
    else if (key == "lm_bowel_end_a")
      m.lm_a.bowel_end = std::stoi(val);
    else if (key == "lm_lung_end_b")
      m.lm_b.lung_end = std::stoi(val);
    else if (key == "lm_bowel_end_b")
      m.lm_b.bowel_end = std::stoi(val);
    else if (key.rfind("corr_", 0) == 0)
      corr.emplace_back(std::stoi(key.substr(5)), std::stod(val));
  }
  if (n_a >= 0) m.corr.b_of_a.resize(n_a, 0.0);
  for (const auto& [idx, val] : corr) {
    if (idx >= static_cast<int>(m.corr.b_of_a.size()))
      m.corr.b_of_a.resize(idx + 1, 0.0);
    m.corr.b_of_a[idx] = val;
  }
  if (m.corr.b_of_a.empty())
    throw format_error("manifest has no correspondence entries");
  return m;
}

}  // namespace actrans::phantom
