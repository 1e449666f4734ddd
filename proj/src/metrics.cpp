#include "actrans/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace actrans::metrics {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * kValueRange) * (0.01 * kValueRange);
constexpr double kC2 = (0.03 * kValueRange) * (0.03 * kValueRange);

using Plane =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const Eigen::Array<double, kWindow, 1>& gaussian_kernel() {
  static const Eigen::Array<double, kWindow, 1> k = [] {
    Eigen::Array<double, kWindow, 1> g;
    const int half = kWindow / 2;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - half;
      g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    }
    g /= g.sum();
    return g;
  }();
  return k;
}

// Separable valid-region Gaussian filter: (h, w) -> (h-10, w-10).
Plane gauss_valid(const Plane& in) {
  const auto& k = gaussian_kernel();
  const Eigen::Index h = in.rows(), w = in.cols();
  Plane rows(h, w - kWindow + 1);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x + kWindow <= w; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * in(y, x + i);
      rows(y, x) = s;
    }
  Plane out(h - kWindow + 1, w - kWindow + 1);
  for (Eigen::Index y = 0; y + kWindow <= h; ++y)
    for (Eigen::Index x = 0; x < out.cols(); ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * rows(y + i, x);
      out(y, x) = s;
    }
  return out;
}

void check_shapes(const Eigen::Ref<const vol::ImageF>& a,
                  const Eigen::Ref<const vol::ImageF>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw dimension_error("metric inputs must have equal shapes");
}

}  // namespace

double mse(const Eigen::Ref<const vol::ImageF>& a,
           const Eigen::Ref<const vol::ImageF>& b) {
  check_shapes(a, b);
  double s = 0.0;
  for (Eigen::Index y = 0; y < a.rows(); ++y)
    for (Eigen::Index x = 0; x < a.cols(); ++x) {
      const double d = double(a(y, x)) - double(b(y, x));
      s += d * d;
    }
  return s / (double(a.rows()) * double(a.cols()));
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kValueRange * kValueRange / mse_value);
}

double psnr(const Eigen::Ref<const vol::ImageF>& a,
            const Eigen::Ref<const vol::ImageF>& b) {
  return psnr_from_mse(mse(a, b));
}

double ssim(const Eigen::Ref<const vol::ImageF>& a,
            const Eigen::Ref<const vol::ImageF>& b) {
  check_shapes(a, b);
  if (a.rows() < kWindow || a.cols() < kWindow)
    throw dimension_error("ssim needs images of at least 11x11");
  const Plane pa = a.cast<double>();
  const Plane pb = b.cast<double>();

  const Plane mu_a = gauss_valid(pa);
  const Plane mu_b = gauss_valid(pb);
  const Plane aa = gauss_valid((pa * pa).eval());
  const Plane bb = gauss_valid((pb * pb).eval());
  const Plane ab = gauss_valid((pa * pb).eval());

  double sum = 0.0;
  for (Eigen::Index y = 0; y < mu_a.rows(); ++y)
    for (Eigen::Index x = 0; x < mu_a.cols(); ++x) {
      const double ma = mu_a(y, x), mb = mu_b(y, x);
      const double va = aa(y, x) - ma * ma;
      const double vb = bb(y, x) - mb * mb;
      const double cov = ab(y, x) - ma * mb;
      const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
      const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
      sum += num / den;
    }
  return sum / (double(mu_a.rows()) * double(mu_a.cols()));
}

MetricsReport evaluate_paired(const vol::Volume& real,
                              const vol::Volume& fake) {
  if (real.nz != fake.nz)
    throw data_error("paired evaluation needs equal slice counts");
  if (real.ny != fake.ny || real.nx != fake.nx)
    throw dimension_error("paired evaluation needs equal slice shapes");
  if (!real.normalized || !fake.normalized)
    throw state_error("paired evaluation expects normalized volumes");

  MetricsReport r;
  r.n_slices = real.nz;
  r.per_slice.resize(real.nz);
  double mse_sum = 0, mse_sq = 0, ssim_sum = 0, ssim_sq = 0;
  double psnr_sum = 0, psnr_sq = 0;
  int psnr_n = 0;
  for (int z = 0; z < real.nz; ++z) {
    auto& s = r.per_slice[z];
    s.mse = mse(real.slice(z), fake.slice(z));
    s.ssim = ssim(real.slice(z), fake.slice(z));
    s.psnr = psnr_from_mse(s.mse);
    mse_sum += s.mse;
    mse_sq += s.mse * s.mse;
    ssim_sum += s.ssim;
    ssim_sq += s.ssim * s.ssim;
    if (std::isfinite(s.psnr)) {
      psnr_sum += s.psnr;
      psnr_sq += s.psnr * s.psnr;
      ++psnr_n;
    } else {
      ++r.excluded_inf_psnr;
    }
  }
  const auto finish = [](double sum, double sq, int n, double& mean,
                         double& std) {
    if (n == 0) {
      mean = 0;
      std = 0;
      return;
    }
    mean = sum / n;
    const double var = sq / n - mean * mean;
    std = var > 0 ? std::sqrt(var) : 0.0;
  };
  finish(mse_sum, mse_sq, r.n_slices, r.mse_mean, r.mse_std);
  finish(ssim_sum, ssim_sq, r.n_slices, r.ssim_mean, r.ssim_std);
  finish(psnr_sum, psnr_sq, psnr_n, r.psnr_mean, r.psnr_std);
  return r;
}

void write_report_kv(const MetricsReport& r,
                     const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw io_error("cannot write " + path.string());
  char buf[64];
  const auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    os << key << " = " << buf << "\n";
  };
  put("mse_mean", r.mse_mean);
  put("mse_std", r.mse_std);
  put("ssim_mean", r.ssim_mean);
  put("ssim_std", r.ssim_std);
  put("psnr_mean", r.psnr_mean);
  put("psnr_std", r.psnr_std);
  os << "n_slices = " << r.n_slices << "\n";
  os << "excluded_inf_psnr = " << r.excluded_inf_psnr << "\n";
  if (!os) throw io_error("write failed: " + path.string());
}

void print_report_table(const MetricsReport& r, std::ostream& os) {
  char buf[160];
  os << "slice      mse       ssim      psnr\n";
  for (int z = 0; z < r.n_slices; ++z) {
    const auto& s = r.per_slice[z];
    if (std::isfinite(s.psnr))
      std::snprintf(buf, sizeof buf, "%5d  %9.6f  %8.6f  %8.3f", z, s.mse,
                    s.ssim, s.psnr);
    else
      std::snprintf(buf, sizeof buf, "%5d  %9.6f  %8.6f       inf", z, s.mse,
                    s.ssim);
    os << buf << "\n";
  }
  std::snprintf(buf, sizeof buf,
                "mean   %9.6f  %8.6f  %8.3f\nstd    %9.6f  %8.6f  %8.3f",
                r.mse_mean, r.ssim_mean, r.psnr_mean, r.mse_std, r.ssim_std,
                r.psnr_std);
  os << buf << "\n";
  if (r.excluded_inf_psnr > 0)
    os << "# " << r.excluded_inf_psnr
       << " slice(s) with infinite PSNR excluded from the PSNR aggregate\n";
}

}  // namespace actrans::metrics
