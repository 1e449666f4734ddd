#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "actrans/volume.hpp"

// Paired image-quality metrics for [-1, 1] data (value range L = 2).

namespace actrans::metrics {

inline constexpr double kValueRange = 2.0;

double mse(const Eigen::Ref<const vol::ImageF>& a,
           const Eigen::Ref<const vol::ImageF>& b);

// 10 log10(L^2 / mse); +infinity when the images are identical.
double psnr_from_mse(double mse_value);
double psnr(const Eigen::Ref<const vol::ImageF>& a,
            const Eigen::Ref<const vol::ImageF>& b);

// Mean local SSIM over all positions where the full 11x11 Gaussian window
// (sigma 1.5) fits; C1 = (0.01 L)^2, C2 = (0.03 L)^2.
double ssim(const Eigen::Ref<const vol::ImageF>& a,
            const Eigen::Ref<const vol::ImageF>& b);

struct SliceMetrics {
  double mse = 0, ssim = 0, psnr = 0;
};

struct MetricsReport {
  std::vector<SliceMetrics> per_slice;
  double mse_mean = 0, mse_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  double psnr_mean = 0, psnr_std = 0;  // over finite-PSNR slices only
  int n_slices = 0;
  int excluded_inf_psnr = 0;
};

// Per-slice metrics plus mean / population-std aggregates. Slices with
// infinite PSNR are excluded from the PSNR aggregate and counted.
MetricsReport evaluate_paired(const vol::Volume& real, const vol::Volume& fake);

void write_report_kv(const MetricsReport& r, const std::filesystem::path& path);
void print_report_table(const MetricsReport& r, std::ostream& os);

}  // namespace actrans::metrics
