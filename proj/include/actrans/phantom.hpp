#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "actrans/volume.hpp"

namespace actrans::phantom {

// Monotone slice-density warp gamma(t) = t + amp * sin(pi t) * t (1 - t).
// gamma(0) = 0, gamma(1) = 1; strictly increasing for |amp| <= 1.2.
struct Warp {
  double amp = 0.0;

  double operator()(double t) const;
  double inverse(double u) const;  // bisection on the monotone forward map
  void validate() const;
};

// Shared pseudo-abdomen described over the anatomical coordinate t in [0,1]
// (0 = most cranial). Geometry is expressed in slice coordinates u,v in
// [-1,1]; HU constants follow typical CT values.
struct AnatomyProfile {
  double lung_end_t = 0.22;     // lungs occupy [0, lung_end_t)
  double bowel_start_t = 0.55;  // bowel gas occupies [bowel_start_t, bowel_end_t]
  double bowel_end_t = 0.85;

  double body_rx0 = 0.46, body_rx1 = 0.78;  // half-width, widening caudally
  double body_ry0 = 0.74, body_ry1 = 0.52;  // half-height, flattening caudally

  double hu_air = -1000, hu_lung = -850, hu_tissue = 40, hu_bone = 700;
  double hu_vessel = 40, hu_gas = -900, hu_organ = 90, hu_kidney = 110;

  int n_gas_pockets = 3;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  int n_slices_a = 96, n_slices_b = 96;
  int height = 64, width = 64;
  Warp warp_a{}, warp_b{};
  double contrast_delta_hu = 160.0;  // added to vessels (half to organs) in A
  double noise_sigma_hu = 20.0;
  AnatomyProfile anatomy{};

  void validate() const;
};

// Ground-truth slice landmarks of one generated volume.
struct Landmarks {
  int lung_end = 0;   // first slice with no lung tissue
  int bowel_end = 0;  // last slice containing bowel gas
};

// Real-valued anatomically-equivalent position in B for each slice of A.
struct CorrespondenceMap {
  std::vector<double> b_of_a;

  double map(int idx_a) const { return b_of_a.at(idx_a); }
};

struct PhantomPair {
  vol::Volume a, b;
  CorrespondenceMap corr;
  Landmarks lm_a, lm_b;
};

PhantomPair generate_phantom_pair(const PhantomSpec& spec);

// |idx_b - m*(idx_a)| in slices.
double anatomical_offset(int idx_a, int idx_b, const CorrespondenceMap& corr);

// Sidecar key-value manifest: spec echo, landmarks, full correspondence table.
void write_manifest(const PhantomPair& pair, const PhantomSpec& spec,
                    const std::filesystem::path& path);
struct Manifest {
  Landmarks lm_a, lm_b;
  CorrespondenceMap corr;
};
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace actrans::phantom
