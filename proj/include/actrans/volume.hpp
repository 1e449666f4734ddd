#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "actrans/errors.hpp"

namespace actrans::vol {

template <typename S>
using Image = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ImageF = Image<float>;
using MaskBits =
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Modality : std::uint8_t {
  unknown = 0,
  contrast_a = 1,     // contrast-enhanced domain A
  noncontrast_b = 2,  // contrast-free domain B
};

// 3D intensity grid, slice-major (z, y, x). Holds either raw HU values
// (integral, stored as int16 on disk) or normalized reals in [-1, 1]
// (stored as float32).
struct Volume {
  int nz = 0, ny = 0, nx = 0;
  float dz = 1.f, dy = 1.f, dx = 1.f;  // spacing in mm
  Modality modality = Modality::unknown;
  bool normalized = false;
  std::vector<float> voxels;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nz) * ny * nx;
  }
  float& at(int z, int y, int x) {
    return voxels[(static_cast<std::size_t>(z) * ny + y) * nx + x];
  }
  float at(int z, int y, int x) const {
    return voxels[(static_cast<std::size_t>(z) * ny + y) * nx + x];
  }
  Eigen::Map<const ImageF> slice(int z) const {
    return Eigen::Map<const ImageF>(
        voxels.data() + static_cast<std::size_t>(z) * ny * nx, ny, nx);
  }
  void set_slice(int z, const Eigen::Ref<const ImageF>& img) {
    Eigen::Map<ImageF>(voxels.data() + static_cast<std::size_t>(z) * ny * nx,
                       ny, nx) = img;
  }
  // Throws unless shape, spacing and payload size are consistent.
  void validate() const;
};

// Per-slice binary body-region mask. After extraction the foreground is a
// single connected component with interior holes filled.
struct BodyMask {
  MaskBits bits;  // ny x nx of {0,1}
  bool degenerate = false;

  std::int64_t area() const { return bits.cast<std::int64_t>().sum(); }
};

struct RoiBounds {
  int top = 0;     // first abdominal slice, inclusive
  int bottom = 0;  // last abdominal slice, inclusive
  bool fallback = false;  // detection failed, bounds are the full extent
};

// HU thresholds for body/air separation.
inline constexpr float kBodyThresholdHu = -300.f;
inline constexpr float kAirThresholdHu = -500.f;

// Default intensity window mapped onto [-1, 1].
inline constexpr float kDefaultWindowLoHu = -1024.f;
inline constexpr float kDefaultWindowHiHu = 1024.f;

struct RoiParams {
  double tau_lung = 0.08;
  double tau_bowel = 0.03;
  int smooth_window = 3;
  // Use the whole-slice air fraction instead of the in-body fraction.
  bool whole_slice_fraction = false;
};

// "AVOL1" container I/O.
Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

// clamp((x - lo)/(hi - lo), 0, 1) * 2 - 1 per voxel.
Volume normalize_intensity(const Volume& v, float lo_hu, float hi_hu);
inline Volume normalize_intensity(const Volume& v) {
  return normalize_intensity(v, kDefaultWindowLoHu, kDefaultWindowHiHu);
}

// Bilinear resize with corner-aligned sampling.
ImageF resize_bilinear(const Eigen::Ref<const ImageF>& in, int out_h,
                       int out_w);
MaskBits resize_mask_nearest(const MaskBits& in, int out_h, int out_w);

// Largest connected component of {HU > -300} with interior holes filled.
BodyMask body_mask(const Eigen::Ref<const ImageF>& hu_slice);

// |{pixels inside mask with HU < -500}| / |mask foreground|.
double air_fraction(const Eigen::Ref<const ImageF>& hu_slice,
                    const BodyMask& mask);
// Whole-slice variant: |{HU < -500}| / |slice|.
double air_fraction_whole(const Eigen::Ref<const ImageF>& hu_slice);

// Abdominal slice range from the air-fraction profile: the top bound is the
// first post-lung slice, the bottom bound the last bowel-gas slice.
RoiBounds select_abdominal_roi(const Volume& v, const RoiParams& params = {});

// 1 - |prev ∩ cur| / |prev|.
double bm_delta(const BodyMask& prev, const BodyMask& cur);

// 8-bit PGM export of a normalized slice ([-1,1] mapped onto [0,255]).
void write_pgm(const Eigen::Ref<const ImageF>& normalized_slice,
               const std::filesystem::path& path);

}  // namespace actrans::vol
