#include "actrans/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

namespace actrans::vol {

namespace {

constexpr char kMagic[5] = {'A', 'V', 'O', 'L', '1'};
constexpr std::uint16_t kFormatVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& is) {
  const std::uint32_t v = get_u32(is);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace

void Volume::validate() const {
  if (nz < 1 || ny < 1 || nx < 1)
    throw dimension_error("volume shape components must be >= 1");
  if (dz <= 0.f || dy <= 0.f || dx <= 0.f)
    throw dimension_error("volume spacing must be positive");
  if (voxels.size() != voxel_count())
    throw dimension_error("voxel payload does not match shape");
  if (normalized) {
    for (float v : voxels)
      if (!(v >= -1.f && v <= 1.f))
        throw state_error("normalized volume has intensity outside [-1, 1]");
  }
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path.string());

  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0)
    throw format_error("not an AVOL1 file: " + path.string());

  const std::uint16_t version = get_u16(is);
  if (version != kFormatVersion)
    throw format_error("unsupported AVOL1 version " + std::to_string(version));

  char dtype = 0, modality = 0;
  is.read(&dtype, 1);
  is.read(&modality, 1);
  if (dtype != 0 && dtype != 1)
    throw format_error("unknown dtype code " + std::to_string(int(dtype)));
  if (modality < 0 || modality > 2)
    throw format_error("unknown modality tag");

  Volume v;
  v.nz = static_cast<int>(get_u32(is));
  v.ny = static_cast<int>(get_u32(is));
  v.nx = static_cast<int>(get_u32(is));
  v.dz = get_f32(is);
  v.dy = get_f32(is);
  v.dx = get_f32(is);
  v.modality = static_cast<Modality>(modality);
  v.normalized = (dtype == 1);
  if (!is) throw truncation_error("AVOL1 header truncated");
  if (v.nz < 1 || v.ny < 1 || v.nx < 1)
    throw format_error("AVOL1 header declares empty shape");

  const std::size_t n = v.voxel_count();
  const std::size_t elem = (dtype == 0) ? 2 : 4;
  std::vector<char> raw(n * elem);
  is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size())
    throw truncation_error("AVOL1 payload shorter than declared shape");
  is.peek();
  if (!is.eof()) throw format_error("AVOL1 payload longer than declared shape");

  v.voxels.resize(n);
  if (dtype == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto lo = static_cast<unsigned char>(raw[2 * i]);
      const auto hi = static_cast<unsigned char>(raw[2 * i + 1]);
      v.voxels[i] = static_cast<float>(
          static_cast<std::int16_t>(lo | (hi << 8)));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = 0;
      for (int k = 0; k < 4; ++k)
        u |= static_cast<std::uint32_t>(
                 static_cast<unsigned char>(raw[4 * i + k]))
             << (8 * k);
      std::memcpy(&v.voxels[i], &u, 4);
    }
  }
  v.validate();
  return v;
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  v.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot write " + path.string());

  os.write(kMagic, 5);
  put_u16(os, kFormatVersion);
  const char dtype = v.normalized ? 1 : 0;
  const char modality = static_cast<char>(v.modality);
  os.write(&dtype, 1);
  os.write(&modality, 1);
  put_u32(os, static_cast<std::uint32_t>(v.nz));
  put_u32(os, static_cast<std::uint32_t>(v.ny));
  put_u32(os, static_cast<std::uint32_t>(v.nx));
  put_f32(os, v.dz);
  put_f32(os, v.dy);
  put_f32(os, v.dx);

  if (v.normalized) {
    for (float f : v.voxels) put_f32(os, f);
  } else {
    for (float f : v.voxels) {
      const long r = std::lround(f);
      if (r < std::numeric_limits<std::int16_t>::min() ||
          r > std::numeric_limits<std::int16_t>::max())
        throw state_error("HU value out of int16 range on save");
      const auto s = static_cast<std::int16_t>(r);
      const auto u = static_cast<std::uint16_t>(s);
      put_u16(os, u);
    }
  }
  if (!os) throw io_error("write failed: " + path.string());
}

Volume normalize_intensity(const Volume& v, float lo_hu, float hi_hu) {
  if (!(lo_hu < hi_hu)) throw config_error("window requires lo < hi");
  if (v.normalized) throw state_error("volume is already normalized");
  v.validate();
  Volume out = v;
  const float span = hi_hu - lo_hu;
  for (float& x : out.voxels) {
    const float t = std::clamp((x - lo_hu) / span, 0.f, 1.f);
    x = t * 2.f - 1.f;
  }
  out.normalized = true;
  return out;
}

ImageF resize_bilinear(const Eigen::Ref<const ImageF>& in, int out_h,
                       int out_w) {
  if (out_h < 1 || out_w < 1) throw dimension_error("resize target must be >= 1");
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  ImageF out(out_h, out_w);
  const double sy = (out_h > 1) ? double(h - 1) / double(out_h - 1) : 0.0;
  const double sx = (out_w > 1) ? double(w - 1) / double(out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const double fy = y * sy;
    const int y0 = std::min(static_cast<int>(fy), h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const float ty = static_cast<float>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = x * sx;
      const int x0 = std::min(static_cast<int>(fx), w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const float tx = static_cast<float>(fx - x0);
      const float a = in(y0, x0), b = in(y0, x1), c = in(y1, x0),
                  d = in(y1, x1);
      const float top = a + (b - a) * tx;
      const float bot = c + (d - c) * tx;
      out(y, x) = top + (bot - top) * ty;
    }
  }
  return out;
}

MaskBits resize_mask_nearest(const MaskBits& in, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw dimension_error("resize target must be >= 1");
  const int h = static_cast<int>(in.rows());
  const int w = static_cast<int>(in.cols());
  MaskBits out(out_h, out_w);
  const double sy = (out_h > 1) ? double(h - 1) / double(out_h - 1) : 0.0;
  const double sx = (out_w > 1) ? double(w - 1) / double(out_w - 1) : 0.0;
  for (int y = 0; y < out_h; ++y) {
    const int yy = std::min(static_cast<int>(std::floor(y * sy + 0.5)), h - 1);
    for (int x = 0; x < out_w; ++x) {
      const int xx =
          std::min(static_cast<int>(std::floor(x * sx + 0.5)), w - 1);
      out(y, x) = in(yy, xx);
    }
  }
  return out;
}

namespace {

// Iterative flood fill over a 4-connected region, writing `label` into
// `labels` for every pixel of `value` reachable from (sy, sx).
int flood(const MaskBits& grid, std::uint8_t value,
          Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>&
              labels,
          int label, int sy, int sx, std::vector<int>& stack) {
  const int h = static_cast<int>(grid.rows());
  const int w = static_cast<int>(grid.cols());
  int count = 0;
  stack.clear();
  stack.push_back(sy * w + sx);
  labels(sy, sx) = label;
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int y = p / w, x = p % w;
    ++count;
    const int ny[4] = {y - 1, y + 1, y, y};
    const int nx[4] = {x, x, x - 1, x + 1};
    for (int k = 0; k < 4; ++k) {
      const int yy = ny[k], xx = nx[k];
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
      if (grid(yy, xx) != value || labels(yy, xx) >= 0) continue;
      labels(yy, xx) = label;
      stack.push_back(yy * w + xx);
    }
  }
  return count;
}

}  // namespace

BodyMask body_mask(const Eigen::Ref<const ImageF>& hu_slice) {
  const int h = static_cast<int>(hu_slice.rows());
  const int w = static_cast<int>(hu_slice.cols());
  MaskBits cand = (hu_slice > kBodyThresholdHu).cast<std::uint8_t>();

  BodyMask out;
  out.bits = MaskBits::Zero(h, w);
  if (cand.sum() == 0) {
    out.degenerate = true;
    return out;
  }

  // Largest 4-connected component (ties go to the first in scan order).
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> labels =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic,
                   Eigen::RowMajor>::Constant(h, w, -1);
  std::vector<int> stack;
  int best_label = -1, best_count = 0, next_label = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (cand(y, x) != 1 || labels(y, x) >= 0) continue;
      const int c = flood(cand, 1, labels, next_label, y, x, stack);
      if (c > best_count) {
        best_count = c;
        best_label = next_label;
      }
      ++next_label;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.bits(y, x) = (labels(y, x) == best_label) ? 1 : 0;

  // Fill interior holes: background connected to the border stays background,
  // everything else becomes foreground.
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> reach =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic,
                   Eigen::RowMajor>::Constant(h, w, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool border = (y == 0 || y == h - 1 || x == 0 || x == w - 1);
      if (border && out.bits(y, x) == 0 && reach(y, x) < 0)
        flood(out.bits, 0, reach, 0, y, x, stack);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (out.bits(y, x) == 0 && reach(y, x) < 0) out.bits(y, x) = 1;

  return out;
}

double air_fraction(const Eigen::Ref<const ImageF>& hu_slice,
                    const BodyMask& mask) {
  if (mask.degenerate || mask.area() == 0)
    throw data_error("air fraction undefined for a degenerate mask");
  if (mask.bits.rows() != hu_slice.rows() ||
      mask.bits.cols() != hu_slice.cols())
    throw dimension_error("mask/slice shape mismatch");
  std::int64_t air = 0, total = 0;
  for (Eigen::Index y = 0; y < hu_slice.rows(); ++y)
    for (Eigen::Index x = 0; x < hu_slice.cols(); ++x) {
      if (!mask.bits(y, x)) continue;
      ++total;
      if (hu_slice(y, x) < kAirThresholdHu) ++air;
    }
  return static_cast<double>(air) / static_cast<double>(total);
}

double air_fraction_whole(const Eigen::Ref<const ImageF>& hu_slice) {
  const auto total = hu_slice.size();
  if (total == 0) throw dimension_error("empty slice");
  const std::int64_t air =
      (hu_slice < kAirThresholdHu).cast<std::int64_t>().sum();
  return static_cast<double>(air) / static_cast<double>(total);
}

RoiBounds select_abdominal_roi(const Volume& v, const RoiParams& params) {
  if (v.normalized)
    throw state_error("ROI selection needs HU intensities");
  v.validate();

  std::vector<double> frac(v.nz, 0.0);
  int valid = 0;
  for (int z = 0; z < v.nz; ++z) {
    const auto slice = v.slice(z);
    if (params.whole_slice_fraction) {
      frac[z] = air_fraction_whole(slice);
      ++valid;
    } else {
      const BodyMask m = body_mask(slice);
      if (m.degenerate) continue;  // counted as zero air
      frac[z] = air_fraction(slice, m);
      ++valid;
    }
  }
  if (valid < 3)
    throw data_error("ROI selection needs at least 3 slices with a body mask");

  // Moving average over `smooth_window` slices, shrinking at the edges.
  const int half = params.smooth_window / 2;
  std::vector<double> smooth(v.nz, 0.0);
  for (int z = 0; z < v.nz; ++z) {
    const int lo = std::max(0, z - half);
    const int hi = std::min(v.nz - 1, z + half);
    double s = 0.0;
    for (int i = lo; i <= hi; ++i) s += frac[i];
    smooth[z] = s / (hi - lo + 1);
  }

  int peak = 0;
  for (int z = 1; z < v.nz; ++z)
    if (smooth[z] > smooth[peak]) peak = z;

  int top = -1;
  for (int z = peak; z < v.nz; ++z)
    if (smooth[z] < params.tau_lung) {
      top = z;
      break;
    }
  int bottom = -1;
  for (int z = v.nz - 1; z >= 0; --z)
    if (smooth[z] > params.tau_bowel) {
      bottom = z;
      break;
    }

  if (top < 0 || bottom < 0 || top > bottom)
    return RoiBounds{0, v.nz - 1, true};
  return RoiBounds{top, bottom, false};
}

double bm_delta(const BodyMask& prev, const BodyMask& cur) {
  if (prev.bits.rows() != cur.bits.rows() ||
      prev.bits.cols() != cur.bits.cols())
    throw dimension_error("mask shape mismatch");
  const std::int64_t prev_area = prev.area();
  if (prev_area == 0) throw data_error("bm_delta undefined for empty prev");
  const std::int64_t inter =
      (prev.bits.min(cur.bits)).cast<std::int64_t>().sum();
  return 1.0 - static_cast<double>(inter) / static_cast<double>(prev_area);
}

void write_pgm(const Eigen::Ref<const ImageF>& normalized_slice,
               const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw io_error("cannot write " + path.string());
  os << "P5\n"
     << normalized_slice.cols() << " " << normalized_slice.rows() << "\n255\n";
  for (Eigen::Index y = 0; y < normalized_slice.rows(); ++y)
    for (Eigen::Index x = 0; x < normalized_slice.cols(); ++x) {
      const float t =
          std::clamp((normalized_slice(y, x) + 1.f) * 0.5f, 0.f, 1.f);
      const auto byte = static_cast<unsigned char>(std::lround(t * 255.f));
      os.put(static_cast<char>(byte));
    }
  if (!os) throw io_error("write failed: " + path.string());
}

}  // namespace actrans::vol
