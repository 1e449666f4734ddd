#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "actrans/rng.hpp"
#include "actrans/volume.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("actrans_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline actrans::vol::ImageF constant_slice(int h, int w, float value) {
  actrans::vol::ImageF img(h, w);
  img.setConstant(value);
  return img;
}

// Solid disk of `inside` HU over a `background` HU field.
inline actrans::vol::ImageF disk(int h, int w, double cy, double cx, double r,
                                 float inside, float background) {
  actrans::vol::ImageF img = constant_slice(h, w, background);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= r * r) img(y, x) = inside;
    }
  return img;
}

inline actrans::vol::MaskBits random_mask(actrans::Rng& rng, int h, int w,
                                          double p = 0.5) {
  actrans::vol::MaskBits m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(y, x) = rng.uniform() < p ? 1 : 0;
  return m;
}

// Independent 4-connected component counter (oracle for mask topology).
inline int count_components(const actrans::vol::MaskBits& bits,
                            std::uint8_t value) {
  const int h = static_cast<int>(bits.rows());
  const int w = static_cast<int>(bits.cols());
  std::vector<char> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> stack;
  int components = 0;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (bits(sy, sx) != value || seen[sy * w + sx]) continue;
      ++components;
      stack.assign(1, sy * w + sx);
      seen[sy * w + sx] = 1;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int y = p / w, x = p % w;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          const int q = ny[k] * w + nx[k];
          if (bits(ny[k], nx[k]) == value && !seen[q]) {
            seen[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
  return components;
}

// Oracle: true iff some background pixel cannot be flood-filled from the
// border (an interior hole).
inline bool has_interior_hole(const actrans::vol::MaskBits& bits) {
  const int h = static_cast<int>(bits.rows());
  const int w = static_cast<int>(bits.cols());
  std::vector<char> reach(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool border = (y == 0 || y == h - 1 || x == 0 || x == w - 1);
      if (!border || bits(y, x) != 0 || reach[y * w + x]) continue;
      stack.assign(1, y * w + x);
      reach[y * w + x] = 1;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int yy = p / w, xx = p % w;
        const int ny[4] = {yy - 1, yy + 1, yy, yy};
        const int nx[4] = {xx, xx, xx - 1, xx + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          const int q = ny[k] * w + nx[k];
          if (bits(ny[k], nx[k]) == 0 && !reach[q]) {
            reach[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (bits(y, x) == 0 && !reach[y * w + x]) return true;
  return false;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  const auto ranks = [](const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](int i, int j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    int i = 0;
    while (i < n) {
      int j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (i + j) + 1.0;
      for (int k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const int n = static_cast<int>(a.size());
  double ma = 0, mb = 0;
  for (int i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, va = 0, vb = 0;
  for (int i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

inline std::string read_file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

}  // namespace testutil
