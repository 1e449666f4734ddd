#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "actrans/volume.hpp"
#include "test_util.hpp"

using namespace actrans;
namespace fs = std::filesystem;

namespace {

vol::Volume make_volume(int nz, int ny, int nx, bool normalized, Rng& rng) {
  vol::Volume v;
  v.nz = nz;
  v.ny = ny;
  v.nx = nx;
  v.dz = 5.f;
  v.dy = 0.8f;
  v.dx = 0.8f;
  v.modality = vol::Modality::contrast_a;
  v.normalized = normalized;
  v.voxels.resize(v.voxel_count());
  for (auto& x : v.voxels)
    x = normalized ? static_cast<float>(rng.uniform(-1.0, 1.0))
                   : static_cast<float>(rng.uniform_int(-1024, 3071));
  return v;
}

}  // namespace

TEST_CASE("avol round trip is bit exact for both dtypes") {
  const auto dir = testutil::temp_dir("volcore");
  Rng rng(7);
  for (const bool normalized : {false, true}) {
    vol::Volume v = make_volume(4, 8, 8, normalized, rng);
    const auto path = dir / "roundtrip.avol";
    vol::save_volume(v, path);
    const vol::Volume r = vol::load_volume(path);
    CHECK(r.nz == 4);
    CHECK(r.ny == 8);
    CHECK(r.nx == 8);
    CHECK(r.normalized == normalized);
    CHECK(r.modality == v.modality);
    CHECK(r.dz == v.dz);
    CHECK(r.dy == v.dy);
    CHECK(r.dx == v.dx);
    REQUIRE(r.voxels.size() == v.voxels.size());
    for (std::size_t i = 0; i < v.voxels.size(); ++i)
      CHECK(r.voxels[i] == v.voxels[i]);
  }
}

TEST_CASE("avol round trip property over random shapes") {
  const auto dir = testutil::temp_dir("volcore");
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const int nz = rng.uniform_int(1, 5);
    const int ny = rng.uniform_int(1, 9);
    const int nx = rng.uniform_int(1, 9);
    vol::Volume v = make_volume(nz, ny, nx, trial % 2 == 0, rng);
    const auto path = dir / "prop.avol";
    vol::save_volume(v, path);
    const vol::Volume r = vol::load_volume(path);
    CHECK(r.voxels == v.voxels);
  }
}

TEST_CASE("zero filled volume stores zeros") {
  const auto dir = testutil::temp_dir("volcore");
  vol::Volume v;
  v.nz = 1;
  v.ny = 2;
  v.nx = 2;
  v.voxels = {0.f, 0.f, 0.f, 0.f};
  const auto path = dir / "zeros.avol";
  vol::save_volume(v, path);
  const vol::Volume r = vol::load_volume(path);
  for (float x : r.voxels) CHECK(x == 0.f);
}

TEST_CASE("bad magic rejected") {
  const auto dir = testutil::temp_dir("volcore");
  const auto path = dir / "bad.avol";
  std::ofstream os(path, std::ios::binary);
  os << "XXXX";
  os.close();
  CHECK_THROWS_AS(vol::load_volume(path), format_error);
}

TEST_CASE("truncated payload rejected") {
  const auto dir = testutil::temp_dir("volcore");
  Rng rng(3);
  vol::Volume v = make_volume(2, 8, 8, false, rng);
  const auto path = dir / "trunc.avol";
  vol::save_volume(v, path);
  // Keep the header plus only 64 of the 128 declared int16 values.
  std::string bytes = testutil::read_file_bytes(path);
  bytes.resize(33 + 64 * 2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  os.close();
  CHECK_THROWS_AS(vol::load_volume(path), truncation_error);
}

TEST_CASE("trailing bytes rejected") {
  const auto dir = testutil::temp_dir("volcore");
  Rng rng(4);
  vol::Volume v = make_volume(1, 4, 4, false, rng);
  const auto path = dir / "extra.avol";
  vol::save_volume(v, path);
  std::ofstream os(path, std::ios::binary | std::ios::app);
  os << "junk";
  os.close();
  CHECK_THROWS_AS(vol::load_volume(path), format_error);
}

TEST_CASE("normalize maps window endpoints and midpoint") {
  vol::Volume v;
  v.nz = 1;
  v.ny = 1;
  v.nx = 4;
  v.voxels = {-1024.f, 1024.f, 0.f, 1524.f};
  const vol::Volume n = vol::normalize_intensity(v, -1024.f, 1024.f);
  CHECK(n.normalized);
  CHECK(n.voxels[0] == doctest::Approx(-1.f));
  CHECK(n.voxels[1] == doctest::Approx(1.f));
  CHECK(n.voxels[2] == doctest::Approx(0.f));
  CHECK(n.voxels[3] == doctest::Approx(1.f));  // clamped above the window
}

TEST_CASE("normalize is monotone and bounded") {
  Rng rng(5);
  vol::Volume v = make_volume(2, 6, 6, false, rng);
  const vol::Volume n = vol::normalize_intensity(v, -500.f, 700.f);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    CHECK(n.voxels[i] >= -1.f);
    CHECK(n.voxels[i] <= 1.f);
    for (std::size_t j = 0; j < v.voxels.size(); ++j)
      if (v.voxels[i] <= v.voxels[j]) CHECK(n.voxels[i] <= n.voxels[j]);
  }
}

TEST_CASE("normalize twice is a state error") {
  Rng rng(6);
  const vol::Volume v = make_volume(1, 4, 4, true, rng);
  CHECK_THROWS_AS(vol::normalize_intensity(v, -1024.f, 1024.f), state_error);
}

TEST_CASE("resize constant slice stays constant") {
  const vol::ImageF in = testutil::constant_slice(17, 13, 0.25f);
  const vol::ImageF out = vol::resize_bilinear(in, 9, 21);
  CHECK(out.rows() == 9);
  CHECK(out.cols() == 21);
  for (Eigen::Index y = 0; y < out.rows(); ++y)
    for (Eigen::Index x = 0; x < out.cols(); ++x)
      CHECK(out(y, x) == doctest::Approx(0.25f).epsilon(1e-6));
}

TEST_CASE("resize 512 to 128 and range bound") {
  Rng rng(8);
  vol::ImageF in(512, 512);
  for (Eigen::Index y = 0; y < 512; ++y)
    for (Eigen::Index x = 0; x < 512; ++x)
      in(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
  const vol::ImageF out = vol::resize_bilinear(in, 128, 128);
  CHECK(out.rows() == 128);
  CHECK(out.cols() == 128);
  CHECK(out.maxCoeff() <= in.maxCoeff());
  CHECK(out.minCoeff() >= in.minCoeff());
}

TEST_CASE("resize to identity shape is bit identical") {
  Rng rng(9);
  vol::ImageF in(23, 31);
  for (Eigen::Index y = 0; y < in.rows(); ++y)
    for (Eigen::Index x = 0; x < in.cols(); ++x)
      in(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
  const vol::ImageF out = vol::resize_bilinear(in, 23, 31);
  for (Eigen::Index y = 0; y < in.rows(); ++y)
    for (Eigen::Index x = 0; x < in.cols(); ++x) CHECK(out(y, x) == in(y, x));
}

TEST_CASE("body mask of an all-air slice is degenerate") {
  const vol::BodyMask m =
      vol::body_mask(testutil::constant_slice(32, 32, -1000.f));
  CHECK(m.degenerate);
  CHECK(m.area() == 0);
}

TEST_CASE("body mask recovers a solid disk") {
  const vol::ImageF slice = testutil::disk(32, 32, 16, 16, 9, 40.f, -1000.f);
  const vol::BodyMask m = vol::body_mask(slice);
  CHECK_FALSE(m.degenerate);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      CHECK(int(m.bits(y, x)) == (slice(y, x) > -300.f ? 1 : 0));
}

TEST_CASE("body mask fills an interior cavity") {
  vol::ImageF slice = testutil::disk(32, 32, 16, 16, 10, 40.f, -1000.f);
  // -800 HU pocket inside the disk
  for (int y = 13; y <= 18; ++y)
    for (int x = 13; x <= 18; ++x) slice(y, x) = -800.f;
  const vol::BodyMask m = vol::body_mask(slice);
  CHECK_FALSE(m.degenerate);
  CHECK(int(m.bits(15, 15)) == 1);  // cavity filled
  CHECK_FALSE(testutil::has_interior_hole(m.bits));
  CHECK(testutil::count_components(m.bits, 1) == 1);
}

TEST_CASE("body mask topology on random HU slices") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    vol::ImageF slice(24, 24);
    for (Eigen::Index i = 0; i < slice.size(); ++i)
      slice.data()[i] =
          rng.uniform() < 0.45 ? 40.f : -1000.f;  // speckle pattern
    const vol::BodyMask m = vol::body_mask(slice);
    if (m.degenerate) continue;
    CHECK(testutil::count_components(m.bits, 1) == 1);
    CHECK_FALSE(testutil::has_interior_hole(m.bits));
  }
}

TEST_CASE("air fraction cases") {
  const vol::ImageF body = testutil::disk(32, 32, 16, 16, 10, 40.f, -1000.f);
  const vol::BodyMask m = vol::body_mask(body);
  CHECK(vol::air_fraction(body, m) == doctest::Approx(0.0));

  // Replace half of the in-body pixels with air-like values.
  vol::ImageF half = body;
  std::int64_t total = m.area(), flipped = 0;
  for (int y = 0; y < 32 && flipped < total / 2; ++y)
    for (int x = 0; x < 32 && flipped < total / 2; ++x)
      if (m.bits(y, x)) {
        half(y, x) = -700.f;
        ++flipped;
      }
  CHECK(vol::air_fraction(half, m) ==
        doctest::Approx(double(flipped) / double(total)));

  vol::BodyMask degenerate;
  degenerate.bits = vol::MaskBits::Zero(32, 32);
  degenerate.degenerate = true;
  CHECK_THROWS_AS(vol::air_fraction(body, degenerate), data_error);
}

namespace {

// Synthetic profile volume: lungs for z in [0, 20), bowel gas in [60, 90).
vol::Volume profile_volume(int nz = 100) {
  vol::Volume v;
  v.nz = nz;
  v.ny = 24;
  v.nx = 24;
  v.voxels.resize(v.voxel_count());
  for (int z = 0; z < nz; ++z) {
    vol::ImageF slice = testutil::disk(24, 24, 12, 12, 10, 40.f, -1000.f);
    if (z < 20) {
      for (int y = 8; y <= 16; ++y)
        for (int x = 6; x <= 17; ++x) slice(y, x) = -850.f;  // lungs
    } else if (z >= 60 && z < 90) {
      for (int y = 10; y <= 13; ++y)
        for (int x = 10; x <= 13; ++x) slice(y, x) = -900.f;  // bowel gas
    }
    v.set_slice(z, slice);
  }
  return v;
}

}  // namespace

TEST_CASE("roi detection finds the post-lung and last-gas slices") {
  const vol::Volume v = profile_volume();
  const vol::RoiBounds roi = vol::select_abdominal_roi(v);
  CHECK_FALSE(roi.fallback);
  CHECK(roi.top >= 18);
  CHECK(roi.top <= 22);
  CHECK(roi.bottom >= 87);
  CHECK(roi.bottom <= 91);
}

TEST_CASE("roi detection also works on the whole-slice fraction") {
  const vol::Volume v = profile_volume();
  vol::RoiParams params;
  params.whole_slice_fraction = true;
  // Air outside the body dominates: ~0.46 baseline, ~0.64 in the lungs,
  // ~0.48 over the bowel span.
  params.tau_lung = 0.55;
  params.tau_bowel = 0.47;
  const vol::RoiBounds roi = vol::select_abdominal_roi(v, params);
  CHECK_FALSE(roi.fallback);
  CHECK(roi.top >= 18);
  CHECK(roi.top <= 22);
}

TEST_CASE("roi falls back to the full extent without air") {
  vol::Volume v;
  v.nz = 10;
  v.ny = 16;
  v.nx = 16;
  v.voxels.resize(v.voxel_count());
  for (int z = 0; z < v.nz; ++z)
    v.set_slice(z, testutil::disk(16, 16, 8, 8, 6, 40.f, -1000.f));
  const vol::RoiBounds roi = vol::select_abdominal_roi(v);
  CHECK(roi.fallback);
  CHECK(roi.top == 0);
  CHECK(roi.bottom == v.nz - 1);
}

TEST_CASE("roi needs at least 3 usable slices") {
  vol::Volume v;
  v.nz = 2;
  v.ny = 16;
  v.nx = 16;
  v.voxels.resize(v.voxel_count());
  for (int z = 0; z < v.nz; ++z)
    v.set_slice(z, testutil::disk(16, 16, 8, 8, 6, 40.f, -1000.f));
  CHECK_THROWS_AS(vol::select_abdominal_roi(v), data_error);
}

TEST_CASE("bm delta worked cases") {
  vol::BodyMask prev, cur;
  prev.bits = vol::MaskBits::Zero(10, 10);
  cur.bits = vol::MaskBits::Zero(10, 10);
  for (int i = 0; i < 100; ++i) prev.bits(i / 10, i % 10) = 1;
  CHECK(prev.area() == 100);

  SUBCASE("full overlap") { CHECK(vol::bm_delta(prev, prev) == doctest::Approx(0.0)); }
  SUBCASE("80 of 100 overlap") {
    for (int i = 0; i < 80; ++i) cur.bits(i / 10, i % 10) = 1;
    CHECK(vol::bm_delta(prev, cur) == doctest::Approx(0.2));
  }
  SUBCASE("disjoint") { CHECK(vol::bm_delta(prev, cur) == doctest::Approx(1.0)); }
  SUBCASE("empty prev") {
    vol::BodyMask empty;
    empty.bits = vol::MaskBits::Zero(10, 10);
    CHECK_THROWS_AS(vol::bm_delta(empty, cur), data_error);
  }
}

TEST_CASE("bm delta properties on random masks") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    vol::BodyMask a, b;
    a.bits = testutil::random_mask(rng, 12, 12, 0.6);
    b.bits = testutil::random_mask(rng, 12, 12, 0.6);
    if (a.area() == 0) continue;
    CHECK(vol::bm_delta(a, a) == doctest::Approx(0.0));
    const double d = vol::bm_delta(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("pgm export writes a valid header") {
  const auto dir = testutil::temp_dir("volcore");
  const auto path = dir / "slice.pgm";
  vol::write_pgm(testutil::constant_slice(4, 6, 0.f), path);
  const std::string bytes = testutil::read_file_bytes(path);
  const std::string header = "P5\n6 4\n255\n";
  CHECK(bytes.rfind(header, 0) == 0);
  CHECK(bytes.size() == header.size() + 24);
  // 0.0 maps to the middle of [0, 255]
  CHECK(static_cast<unsigned char>(bytes[header.size()]) == 128);
}
