#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "actrans/phantom.hpp"
#include "test_util.hpp"

using namespace actrans;

TEST_CASE("same seed gives bit-identical volumes") {
  phantom::PhantomSpec spec;
  spec.seed = 42;
  spec.n_slices_a = 40;
  spec.n_slices_b = 32;
  spec.height = 32;
  spec.width = 32;
  spec.warp_b.amp = 0.8;
  const auto p1 = phantom::generate_phantom_pair(spec);
  const auto p2 = phantom::generate_phantom_pair(spec);
  CHECK(p1.a.voxels == p2.a.voxels);
  CHECK(p1.b.voxels == p2.b.voxels);
  CHECK(p1.corr.b_of_a == p2.corr.b_of_a);

  spec.seed = 43;
  const auto p3 = phantom::generate_phantom_pair(spec);
  CHECK(p1.a.voxels != p3.a.voxels);
}

TEST_CASE("identity warps and equal slice counts give the identity map") {
  phantom::PhantomSpec spec;
  spec.seed = 1;
  spec.n_slices_a = 48;
  spec.n_slices_b = 48;
  spec.height = 32;
  spec.width = 32;
  const auto pair = phantom::generate_phantom_pair(spec);
  for (int n = 0; n < spec.n_slices_a; ++n)
    CHECK(pair.corr.b_of_a[n] == doctest::Approx(double(n)).epsilon(1e-9));
}

TEST_CASE("zero contrast and zero noise collapse the modalities") {
  phantom::PhantomSpec spec;
  spec.seed = 5;
  spec.n_slices_a = 24;
  spec.n_slices_b = 24;
  spec.height = 32;
  spec.width = 32;
  spec.contrast_delta_hu = 0.0;
  spec.noise_sigma_hu = 0.0;
  const auto pair = phantom::generate_phantom_pair(spec);
  CHECK(pair.a.voxels == pair.b.voxels);
}

TEST_CASE("zero contrast differs only by the noise realization") {
  phantom::PhantomSpec spec;
  spec.seed = 6;
  spec.n_slices_a = 16;
  spec.n_slices_b = 16;
  spec.height = 32;
  spec.width = 32;
  spec.contrast_delta_hu = 0.0;
  const auto pair = phantom::generate_phantom_pair(spec);
  float max_diff = 0.f;
  for (std::size_t i = 0; i < pair.a.voxels.size(); ++i)
    max_diff = std::max(max_diff,
                        std::abs(pair.a.voxels[i] - pair.b.voxels[i]));
  CHECK(max_diff > 0.f);
  CHECK(max_diff <= 12.f * spec.noise_sigma_hu);
}

TEST_CASE("contrast raises vessel intensity in A only") {
  phantom::PhantomSpec spec;
  spec.seed = 7;
  spec.n_slices_a = 32;
  spec.n_slices_b = 32;
  spec.height = 64;
  spec.width = 64;
  spec.noise_sigma_hu = 0.0;
  const auto pair = phantom::generate_phantom_pair(spec);
  // Count voxels near the enhanced vessel value (200 HU) per volume.
  int bright_a = 0, bright_b = 0;
  for (std::size_t i = 0; i < pair.a.voxels.size(); ++i) {
    if (std::abs(pair.a.voxels[i] - 200.f) < 1.f) ++bright_a;
    if (std::abs(pair.b.voxels[i] - 200.f) < 1.f) ++bright_b;
  }
  CHECK(bright_a > 100);
  CHECK(bright_b == 0);
}

TEST_CASE("correspondence map is monotone under warps") {
  phantom::PhantomSpec spec;
  spec.seed = 9;
  spec.n_slices_a = 64;
  spec.n_slices_b = 48;
  spec.warp_a.amp = -0.5;
  spec.warp_b.amp = 1.0;
  spec.height = 32;
  spec.width = 32;
  const auto pair = phantom::generate_phantom_pair(spec);
  CHECK(pair.corr.b_of_a.front() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(pair.corr.b_of_a.back() ==
        doctest::Approx(double(spec.n_slices_b - 1)).epsilon(1e-6));
  for (int n = 1; n < spec.n_slices_a; ++n)
    CHECK(pair.corr.b_of_a[n] > pair.corr.b_of_a[n - 1]);
}

TEST_CASE("anatomical offset worked cases") {
  phantom::CorrespondenceMap corr;
  corr.b_of_a = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  CHECK(phantom::anatomical_offset(4, 4, corr) == doctest::Approx(0.0));
  CHECK(phantom::anatomical_offset(4, 7, corr) == doctest::Approx(3.0));
  CHECK(phantom::anatomical_offset(5, 9, corr) == doctest::Approx(4.0));
}

TEST_CASE("roi detection recovers the generated landmarks") {
  for (const std::uint64_t seed : {11ull, 12ull, 13ull}) {
    phantom::PhantomSpec spec;
    spec.seed = seed;
    spec.n_slices_a = 96;
    spec.n_slices_b = 72;
    spec.warp_b.amp = (seed % 2) ? 0.9 : 0.0;
    const auto pair = phantom::generate_phantom_pair(spec);

    const vol::RoiBounds roi_a = vol::select_abdominal_roi(pair.a);
    CHECK_FALSE(roi_a.fallback);
    CHECK(std::abs(roi_a.top - pair.lm_a.lung_end) <= 2);
    CHECK(std::abs(roi_a.bottom - pair.lm_a.bowel_end) <= 2);

    const vol::RoiBounds roi_b = vol::select_abdominal_roi(pair.b);
    CHECK_FALSE(roi_b.fallback);
    CHECK(std::abs(roi_b.top - pair.lm_b.lung_end) <= 2);
    CHECK(std::abs(roi_b.bottom - pair.lm_b.bowel_end) <= 2);
  }
}

TEST_CASE("spec validation rejects degenerate configurations") {
  phantom::PhantomSpec spec;
  spec.n_slices_a = 1;
  CHECK_THROWS_AS(phantom::generate_phantom_pair(spec), config_error);

  spec = {};
  spec.warp_b.amp = 2.0;
  CHECK_THROWS_AS(phantom::generate_phantom_pair(spec), config_error);

  spec = {};
  spec.anatomy.bowel_start_t = 0.9;  // starts after it ends
  CHECK_THROWS_AS(phantom::generate_phantom_pair(spec), config_error);
}

TEST_CASE("manifest round trip") {
  const auto dir = testutil::temp_dir("phantom");
  phantom::PhantomSpec spec;
  spec.seed = 15;
  spec.n_slices_a = 20;
  spec.n_slices_b = 24;
  spec.height = 32;
  spec.width = 32;
  spec.warp_b.amp = 0.7;
  const auto pair = phantom::generate_phantom_pair(spec);
  const auto path = dir / "pair.manifest";
  phantom::write_manifest(pair, spec, path);

  const phantom::Manifest m = phantom::read_manifest(path);
  CHECK(m.lm_a.lung_end == pair.lm_a.lung_end);
  CHECK(m.lm_a.bowel_end == pair.lm_a.bowel_end);
  CHECK(m.lm_b.lung_end == pair.lm_b.lung_end);
  CHECK(m.lm_b.bowel_end == pair.lm_b.bowel_end);
  REQUIRE(m.corr.b_of_a.size() == pair.corr.b_of_a.size());
  for (std::size_t i = 0; i < m.corr.b_of_a.size(); ++i)
    CHECK(m.corr.b_of_a[i] == doctest::Approx(pair.corr.b_of_a[i]).epsilon(1e-5));
}
