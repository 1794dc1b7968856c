#include <cmath>

#include "doctest.h"
#include "spotlight/filters.hpp"
#include "spotlight/metrics.hpp"
#include "oracles.hpp"

using namespace spotlight;
using spotlight::testing::random_grid;
using spotlight::testing::random_mask;

using spotlight::testing::add_noise;
using spotlight::testing::blobs;

TEST_CASE("rescale_to_target_range is the affine endpoint map") {
  const TargetRange r{10.0, 30.0, -2.0, 6.0};
  const Volume p({1, 1, 3}, std::vector<float>{-2.0f, 6.0f, 2.0f});
  const Volume out = rescale_to_target_range(p, r);
  CHECK(out[0] == doctest::Approx(10.0));
  CHECK(out[1] == doctest::Approx(30.0));
  CHECK(out[2] == doctest::Approx(20.0));
  CHECK_THROWS_AS(rescale_to_target_range(p, TargetRange{1, 1, 0, 1}), Error);
  CHECK_THROWS_AS(rescale_to_target_range(p, TargetRange{0, 1, 2, 2}), Error);
}

TEST_CASE("psnr closed forms") {
  Volume t({1, 10, 10});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i % 2);  // range 1
  CHECK(std::isinf(psnr(t, t)));
  CHECK(psnr(t, t) > 0);
  Volume p = t;
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += (i % 3 == 0 ? 0.1f : -0.1f);
  CHECK(psnr(p, t) == doctest::Approx(20.0).epsilon(1e-5));
}

TEST_CASE("masked psnr ignores off-mask corruption and is affine invariant") {
  std::mt19937_64 rng(6);
  const Shape3 s{4, 8, 8};
  const Volume t = random_grid(s, rng, 0, 5);
  Volume p = random_grid(s, rng, 0, 5);
  const MaskVolume m = random_mask(s, rng, 0.3);
  const double clean = psnr(p, t, &m);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!m[i]) p[i] = 1e4f * static_cast<float>(i % 7);
  CHECK(psnr(p, t, &m) == clean);
  CHECK_THROWS_AS(psnr(p, t, std::make_unique<MaskVolume>(s, 0).get()), Error);

  const Volume p2 = random_grid(s, rng, 0, 5);
  Volume pa = p2, ta = t;
  for (auto& f : pa) f = 3.0f * f - 7.0f;
  for (auto& f : ta) f = 3.0f * f - 7.0f;
  CHECK(psnr(pa, ta) == doctest::Approx(psnr(p2, t)).epsilon(1e-5));
}

TEST_CASE("ssim3d: identity, symmetry and anti-correlation") {
  std::mt19937_64 rng(9);
  const Volume a = blobs({8, 32, 32}, 1);
  CHECK(ssim3d(a, a) == 1.0);
  const Volume r = random_grid({6, 9, 7}, rng, -3, 3);
  CHECK(ssim3d(r, r) == 1.0);

  const Volume b = add_noise(a, 0.2, 3);
  CHECK(ssim3d(a, b) == doctest::Approx(ssim3d(b, a)).epsilon(1e-12));
  CHECK(ssim3d(a, b) < 1.0);

  // Checkerboard: every local mean is ~0, so only the structure term speaks.
  Volume zero_mean({6, 12, 12});
  for (std::int64_t z = 0; z < 6; ++z)
    for (std::int64_t y = 0; y < 12; ++y)
      for (std::int64_t x = 0; x < 12; ++x) zero_mean(z, y, x) = (z + y + x) % 2 ? 1.0f : -1.0f;
  Volume neg = zero_mean;
  for (auto& f : neg) f = 0.01f - f;
  CHECK(ssim3d(zero_mean, neg) < 0.0);
  CHECK(ssim3d(zero_mean, neg) >= -1.0);
}

TEST_CASE("masked ssim3d depends only on mask voxels") {
  std::mt19937_64 rng(10);
  const Shape3 s{6, 16, 16};
  Volume a = blobs(s, 2);
  Volume b = add_noise(a, 0.1, 4);
  const MaskVolume m = random_mask(s, rng, 0.4);
  const double clean = ssim3d(a, b, &m);
  std::uniform_real_distribution<double> junk(-50, 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (m[i]) continue;
    a[i] = static_cast<float>(junk(rng));
    b[i] = static_cast<float>(junk(rng));
  }
  CHECK(ssim3d(a, b, &m) == doctest::Approx(clean).epsilon(1e-12));
}

TEST_CASE("frc: identical volumes reach the Nyquist floor") {
  const Volume a = add_noise(blobs({4, 64, 64}, 5), 0.05, 1);
  const FrcResult r = frc(a, a);
  CHECK(r.correlated);
  for (double c : r.curve) CHECK(c == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.resolution_px == 2.0);
  CHECK(r.curve.size() == 7);  // ceil(32 / 5)
}

TEST_CASE("frc: independent noise has no correlation") {
  std::mt19937_64 rng(11);
  const Volume a = random_grid({8, 64, 64}, rng, -1, 1);
  const Volume b = random_grid({8, 64, 64}, rng, -1, 1);
  const FrcResult r = frc(a, b);
  for (double c : r.curve) CHECK(std::abs(c) < 0.2);
  CHECK_FALSE(r.correlated);
  CHECK(std::isinf(frc_resolution(a, b)));
}

TEST_CASE("frc: blurring lowers the resolution below Nyquist") {
  // Both sides carry an independent noise floor, as real acquisitions do.
  const Volume clean = blobs({6, 64, 64}, 7);
  const Volume t = add_noise(clean, 0.02, 21);
  const VolumeD blurred = gaussian_blur(grid_cast<double>(clean), Spacing3{0.0, 2.0, 2.0});
  const Volume p = add_noise(grid_cast<float>(blurred), 0.02, 22);
  const double res = frc_resolution(p, t);
  CHECK(std::isfinite(res));
  CHECK(res > 2.0);
  CHECK(res == doctest::Approx(frc_resolution(t, p)).epsilon(1e-12));
  // Sharper pair resolves finer detail.
  const Volume t2 = add_noise(clean, 0.02, 23);
  CHECK(frc_resolution(t2, t) < res);
}

TEST_CASE("frc rejects tiny slices") {
  CHECK_THROWS_AS(frc(Volume({2, 8, 64}, 1.0f), Volume({2, 8, 64}, 1.0f)), Error);
}
