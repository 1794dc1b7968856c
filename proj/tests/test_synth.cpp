#include <cmath>
#include <deque>
#include <set>

#include "doctest.h"
#include "spotlight/filters.hpp"
#include "spotlight/foreground.hpp"
#include "spotlight/synth.hpp"
#include "support.hpp"

using namespace spotlight;

namespace {

// Number of 26-connected components of the voxels carrying `label`.
int components_of(const LabelVolume& l, std::uint32_t label) {
  const Shape3 s = l.shape();
  std::vector<char> seen(l.size(), 0);
  int count = 0;
  for (std::size_t start = 0; start < l.size(); ++start) {
    if (l[start] != label || seen[start]) continue;
    ++count;
    std::deque<std::int64_t> queue{static_cast<std::int64_t>(start)};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::int64_t i = queue.front();
      queue.pop_front();
      const std::int64_t z = i / (s.y * s.x), y = (i / s.x) % s.y, x = i % s.x;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const std::int64_t zz = z + dz, yy = y + dy, xx = x + dx;
            if (zz < 0 || yy < 0 || xx < 0 || zz >= s.z || yy >= s.y || xx >= s.x) continue;
            const std::int64_t j = l.index(zz, yy, xx);
            if (l[j] == label && !seen[j]) {
              seen[j] = 1;
              queue.push_back(j);
            }
          }
    }
  }
  return count;
}

struct Box {
  std::int64_t lo[3] = {INT64_MAX, INT64_MAX, INT64_MAX};
  std::int64_t hi[3] = {INT64_MIN, INT64_MIN, INT64_MIN};
  void add(std::int64_t z, std::int64_t y, std::int64_t x) {
    const std::int64_t p[3] = {z, y, x};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  std::int64_t extent(int a) const { return hi[a] - lo[a] + 1; }
};

}  // namespace

TEST_CASE("gaussian kernel is normalized and symmetric") {
  for (double sigma : {0.5, 1.0, 1.5, 3.0}) {
    const auto k = gaussian_kernel(sigma);
    double total = 0;
    for (double w : k) total += w;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(k[i] == k[k.size() - 1 - i]);
    CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(4 * sigma)) + 1);
  }
  CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
}

TEST_CASE("separable blur equals direct 3D summation") {
  std::mt19937_64 rng(4);
  const VolumeD v = spotlight::testing::random_grid<double>({5, 7, 6}, rng);
  const Spacing3 sig{0.8, 0.6, 1.1};
  const VolumeD fast = gaussian_blur(v, sig, 2.0, Boundary::Zero);
  const auto kz = gaussian_kernel(sig.z, 2.0), ky = gaussian_kernel(sig.y, 2.0), kx = gaussian_kernel(sig.x, 2.0);
  const int rz = kz.size() / 2, ry = ky.size() / 2, rx = kx.size() / 2;
  const Shape3 s = v.shape();
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        double acc = 0;
        for (int a = -rz; a <= rz; ++a)
          for (int b = -ry; b <= ry; ++b)
            for (int c = -rx; c <= rx; ++c) {
              const std::int64_t zz = z + a, yy = y + b, xx = x + c;
              if (zz < 0 || yy < 0 || xx < 0 || zz >= s.z || yy >= s.y || xx >= s.x) continue;
              acc += kz[a + rz] * ky[b + ry] * kx[c + rx] * v(zz, yy, xx);
            }
        CHECK(fast(z, y, x) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("reflective blur keeps constants and handles short axes") {
  const VolumeD c({3, 4, 2}, 2.5);
  for (double f : gaussian_blur(c, {3.0, 2.0, 5.0})) CHECK(f == doctest::Approx(2.5).epsilon(1e-12));
  const VolumeD one({1, 1, 1}, 7.0);
  CHECK(gaussian_blur(one, {2, 2, 2})[0] == doctest::Approx(7.0));
}

TEST_CASE("gradient magnitude of a linear ramp is its slope") {
  VolumeD v({4, 5, 6});
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 5; ++y)
      for (std::int64_t x = 0; x < 6; ++x) v(z, y, x) = 2.0 * z - 1.0 * y + 2.0 * x;
  for (double g : gradient_magnitude(v)) CHECK(g == doctest::Approx(3.0));
}

TEST_CASE("phantom without nuclei is background only") {
  PhantomConfig cfg;
  cfg.n_nuclei = 0;
  cfg.shape = {16, 32, 32};
  cfg.bg_noise_sigma = 0.0;
  const SynthSample s = generate_phantom(cfg);
  for (auto l : s.labels) CHECK(l == 0u);
  // Pure ramp: spans [0, amplitude] exactly at the corners.
  const auto [lo, hi] = std::minmax_element(s.target.begin(), s.target.end());
  CHECK(*lo == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(*hi == doctest::Approx(cfg.bg_gradient_amplitude).epsilon(1e-6));
}

TEST_CASE("phantom generation is deterministic") {
  PhantomConfig cfg;
  cfg.shape = {24, 64, 64};
  cfg.n_nuclei = 4;
  cfg.seed = 11;
  const SynthSample a = generate_phantom(cfg);
  const SynthSample b = generate_phantom(cfg);
  CHECK(a.input == b.input);
  CHECK(a.target == b.target);
  CHECK(a.labels == b.labels);
  cfg.seed = 12;
  CHECK(!(generate_phantom(cfg).target == a.target));
}

TEST_CASE("placed nuclei match their analytic ellipsoid volumes") {
  PhantomConfig cfg;
  cfg.n_nuclei = 5;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    cfg.seed = seed;
    const SynthSample s = generate_phantom(cfg);
    CHECK(s.input.shape() == cfg.shape);
    CHECK(s.target.shape() == cfg.shape);
    CHECK(s.labels.shape() == cfg.shape);
    std::vector<std::int64_t> counts(6, 0);
    for (auto l : s.labels) {
      REQUIRE(l <= 5u);
      ++counts[l];
    }
    REQUIRE(s.nuclei.size() == 5);
    for (int i = 1; i <= 5; ++i) {
      const double analytic = s.nuclei[i - 1].volume();
      CHECK(counts[i] >= 0.5 * analytic);
      CHECK(counts[i] <= 1.5 * analytic);
      CHECK(components_of(s.labels, i) == 1);
    }
    for (float t : s.target) CHECK(t >= 0.0f);
  }
}

TEST_CASE("anisotropic PSF stretches blobs along z more than in xy") {
  PhantomConfig cfg;
  cfg.bg_noise_sigma = 0.0;
  cfg.bg_gradient_amplitude = 0.0;
  cfg.seed = 3;
  const SynthSample s = generate_phantom(cfg);
  const Shape3 sh = cfg.shape;
  const std::size_t n = s.nuclei.size();
  std::vector<Box> label_box(n), blob_box(n);
  for (std::int64_t z = 0; z < sh.z; ++z)
    for (std::int64_t y = 0; y < sh.y; ++y)
      for (std::int64_t x = 0; x < sh.x; ++x) {
        if (const auto l = s.labels(z, y, x)) label_box[l - 1].add(z, y, x);
        if (s.target(z, y, x) < 0.2f) continue;
        // Attribute each bright voxel to the nucleus it is closest to in body units.
        std::size_t best = 0;
        double bq = INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
          const double q = s.nuclei[i].q(z, y, x);
          if (q < bq) {
            bq = q;
            best = i;
          }
        }
        blob_box[best].add(z, y, x);
      }
  for (std::size_t i = 0; i < n; ++i) {
    CAPTURE(i);
    const auto grow = [&](int a) { return blob_box[i].extent(a) - label_box[i].extent(a); };
    CHECK(grow(0) > 0);
    CHECK(grow(0) > grow(1));
    CHECK(grow(0) > grow(2));
  }
}

TEST_CASE("default phantoms have a clear foreground that Otsu recovers") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    PhantomConfig cfg;
    cfg.seed = seed;
    const SynthSample s = generate_phantom(cfg);
    double in = 0, out = 0;
    std::int64_t nin = 0, nout = 0;
    for (std::size_t i = 0; i < s.target.size(); ++i) {
      if (s.labels[i]) {
        in += s.target[i];
        ++nin;
      } else {
        out += s.target[i];
        ++nout;
      }
    }
    CHECK(in / nin - out / nout > 3 * cfg.bg_noise_sigma);

    const double t = otsu_threshold(s.target).threshold;
    CHECK(t > out / nout);
    CHECK(t < in / nin);
    const MaskVolume m = foreground_mask(s.target, t);
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      inter += m[i] && s.labels[i];
      uni += m[i] || s.labels[i];
    }
    CHECK(static_cast<double>(inter) / uni > 0.5);
  }
}

TEST_CASE("impossible placements fail loudly") {
  PhantomConfig cfg;
  cfg.shape = {10, 64, 64};
  try {
    generate_phantom(cfg);
    FAIL("expected PlacementFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlacementFailed);
  }
  cfg.shape = {32, 32, 32};
  cfg.n_nuclei = 40;
  CHECK_THROWS_AS(generate_phantom(cfg), Error);
  cfg = {};
  cfg.radius_min = 1.0;
  CHECK_THROWS_AS(generate_phantom(cfg), Error);
}
