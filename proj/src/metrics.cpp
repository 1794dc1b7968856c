#include "spotlight/metrics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>

#include "spotlight/filters.hpp"

namespace spotlight {

Volume rescale_to_target_range(const Volume& pred, const TargetRange& r) {
  if (!(r.raw_max > r.raw_min) || !(r.std_max > r.std_min)) {
    throw Error(ErrorCode::ConstantRange, "degenerate target range");
  }
  const double scale = (r.raw_max - r.raw_min) / (r.std_max - r.std_min);
  Volume out(pred.shape(), 0.0f, pred.voxel_size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out[i] = static_cast<float>(r.raw_min + (pred[i] - r.std_min) * scale);
  }
  return out;
}

double psnr(const Volume& pred, const Volume& target, const MaskVolume* mask) {
  require_same_shape(pred, target, "psnr");
  if (mask) require_same_shape(pred, *mask, "psnr");
  const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(range > 0.0)) throw Error(ErrorCode::ConstantImage, "psnr against a constant target");
  double acc = 0.0;
  double n = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const double d = static_cast<double>(pred[i]) - target[i];
    acc += d * d;
    n += 1.0;
  }
  if (n == 0.0) throw Error(ErrorCode::EmptyMask, "psnr over an empty mask");
  if (acc == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / (acc / n));
}

double ssim3d(const Volume& a, const Volume& b, const MaskVolume* mask) {
  require_same_shape(a, b, "ssim3d");
  if (mask) require_same_shape(a, *mask, "ssim3d");
  const Shape3 s = a.shape();
  VolumeD w(s, 1.0);
  if (mask) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (*mask)[i] ? 1.0 : 0.0;
  }
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (w[i] == 0.0) continue;
    lo = std::min({lo, static_cast<double>(a[i]), static_cast<double>(b[i])});
    hi = std::max({hi, static_cast<double>(a[i]), static_cast<double>(b[i])});
  }
  if (!(hi >= lo)) throw Error(ErrorCode::EmptyMask, "ssim3d over an empty mask");
  const double range = hi - lo;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  // Centered values keep the second moments well conditioned.
  const double center = 0.5 * (hi + lo);
  VolumeD wa(s), wb(s), waa(s), wbb(s), wab(s);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = w[i] * (a[i] - center);
    const double y = w[i] * (b[i] - center);
    wa[i] = x;
    wb[i] = y;
    waa[i] = x * (a[i] - center);
    wbb[i] = y * (b[i] - center);
    wab[i] = x * (b[i] - center);
  }
  const Spacing3 sigma{1.5, 1.5, 1.5};
  auto smooth = [&](const VolumeD& v) { return gaussian_blur(v, sigma, 3.0, Boundary::Zero); };
  const VolumeD W = smooth(w), A = smooth(wa), B = smooth(wb), AA = smooth(waa),
                BB = smooth(wbb), AB = smooth(wab);

  double total = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double mu_a = A[i] / W[i];
    const double mu_b = B[i] / W[i];
    const double var_a = AA[i] / W[i] - mu_a * mu_a;
    const double var_b = BB[i] / W[i] - mu_b * mu_b;
    const double cov = AB[i] / W[i] - mu_a * mu_b;
    // Undo the centering in the luminance term.
    const double ma = mu_a + center;
    const double mb = mu_b + center;
    const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
    const double den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
    total += den > 0.0 ? num / den : 1.0;
    count += 1.0;
  }
  return total / count;
}

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

struct FftwPlan {
  fftw_plan plan = nullptr;
  ~FftwPlan() {
    if (plan) fftw_destroy_plan(plan);
  }
};

}  // namespace

FrcResult frc(const Volume& a, const Volume& b, int bin_delta) {
  require_same_shape(a, b, "frc");
  if (bin_delta < 1) throw Error(ErrorCode::InvalidConfig, "bin_delta must be >= 1");
  const Shape3 s = a.shape();
  if (s.y < 16 || s.x < 16) throw Error(ErrorCode::TooSmall, "frc needs xy extents >= 16");

  const std::int64_t n = std::max(s.y, s.x);
  const std::int64_t half = n / 2 + 1;
  const double nyquist = n / 2.0;
  const int rings = static_cast<int>(std::ceil(nyquist / bin_delta));

  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n * n)));
  std::unique_ptr<fftw_complex, FftwFree> fa(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n * half)));
  std::unique_ptr<fftw_complex, FftwFree> fb(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n * half)));
  FftwPlan pa, pb;
  pa.plan = fftw_plan_dft_r2c_2d(static_cast<int>(n), static_cast<int>(n), in.get(), fa.get(), FFTW_ESTIMATE);
  pb.plan = fftw_plan_dft_r2c_2d(static_cast<int>(n), static_cast<int>(n), in.get(), fb.get(), FFTW_ESTIMATE);

  // Ring index of every half-spectrum sample; -1 beyond Nyquist.
  std::vector<int> ring_of(static_cast<std::size_t>(n * half), -1);
  for (std::int64_t ky = 0; ky < n; ++ky) {
    const double fy = ky <= n / 2 ? ky : ky - n;
    for (std::int64_t kx = 0; kx < half; ++kx) {
      const double r = std::sqrt(fy * fy + static_cast<double>(kx * kx));
      if (r > nyquist) continue;
      ring_of[ky * half + kx] = std::min(rings - 1, static_cast<int>(r / bin_delta));
    }
  }

  // Tukey taper: without it the slice borders leak correlated power into every ring.
  auto taper = [](std::int64_t len) {
    std::vector<double> w(len, 1.0);
    const double edge = 0.125 * (len - 1);
    for (std::int64_t i = 0; i < len; ++i) {
      const double d = std::min<double>(i, len - 1 - i);
      if (d < edge) w[i] = 0.5 * (1.0 - std::cos(std::acos(-1.0) * d / edge));
    }
    return w;
  };
  const std::vector<double> wy = taper(s.y), wx = taper(s.x);

  auto load = [&](const Volume& v, std::int64_t z, fftw_plan plan) {
    std::fill(in.get(), in.get() + n * n, 0.0);
    double mean = 0.0;
    for (std::int64_t i = 0; i < s.y * s.x; ++i) mean += v[z * s.y * s.x + i];
    mean /= static_cast<double>(s.y * s.x);
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) in.get()[y * n + x] = (v(z, y, x) - mean) * wy[y] * wx[x];
    fftw_execute(plan);
  };

  FrcResult out;
  std::vector<double> sum(rings, 0.0);
  std::vector<double> used(rings, 0.0);
  std::vector<double> num(rings), pa_sum(rings), pb_sum(rings);
  for (std::int64_t z = 0; z < s.z; ++z) {
    load(a, z, pa.plan);
    load(b, z, pb.plan);
    std::fill(num.begin(), num.end(), 0.0);
    std::fill(pa_sum.begin(), pa_sum.end(), 0.0);
    std::fill(pb_sum.begin(), pb_sum.end(), 0.0);
    for (std::int64_t i = 0; i < n * half; ++i) {
      const int r = ring_of[i];
      if (r < 0) continue;
      // Interior columns of the half spectrum stand for two conjugate samples;
      // the weight cancels in the ratio but keeps the ring sums faithful.
      const std::int64_t kx = i % half;
      const double weight = (kx == 0 || (n % 2 == 0 && kx == n / 2)) ? 1.0 : 2.0;
      const double ar = fa.get()[i][0], ai = fa.get()[i][1];
      const double br = fb.get()[i][0], bi = fb.get()[i][1];
      num[r] += weight * (ar * br + ai * bi);
      pa_sum[r] += weight * (ar * ar + ai * ai);
      pb_sum[r] += weight * (br * br + bi * bi);
    }
    for (int r = 0; r < rings; ++r) {
      const double den = std::sqrt(pa_sum[r] * pb_sum[r]);
      if (!(den > 0.0)) continue;
      sum[r] += num[r] / den;
      used[r] += 1.0;
    }
  }

  out.curve.resize(rings);
  out.frequency.resize(rings);
  for (int r = 0; r < rings; ++r) {
    out.curve[r] = used[r] > 0 ? sum[r] / used[r] : 0.0;
    out.frequency[r] = std::min(0.5, (r + 0.5) * bin_delta / static_cast<double>(n));
  }

  if (out.curve[0] < kFrcThreshold) {
    out.correlated = false;
    return out;
  }
  out.resolution_px = 2.0;
  for (int r = 1; r < rings; ++r) {
    if (out.curve[r] >= kFrcThreshold) continue;
    const double c0 = out.curve[r - 1], c1 = out.curve[r];
    const double f0 = out.frequency[r - 1], f1 = out.frequency[r];
    const double fc = f0 + (f1 - f0) * (c0 - kFrcThreshold) / (c0 - c1);
    out.resolution_px = 1.0 / fc;
    break;
  }
  return out;
}

double frc_resolution(const Volume& a, const Volume& b, int bin_delta) {
  return frc(a, b, bin_delta).resolution_px;
}

}  // namespace spotlight
