#include "spotlight/filters.hpp"

#include <cmath>

namespace spotlight {

std::vector<double> gaussian_kernel(double sigma, double truncate) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "negative Gaussian sigma");
  if (sigma == 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(truncate * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += k[i + r];
  }
  for (auto& w : k) w /= total;
  return k;
}

namespace {

// Maps an out-of-range index back inside [0, n) by half-sample reflection.
std::int64_t reflect(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

VolumeD filter_axis(const VolumeD& v, int axis, const std::vector<double>& kernel,
                    Boundary boundary) {
  if (kernel.size() == 1 && kernel[0] == 1.0) return v;
  const Shape3 s = v.shape();
  const std::int64_t len = axis == 0 ? s.z : axis == 1 ? s.y : s.x;
  const std::int64_t stride = axis == 0 ? s.y * s.x : axis == 1 ? s.x : 1;
  const std::int64_t r = static_cast<std::int64_t>(kernel.size() / 2);
  VolumeD out(s, 0.0, v.voxel_size());
  std::vector<double> line(len), padded(len + 2 * r);

  const std::int64_t lines = s.voxels() / len;
  for (std::int64_t l = 0; l < lines; ++l) {
    // Base offset of line l: enumerate all index tuples with the filtered axis fixed at 0.
    std::int64_t base;
    if (axis == 2) {
      base = l * s.x;
    } else if (axis == 1) {
      base = (l / s.x) * s.y * s.x + l % s.x;
    } else {
      base = l;
    }
    for (std::int64_t i = 0; i < len; ++i) line[i] = v[base + i * stride];
    for (std::int64_t i = -r; i < len + r; ++i) {
      double val;
      if (i >= 0 && i < len) {
        val = line[i];
      } else if (boundary == Boundary::Reflect) {
        val = line[reflect(i, len)];
      } else {
        val = 0.0;
      }
      padded[i + r] = val;
    }
    for (std::int64_t i = 0; i < len; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * padded[i + k];
      out[base + i * stride] = acc;
    }
  }
  return out;
}

VolumeD gaussian_blur(const VolumeD& v, Spacing3 sigma, double truncate, Boundary boundary) {
  VolumeD out = filter_axis(v, 0, gaussian_kernel(sigma.z, truncate), boundary);
  out = filter_axis(out, 1, gaussian_kernel(sigma.y, truncate), boundary);
  return filter_axis(out, 2, gaussian_kernel(sigma.x, truncate), boundary);
}

VolumeD gradient_magnitude(const VolumeD& v) {
  const Shape3 s = v.shape();
  VolumeD out(s, 0.0, v.voxel_size());
  auto diff = [&](std::int64_t i, std::int64_t n, auto at) {
    if (n == 1) return 0.0;
    if (i == 0) return at(1) - at(0);
    if (i == n - 1) return at(n - 1) - at(n - 2);
    return 0.5 * (at(i + 1) - at(i - 1));
  };
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const double gz = diff(z, s.z, [&](std::int64_t k) { return v(k, y, x); });
        const double gy = diff(y, s.y, [&](std::int64_t k) { return v(z, k, x); });
        const double gx = diff(x, s.x, [&](std::int64_t k) { return v(z, y, k); });
        out(z, y, x) = std::sqrt(gz * gz + gy * gy + gx * gx);
      }
  return out;
}

}  // namespace spotlight
