#include "spotlight/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spotlight/filters.hpp"

namespace spotlight {

void PhantomConfig::validate() const {
  if (shape.z <= 0 || shape.y <= 0 || shape.x <= 0) {
    throw Error(ErrorCode::InvalidConfig, "phantom shape must be positive");
  }
  if (n_nuclei < 0) throw Error(ErrorCode::InvalidConfig, "n_nuclei must be >= 0");
  if (!(radius_min >= 2.0) || !(radius_max >= radius_min)) {
    throw Error(ErrorCode::InvalidConfig, "radius range must satisfy 2 <= min <= max");
  }
  for (double s : {axial_elongation_sigma_ratio, psf_sigma_xy, bg_noise_sigma,
                   bg_gradient_amplitude, input_noise_sigma}) {
    if (!(s >= 0.0)) throw Error(ErrorCode::InvalidConfig, "phantom sigmas must be >= 0");
  }
  if (!(falloff >= 0.0 && falloff <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "falloff must lie in [0, 1]");
  }
  if (max_placement_attempts < 1) {
    throw Error(ErrorCode::InvalidConfig, "max_placement_attempts must be >= 1");
  }
}

double Ellipsoid::volume() const {
  return 4.0 / 3.0 * std::acos(-1.0) * semi_axes[0] * semi_axes[1] * semi_axes[2];
}

double Ellipsoid::q(double z, double y, double x) const {
  const double d[3] = {z - center[0], y - center[1], x - center[2]};
  double acc = 0.0;
  for (int a = 0; a < 3; ++a) {
    // Body coordinate along axis a: dot of d with column a.
    const double b = d[0] * rotation[a] + d[1] * rotation[3 + a] + d[2] * rotation[6 + a];
    acc += (b / semi_axes[a]) * (b / semi_axes[a]);
  }
  return acc;
}

namespace {

std::array<double, 9> random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  double w, x, y, z, norm;
  do {
    w = n(rng);
    x = n(rng);
    y = n(rng);
    z = n(rng);
    norm = std::sqrt(w * w + x * x + y * y + z * z);
  } while (norm < 1e-12);
  w /= norm;
  x /= norm;
  y /= norm;
  z /= norm;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

std::vector<Ellipsoid> place_nuclei(const PhantomConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> radius(cfg.radius_min, cfg.radius_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double dims[3] = {static_cast<double>(cfg.shape.z), static_cast<double>(cfg.shape.y),
                          static_cast<double>(cfg.shape.x)};
  std::vector<Ellipsoid> placed;
  for (int i = 0; i < cfg.n_nuclei; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_placement_attempts && !ok; ++attempt) {
      Ellipsoid e;
      for (auto& a : e.semi_axes) a = radius(rng);
      e.rotation = random_rotation(rng);
      const double reach = *std::max_element(e.semi_axes.begin(), e.semi_axes.end());
      // One voxel of clearance from every face.
      const double margin = reach + 1.0;
      bool fits = true;
      for (int a = 0; a < 3; ++a) {
        const double span = dims[a] - 1.0 - 2.0 * margin;
        if (span < 0.0) {
          fits = false;
          break;
        }
        e.center[a] = margin + span * unit(rng);
      }
      if (!fits) continue;
      ok = std::all_of(placed.begin(), placed.end(), [&](const Ellipsoid& o) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) d2 += (e.center[a] - o.center[a]) * (e.center[a] - o.center[a]);
        const double other = *std::max_element(o.semi_axes.begin(), o.semi_axes.end());
        return std::sqrt(d2) > reach + other;
      });
      if (ok) placed.push_back(e);
    }
    if (!ok) {
      throw Error(ErrorCode::PlacementFailed, "could not place nucleus " + std::to_string(i + 1) +
                                                  " of " + std::to_string(cfg.n_nuclei) + " in " +
                                                  to_string(cfg.shape));
    }
  }
  return placed;
}

}  // namespace

SynthSample generate_phantom(const PhantomConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Shape3 s = cfg.shape;

  SynthSample out;
  out.nuclei = place_nuclei(cfg, rng);
  out.labels = LabelVolume(s, 0u);
  VolumeD clean(s, 0.0);
  for (std::size_t i = 0; i < out.nuclei.size(); ++i) {
    const Ellipsoid& e = out.nuclei[i];
    const double reach = *std::max_element(e.semi_axes.begin(), e.semi_axes.end());
    auto lo = [&](int a) { return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(e.center[a] - reach))); };
    auto hi = [&](int a, std::int64_t n) {
      return std::min<std::int64_t>(n - 1, static_cast<std::int64_t>(std::ceil(e.center[a] + reach)));
    };
    for (std::int64_t z = lo(0); z <= hi(0, s.z); ++z)
      for (std::int64_t y = lo(1); y <= hi(1, s.y); ++y)
        for (std::int64_t x = lo(2); x <= hi(2, s.x); ++x) {
          const double q = e.q(static_cast<double>(z), static_cast<double>(y), static_cast<double>(x));
          if (q > 1.0) continue;
          out.labels(z, y, x) = static_cast<std::uint32_t>(i + 1);
          clean(z, y, x) = cfg.fg_intensity * (1.0 - cfg.falloff * q);
        }
  }

  // Observed fluorescence: anisotropic PSF, background plane ramp, noise.
  const double sxy = cfg.psf_sigma_xy;
  VolumeD observed =
      gaussian_blur(clean, Spacing3{sxy * cfg.axial_elongation_sigma_ratio, sxy, sxy});
  std::normal_distribution<double> dir;
  double u[3];
  double un;
  do {
    u[0] = dir(rng);
    u[1] = dir(rng);
    u[2] = dir(rng);
    un = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  } while (un < 1e-12);
  for (double& c : u) c /= un;
  auto coord = [](std::int64_t i, std::int64_t n) {
    return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5;
  };
  // Ramp normalized to [0, amplitude] over the volume corners.
  double smin = 0.0, smax = 0.0;
  for (double c : u) (c < 0 ? smin : smax) += c;
  const double sspan = smax - smin;

  std::normal_distribution<double> bg_noise(0.0, 1.0);
  out.target = Volume(s, 0.0f);
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const double proj = u[0] * coord(z, s.z) + u[1] * coord(y, s.y) + u[2] * coord(x, s.x);
        const double ramp = sspan > 0 ? cfg.bg_gradient_amplitude * (proj - smin) / sspan : 0.0;
        const double val = observed(z, y, x) + ramp + cfg.bg_noise_sigma * bg_noise(rng);
        out.target(z, y, x) = static_cast<float>(std::max(0.0, val));
      }

  // Label-free proxy: edge strength of the clean structure plus independent noise.
  VolumeD edges = gradient_magnitude(clean);
  const double peak = *std::max_element(edges.begin(), edges.end());
  std::normal_distribution<double> in_noise(0.0, 1.0);
  out.input = Volume(s, 0.0f);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double e = peak > 0 ? edges[i] / peak : 0.0;
    out.input[i] = static_cast<float>(e + cfg.input_noise_sigma * in_noise(rng));
  }
  return out;
}

}  // namespace spotlight
