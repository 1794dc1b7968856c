#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "spotlight/losses.hpp"
#include "spotlight/volume.hpp"
#include "support.hpp"

namespace spotlight::testing {

// Exhaustive Otsu: classify every voxel against every candidate edge and
// score the split directly from the voxel values.
inline double brute_force_otsu(const Volume& v, int nbins = 256) {
  double lo = v[0], hi = v[0];
  for (float f : v) {
    lo = std::min<double>(lo, f);
    hi = std::max<double>(hi, f);
  }
  const double width = (hi - lo) / nbins;
  long double best = -1;
  double best_t = lo;
  for (int c = 1; c < nbins; ++c) {
    const double t = lo + width * c;
    long double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (float f : v) {
      if (f >= t) {
        n1 += 1;
        s1 += f;
      } else {
        n0 += 1;
        s0 += f;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const long double n = n0 + n1;
    const long double d = s0 / n0 - s1 / n1;
    const long double score = (n0 / n) * (n1 / n) * d * d;
    if (score > best * (1 + 1e-12L)) {
      best = score;
      best_t = t;
    }
  }
  return best_t;
}

/// Random mixture volume of 1..4 modes, small extents.
inline Volume random_mixture(std::mt19937_64& rng, int modes) {
  std::uniform_int_distribution<int> dim(2, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Volume v({dim(rng), dim(rng), dim(rng)});
  std::vector<double> centers(modes), spread(modes);
  for (int m = 0; m < modes; ++m) {
    centers[m] = 20.0 * u(rng) - 10.0;
    spread[m] = 0.05 + 3.0 * u(rng);
  }
  for (auto& f : v) {
    const int m = static_cast<int>(u(rng) * modes);
    f = static_cast<float>(centers[m] + spread[m] * std::normal_distribution<double>()(rng));
  }
  return v;
}

// Values bounded away from zero so a step of 1e-4 never straddles the
// rectification kink.
inline VolumeD random_pred(Shape3 s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.05, 2.0);
  std::bernoulli_distribution sign(0.5);
  VolumeD v(s);
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return v;
}

// Fourth-order stencil: near zero the soft threshold's third derivative is
// large enough that the two-point truncation error alone approaches 1e-5.
template <typename Loss>
double worst_gradient_error(VolumeD pred, Loss loss, double k) {
  const auto analytic = loss(pred).grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(soft_threshold(pred[i], k)) < 1e-6) continue;
    const double numeric = central_difference4([&] { return loss(pred).value; }, pred[i], 1e-4);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

inline void paint_box(LabelVolume& l, std::uint32_t id, Shape3 lo, Shape3 size) {
  for (std::int64_t z = lo.z; z < lo.z + size.z; ++z)
    for (std::int64_t y = lo.y; y < lo.y + size.y; ++y)
      for (std::int64_t x = lo.x; x < lo.x + size.x; ++x) l(z, y, x) = id;
}

inline std::set<std::uint32_t> label_set(const LabelVolume& l) {
  std::set<std::uint32_t> ids;
  for (auto v : l)
    if (v) ids.insert(v);
  return ids;
}

/// Up to max_objects random boxes in a 10^3 volume; later boxes overwrite.
inline LabelVolume random_labeling(std::mt19937_64& rng, int max_objects) {
  LabelVolume l(Shape3{10, 10, 10}, 0u);
  std::uniform_int_distribution<int> count(0, max_objects), pos(0, 7), ext(1, 6);
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    const Shape3 lo{pos(rng), pos(rng), pos(rng)};
    const Shape3 sz{std::min<std::int64_t>(ext(rng), 10 - lo.z), std::min<std::int64_t>(ext(rng), 10 - lo.y),
                    std::min<std::int64_t>(ext(rng), 10 - lo.x)};
    paint_box(l, static_cast<std::uint32_t>(k + 1), lo, sz);
  }
  return l;
}

/// Largest one-to-one matching with IoU >= tau, by exhaustive search over
/// all assignments; IoU counted voxel by voxel.
inline std::int64_t best_matching(const LabelVolume& p, const LabelVolume& g, double tau) {
  const auto ps = label_set(p), gs = label_set(g);
  const std::vector<std::uint32_t> pv(ps.begin(), ps.end()), gv(gs.begin(), gs.end());
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> iou;
  for (auto i : pv)
    for (auto j : gv) {
      std::int64_t inter = 0, uni = 0;
      for (std::size_t v = 0; v < p.size(); ++v) {
        inter += p[v] == i && g[v] == j;
        uni += p[v] == i || g[v] == j;
      }
      iou[{i, j}] = static_cast<double>(inter) / static_cast<double>(uni);
    }
  std::function<std::int64_t(std::size_t, std::vector<char>&)> rec = [&](std::size_t k, std::vector<char>& used) {
    if (k == pv.size()) return std::int64_t{0};
    std::int64_t best = rec(k + 1, used);
    for (std::size_t j = 0; j < gv.size(); ++j) {
      const double x = iou[{pv[k], gv[j]}];
      if (used[j] || x < tau || x == 0.0) continue;
      used[j] = 1;
      best = std::max(best, 1 + rec(k + 1, used));
      used[j] = 0;
    }
    return best;
  };
  std::vector<char> used(gv.size(), 0);
  return rec(0, used);
}

inline bool in_sphere(std::int64_t z, std::int64_t y, std::int64_t x, const std::array<double, 3>& c, double r) {
  const double dz = z - c[0], dy = y - c[1], dx = x - c[2];
  return dz * dz + dy * dy + dx * dx <= r * r;
}

inline Volume spheres_volume(Shape3 s, const std::vector<std::array<double, 3>>& centers, double r) {
  Volume v(s, 0.0f);
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x)
        for (const auto& c : centers)
          if (in_sphere(z, y, x, c, r)) v(z, y, x) = 1.0f;
  return v;
}

inline double sphere_iou(const LabelVolume& l, std::uint32_t id, const std::array<double, 3>& c, double r) {
  const Shape3 s = l.shape();
  std::int64_t inter = 0, a = 0, b = 0;
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const bool p = l(z, y, x) == id, q = in_sphere(z, y, x, c, r);
        inter += p && q;
        a += p;
        b += q;
      }
  return static_cast<double>(inter) / static_cast<double>(a + b - inter);
}

// Sum of Gaussian bumps: broadband but not white.
inline Volume blobs(Shape3 s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Volume v(s, 0.0f);
  for (int k = 0; k < 8; ++k) {
    const double cz = u(rng) * s.z, cy = u(rng) * s.y, cx = u(rng) * s.x;
    const double sig = 1.5 + 3.0 * u(rng);
    for (std::int64_t z = 0; z < s.z; ++z)
      for (std::int64_t y = 0; y < s.y; ++y)
        for (std::int64_t x = 0; x < s.x; ++x) {
          const double r2 = (z - cz) * (z - cz) / 4.0 + (y - cy) * (y - cy) + (x - cx) * (x - cx);
          v(z, y, x) += static_cast<float>(std::exp(-0.5 * r2 / (sig * sig)));
        }
  }
  return v;
}

inline Volume add_noise(Volume v, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sigma);
  for (auto& f : v) f = static_cast<float>(f + d(rng));
  return v;
}

}  // namespace spotlight::testing
