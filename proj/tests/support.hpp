#pragma once

// Shared helpers for the test suites: seeded generators and a central
// finite-difference oracle that never touches the analytic gradient code.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight::testing {

template <typename T = float>
Grid<T> random_grid(Shape3 s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Grid<T> g(s);
  for (auto& v : g) v = static_cast<T>(d(rng));
  return g;
}

inline MaskVolume random_mask(Shape3 s, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution d(p);
  MaskVolume m(s);
  for (auto& b : m) b = d(rng) ? 1 : 0;
  if (std::all_of(m.begin(), m.end(), [](auto b) { return b == 0; })) m[0] = 1;
  return m;
}

/// Central difference of f with respect to x[i].
inline double central_difference(const std::function<double()>& f, double& xi, double h) {
  const double saved = xi;
  xi = saved + h;
  const double plus = f();
  xi = saved - h;
  const double minus = f();
  xi = saved;
  return (plus - minus) / (2.0 * h);
}

/// Fourth-order central difference (points at +/-h and +/-2h).
inline double central_difference4(const std::function<double()>& f, double& xi, double h) {
  const double saved = xi;
  double v[4];
  const double offsets[4] = {2 * h, h, -h, -2 * h};
  for (int i = 0; i < 4; ++i) {
    xi = saved + offsets[i];
    v[i] = f();
  }
  xi = saved;
  return (-v[0] + 8 * v[1] - 8 * v[2] + v[3]) / (12.0 * h);
}

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("spotlight_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace spotlight::testing
