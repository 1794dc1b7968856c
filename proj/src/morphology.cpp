#include "spotlight/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

namespace spotlight {

namespace {

// Neighbour offsets of a voxel, skipping those outside the volume.
template <typename F>
void for_neighbours(const Shape3& s, std::int64_t i, Connectivity conn, F&& f) {
  const std::int64_t z = i / (s.y * s.x), y = (i / s.x) % s.y, x = i % s.x;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int order = std::abs(dz) + std::abs(dy) + std::abs(dx);
        if (order == 0 || (conn == Connectivity::Faces && order != 1)) continue;
        const std::int64_t zz = z + dz, yy = y + dy, xx = x + dx;
        if (zz < 0 || yy < 0 || xx < 0 || zz >= s.z || yy >= s.y || xx >= s.x) continue;
        f((zz * s.y + yy) * s.x + xx);
      }
}

// 1D squared distance transform of sampled function f (lower envelope of parabolas).
void edt_1d(const double* f, double* d, std::int64_t n, std::vector<std::int64_t>& v,
            std::vector<double>& zb) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.resize(n);
  zb.resize(n + 1);
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      zb[0] = -inf;
      zb[1] = inf;
      continue;
    }
    double s;
    while (true) {
      const std::int64_t p = v[k];
      s = ((f[q] + static_cast<double>(q * q)) - (f[p] + static_cast<double>(p * p))) / (2.0 * (q - p));
      if (s <= zb[k]) {
        if (--k < 0) break;
      } else {
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      zb[0] = -inf;
      zb[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    zb[k] = s;
    zb[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d, d + n, inf);
    return;
  }
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (zb[j + 1] < q) ++j;
    const double dq = static_cast<double>(q - v[j]);
    d[q] = dq * dq + f[v[j]];
  }
}

void edt_axis(VolumeD& g, int axis) {
  const Shape3 s = g.shape();
  const std::int64_t len = axis == 0 ? s.z : axis == 1 ? s.y : s.x;
  const std::int64_t stride = axis == 0 ? s.y * s.x : axis == 1 ? s.x : 1;
  const std::int64_t lines = s.voxels() / len;
  std::vector<double> f(len), d(len), zb;
  std::vector<std::int64_t> v;
  for (std::int64_t l = 0; l < lines; ++l) {
    std::int64_t base;
    if (axis == 2) {
      base = l * s.x;
    } else if (axis == 1) {
      base = (l / s.x) * s.y * s.x + l % s.x;
    } else {
      base = l;
    }
    for (std::int64_t i = 0; i < len; ++i) f[i] = g[base + i * stride];
    edt_1d(f.data(), d.data(), len, v, zb);
    for (std::int64_t i = 0; i < len; ++i) g[base + i * stride] = d[i];
  }
}

}  // namespace

LabelVolume connected_components(const MaskVolume& m, Connectivity conn) {
  const Shape3 s = m.shape();
  LabelVolume out(s, 0u, m.voxel_size());
  std::uint32_t next = 0;
  std::deque<std::int64_t> queue;
  for (std::int64_t start = 0; start < s.voxels(); ++start) {
    if (!m[start] || out[start]) continue;
    out[start] = ++next;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::int64_t i = queue.front();
      queue.pop_front();
      for_neighbours(s, i, conn, [&](std::int64_t j) {
        if (m[j] && !out[j]) {
          out[j] = next;
          queue.push_back(j);
        }
      });
    }
  }
  return out;
}

MaskVolume fill_holes(const MaskVolume& m) {
  const Shape3 s = m.shape();
  std::vector<char> outside(m.size(), 0);
  std::deque<std::int64_t> queue;
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const bool border = z == 0 || y == 0 || x == 0 || z == s.z - 1 || y == s.y - 1 || x == s.x - 1;
        const std::int64_t i = m.index(z, y, x);
        if (border && !m[i]) {
          outside[i] = 1;
          queue.push_back(i);
        }
      }
  while (!queue.empty()) {
    const std::int64_t i = queue.front();
    queue.pop_front();
    for_neighbours(s, i, Connectivity::Faces, [&](std::int64_t j) {
      if (!m[j] && !outside[j]) {
        outside[j] = 1;
        queue.push_back(j);
      }
    });
  }
  MaskVolume out(s, 0, m.voxel_size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] || !outside[i]) ? 1 : 0;
  return out;
}

VolumeD distance_transform(const MaskVolume& m) {
  VolumeD g(m.shape(), 0.0, m.voxel_size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    g[i] = m[i] ? std::numeric_limits<double>::infinity() : 0.0;
  }
  for (int axis = 0; axis < 3; ++axis) edt_axis(g, axis);
  for (auto& v : g) v = std::sqrt(v);
  return g;
}

VolumeD max_filter(const VolumeD& v, int r) {
  const Shape3 s = v.shape();
  VolumeD cur = v;
  for (int axis = 0; axis < 3; ++axis) {
    const std::int64_t len = axis == 0 ? s.z : axis == 1 ? s.y : s.x;
    const std::int64_t stride = axis == 0 ? s.y * s.x : axis == 1 ? s.x : 1;
    VolumeD next(s, 0.0, v.voxel_size());
    const std::int64_t lines = s.voxels() / len;
    for (std::int64_t l = 0; l < lines; ++l) {
      std::int64_t base;
      if (axis == 2) {
        base = l * s.x;
      } else if (axis == 1) {
        base = (l / s.x) * s.y * s.x + l % s.x;
      } else {
        base = l;
      }
      for (std::int64_t i = 0; i < len; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        const std::int64_t lo = std::max<std::int64_t>(0, i - r), hi = std::min(len - 1, i + r);
        for (std::int64_t j = lo; j <= hi; ++j) best = std::max(best, cur[base + j * stride]);
        next[base + i * stride] = best;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<std::int64_t> find_seeds(const VolumeD& dist, const MaskVolume& m, double min_distance) {
  require_same_shape(dist, m, "find_seeds");
  const Shape3 s = m.shape();
  const int r = std::max(1, static_cast<int>(std::floor(min_distance)));
  const VolumeD peaks = max_filter(dist, r);
  std::vector<std::int64_t> candidates;
  for (std::int64_t i = 0; i < s.voxels(); ++i) {
    if (m[i] && dist[i] > 0.0 && dist[i] == peaks[i]) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::int64_t a, std::int64_t b) { return dist[a] > dist[b]; });

  auto coords = [&](std::int64_t i) {
    return std::array<double, 3>{static_cast<double>(i / (s.y * s.x)),
                                 static_cast<double>((i / s.x) % s.y),
                                 static_cast<double>(i % s.x)};
  };
  std::vector<std::int64_t> seeds;
  std::vector<std::array<double, 3>> seed_xyz;
  const double min2 = min_distance * min_distance;
  for (std::int64_t c : candidates) {
    const auto p = coords(c);
    bool far = true;
    for (const auto& q : seed_xyz) {
      const double d2 = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                        (p[2] - q[2]) * (p[2] - q[2]);
      if (d2 < min2) {
        far = false;
        break;
      }
    }
    if (!far) continue;
    seeds.push_back(c);
    seed_xyz.push_back(p);
  }

  // Components left without a seed get one at their highest voxel.
  const LabelVolume comp = connected_components(m, Connectivity::Faces);
  std::uint32_t ncomp = 0;
  for (auto c : comp) ncomp = std::max(ncomp, c);
  std::vector<char> seeded(ncomp + 1, 0);
  for (std::int64_t sidx : seeds) seeded[comp[sidx]] = 1;
  std::vector<std::int64_t> best(ncomp + 1, -1);
  for (std::int64_t i = 0; i < s.voxels(); ++i) {
    const auto c = comp[i];
    if (!c || seeded[c]) continue;
    if (best[c] < 0 || dist[i] > dist[best[c]]) best[c] = i;
  }
  for (std::uint32_t c = 1; c <= ncomp; ++c) {
    if (best[c] >= 0) seeds.push_back(best[c]);
  }
  return seeds;
}

LabelVolume watershed(const VolumeD& elevation, const std::vector<std::int64_t>& seeds,
                      const MaskVolume& m) {
  require_same_shape(elevation, m, "watershed");
  const Shape3 s = m.shape();
  LabelVolume labels(s, 0u, m.voxel_size());
  using Item = std::tuple<double, std::uint64_t, std::int64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  std::uint64_t age = 0;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const std::int64_t i = seeds[k];
    if (!m[i] || labels[i]) continue;
    labels[i] = static_cast<std::uint32_t>(k + 1);
    heap.emplace(elevation[i], age++, i);
  }
  while (!heap.empty()) {
    const auto [h, a, i] = heap.top();
    heap.pop();
    for_neighbours(s, i, Connectivity::Faces, [&](std::int64_t j) {
      if (!m[j] || labels[j]) return;
      labels[j] = labels[i];
      heap.emplace(std::max(elevation[j], h), age++, j);
    });
  }
  return labels;
}

}  // namespace spotlight
