#include "spotlight/segeval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spotlight/foreground.hpp"
#include "spotlight/metrics.hpp"
#include "spotlight/morphology.hpp"

namespace spotlight {

void SegConfig::validate() const {
  if (clahe_tiles_y < 1 || clahe_tiles_x < 1) {
    throw Error(ErrorCode::InvalidConfig, "CLAHE tile counts must be >= 1");
  }
  if (!(clahe_clip > 0.0)) throw Error(ErrorCode::InvalidConfig, "CLAHE clip must be > 0");
  if (!(seed_min_distance >= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "seed_min_distance must be >= 1");
  }
  if (min_size < 1 || max_size < 1 || min_size >= max_size) {
    throw Error(ErrorCode::InvalidConfig, "size bounds must be positive with min_size < max_size");
  }
}

namespace {

constexpr int kClaheBins = 256;

struct TileAxis {
  std::vector<std::int64_t> start;  // tiles + 1 boundaries
  std::vector<double> center;
};

TileAxis tile_axis(std::int64_t len, int tiles) {
  TileAxis a;
  for (int i = 0; i <= tiles; ++i) a.start.push_back(i * len / tiles);
  for (int i = 0; i < tiles; ++i) a.center.push_back(0.5 * (a.start[i] + a.start[i + 1] - 1));
  return a;
}

// Lower tile index and weight of the upper neighbour for coordinate p.
std::pair<int, double> locate(const TileAxis& a, std::int64_t p) {
  const int n = static_cast<int>(a.center.size());
  if (p <= a.center.front()) return {0, 0.0};
  if (p >= a.center.back()) return {n - 1, 0.0};
  int i = 0;
  while (a.center[i + 1] <= p) ++i;
  return {i, (p - a.center[i]) / (a.center[i + 1] - a.center[i])};
}

int bin_of(double u) { return std::clamp(static_cast<int>(u * kClaheBins), 0, kClaheBins - 1); }

}  // namespace

Volume clahe_slices(const Volume& v, int tiles_y, int tiles_x, double clip) {
  const Shape3 s = v.shape();
  if (tiles_y < 1 || tiles_x < 1 || s.y < tiles_y || s.x < tiles_x) {
    throw Error(ErrorCode::InvalidConfig, "CLAHE tiles " + std::to_string(tiles_y) + "x" +
                                              std::to_string(tiles_x) + " do not fit slice " +
                                              to_string(s));
  }
  Volume out(s, 0.0f, v.voxel_size());
  if (v.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, range = static_cast<double>(*hi_it) - lo;
  if (range <= 0.0) return out;

  const TileAxis ay = tile_axis(s.y, tiles_y), ax = tile_axis(s.x, tiles_x);
  const std::int64_t plane = s.y * s.x;
  std::vector<double> u(plane);
  std::vector<double> maps(static_cast<std::size_t>(tiles_y) * tiles_x * kClaheBins);

  for (std::int64_t z = 0; z < s.z; ++z) {
    const float* src = v.data().data() + z * plane;
    float* dst = out.data().data() + z * plane;
    for (std::int64_t i = 0; i < plane; ++i) u[i] = (src[i] - lo) / range;
    const auto [smin, smax] = std::minmax_element(u.begin(), u.end());
    if (*smin == *smax) {
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(u[i]);
      continue;
    }
    for (int ty = 0; ty < tiles_y; ++ty)
      for (int tx = 0; tx < tiles_x; ++tx) {
        double* h = maps.data() + (static_cast<std::size_t>(ty) * tiles_x + tx) * kClaheBins;
        std::fill(h, h + kClaheBins, 0.0);
        for (std::int64_t y = ay.start[ty]; y < ay.start[ty + 1]; ++y)
          for (std::int64_t x = ax.start[tx]; x < ax.start[tx + 1]; ++x) h[bin_of(u[y * s.x + x])] += 1.0;
        const double count = static_cast<double>((ay.start[ty + 1] - ay.start[ty]) *
                                                 (ax.start[tx + 1] - ax.start[tx]));
        const double limit = clip * count;
        double excess = 0.0;
        for (int b = 0; b < kClaheBins; ++b) {
          if (h[b] > limit) {
            excess += h[b] - limit;
            h[b] = limit;
          }
        }
        const double share = excess / kClaheBins;
        double cum = 0.0;
        for (int b = 0; b < kClaheBins; ++b) {
          cum += h[b] + share;
          h[b] = cum / count;
        }
      }
    for (std::int64_t y = 0; y < s.y; ++y) {
      const auto [iy, wy] = locate(ay, y);
      const int iy1 = std::min(iy + 1, tiles_y - 1);
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto [ix, wx] = locate(ax, x);
        const int ix1 = std::min(ix + 1, tiles_x - 1);
        const int b = bin_of(u[y * s.x + x]);
        auto m = [&](int ty, int tx) {
          return maps[(static_cast<std::size_t>(ty) * tiles_x + tx) * kClaheBins + b];
        };
        const double val = (1 - wy) * ((1 - wx) * m(iy, ix) + wx * m(iy, ix1)) +
                           wy * ((1 - wx) * m(iy1, ix) + wx * m(iy1, ix1));
        dst[y * s.x + x] = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  return out;
}

namespace {

bool is_constant(const Volume& v) {
  return v.empty() || std::all_of(v.begin(), v.end(), [&](float x) { return x == v[0]; });
}

}  // namespace

LabelVolume segment_watershed(const Volume& v, const SegConfig& cfg) {
  cfg.validate();
  if (is_constant(v)) throw Error(ErrorCode::ConstantImage, "segment_watershed: constant volume");
  const Volume half = downscale_half(v);
  const Volume eq = clahe_slices(half, cfg.clahe_tiles_y, cfg.clahe_tiles_x, cfg.clahe_clip);
  LabelVolume empty(v.shape(), 0u, v.voxel_size());
  if (is_constant(eq)) return empty;
  const double t = otsu_threshold(eq).threshold;
  const MaskVolume mask = fill_holes(foreground_mask(eq, t));
  const VolumeD dist = distance_transform(mask);
  const auto seeds = find_seeds(dist, mask, cfg.seed_min_distance);
  VolumeD elevation = dist;
  for (auto& e : elevation) e = -e;
  LabelVolume labels = upsample_double(watershed(elevation, seeds, mask));
  labels.set_voxel_size(v.voxel_size());
  return labels;
}

namespace {

struct Box {
  std::int64_t z0, y0, x0, z1, y1, x1;  // inclusive
  std::int64_t count = 0;
};

std::vector<Box> label_boxes(const LabelVolume& l, std::uint32_t& max_label) {
  max_label = 0;
  for (auto v : l) max_label = std::max(max_label, v);
  constexpr auto big = std::numeric_limits<std::int64_t>::max();
  std::vector<Box> boxes(max_label + 1, Box{big, big, big, -1, -1, -1, 0});
  const Shape3 s = l.shape();
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const auto id = l(z, y, x);
        if (!id) continue;
        Box& b = boxes[id];
        b.z0 = std::min(b.z0, z), b.y0 = std::min(b.y0, y), b.x0 = std::min(b.x0, x);
        b.z1 = std::max(b.z1, z), b.y1 = std::max(b.y1, y), b.x1 = std::max(b.x1, x);
        ++b.count;
      }
  return boxes;
}

void remove_labels(LabelVolume& l, const std::vector<char>& drop) {
  for (auto& v : l)
    if (v && drop[v]) v = 0;
}

// Fills enclosed cavities of one instance; only unlabeled voxels change.
void fill_instance(LabelVolume& l, std::uint32_t id, const Box& b) {
  const Shape3 s = l.shape();
  const std::int64_t z0 = std::max<std::int64_t>(0, b.z0 - 1), z1 = std::min(s.z - 1, b.z1 + 1);
  const std::int64_t y0 = std::max<std::int64_t>(0, b.y0 - 1), y1 = std::min(s.y - 1, b.y1 + 1);
  const std::int64_t x0 = std::max<std::int64_t>(0, b.x0 - 1), x1 = std::min(s.x - 1, b.x1 + 1);
  const Shape3 sub{z1 - z0 + 1, y1 - y0 + 1, x1 - x0 + 1};
  MaskVolume m(sub);
  for (std::int64_t z = 0; z < sub.z; ++z)
    for (std::int64_t y = 0; y < sub.y; ++y)
      for (std::int64_t x = 0; x < sub.x; ++x) m(z, y, x) = l(z0 + z, y0 + y, x0 + x) == id;
  const MaskVolume filled = fill_holes(m);
  for (std::int64_t z = 0; z < sub.z; ++z)
    for (std::int64_t y = 0; y < sub.y; ++y)
      for (std::int64_t x = 0; x < sub.x; ++x) {
        auto& dst = l(z0 + z, y0 + y, x0 + x);
        if (filled(z, y, x) && dst == 0) dst = id;
      }
}

bool postprocess_pass(LabelVolume& l, const SegConfig& cfg) {
  const Shape3 s = l.shape();
  std::uint32_t max_label = 0;
  auto boxes = label_boxes(l, max_label);
  std::vector<char> drop(max_label + 1, 0);
  bool changed = false;
  if (cfg.remove_edge_objects) {
    for (std::uint32_t id = 1; id <= max_label; ++id) {
      const Box& b = boxes[id];
      if (b.count == 0) continue;
      if (b.z0 == 0 || b.y0 == 0 || b.x0 == 0 || b.z1 == s.z - 1 || b.y1 == s.y - 1 || b.x1 == s.x - 1) {
        drop[id] = 1;
        changed = true;
      }
    }
    remove_labels(l, drop);
  }
  const LabelVolume before = l;
  for (std::uint32_t id = 1; id <= max_label; ++id) {
    if (boxes[id].count > 0 && !drop[id]) fill_instance(l, id, boxes[id]);
  }
  if (!(l == before)) changed = true;
  std::vector<std::int64_t> counts(max_label + 1, 0);
  for (auto v : l) ++counts[v];
  for (std::uint32_t id = 1; id <= max_label; ++id) {
    if (counts[id] > 0 && (counts[id] < cfg.min_size || counts[id] > cfg.max_size)) {
      drop[id] = 1;
      changed = true;
    }
  }
  remove_labels(l, drop);
  return changed;
}

}  // namespace

LabelVolume postprocess(const LabelVolume& labels, const SegConfig& cfg) {
  cfg.validate();
  LabelVolume l = labels;
  // Removing an instance can open up a cavity of another; repeat until stable.
  while (postprocess_pass(l, cfg)) {
  }
  std::uint32_t max_label = 0;
  for (auto v : l) max_label = std::max(max_label, v);
  std::vector<std::uint32_t> remap(max_label + 1, 0);
  for (auto v : l) remap[v] = 1;
  remap[0] = 0;
  std::uint32_t next = 0;
  for (std::uint32_t id = 1; id <= max_label; ++id) remap[id] = remap[id] ? ++next : 0;
  for (auto& v : l) v = remap[v];
  return l;
}

LabelVolume segment_instances(const Volume& v, const SegConfig& cfg) {
  if (is_constant(v)) return LabelVolume(v.shape(), 0u, v.voxel_size());
  return postprocess(segment_watershed(v, cfg), cfg);
}

std::vector<IouPair> iou_pairs(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_shape(pred, gt, "iou_pairs");
  std::vector<std::uint64_t> keys;
  std::vector<std::int64_t> pred_size, gt_size;
  auto bump = [](std::vector<std::int64_t>& c, std::uint32_t id) {
    if (c.size() <= id) c.resize(id + 1, 0);
    ++c[id];
  };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i]) bump(pred_size, pred[i]);
    if (gt[i]) bump(gt_size, gt[i]);
    if (pred[i] && gt[i]) keys.push_back((std::uint64_t{pred[i]} << 32) | gt[i]);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<IouPair> out;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    const auto p = static_cast<std::uint32_t>(keys[i] >> 32), g = static_cast<std::uint32_t>(keys[i]);
    const double inter = static_cast<double>(j - i);
    out.push_back({p, g, inter / (pred_size[p] + gt_size[g] - inter)});
    i = j;
  }
  return out;
}

namespace {

std::int64_t distinct_labels(const LabelVolume& l) {
  std::vector<std::uint32_t> ids;
  for (auto v : l)
    if (v) ids.push_back(v);
  std::sort(ids.begin(), ids.end());
  return std::unique(ids.begin(), ids.end()) - ids.begin();
}

}  // namespace

std::vector<ApRow> average_precision(const LabelVolume& pred, const LabelVolume& gt,
                                     const std::vector<double>& taus) {
  auto pairs = iou_pairs(pred, gt);
  std::sort(pairs.begin(), pairs.end(), [](const IouPair& a, const IouPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  const std::int64_t np = distinct_labels(pred), ng = distinct_labels(gt);
  std::vector<ApRow> rows;
  for (double tau : taus) {
    std::vector<std::uint32_t> used_p, used_g;
    std::int64_t tp = 0;
    for (const auto& pr : pairs) {
      if (pr.iou < tau) break;
      if (std::find(used_p.begin(), used_p.end(), pr.pred) != used_p.end()) continue;
      if (std::find(used_g.begin(), used_g.end(), pr.gt) != used_g.end()) continue;
      used_p.push_back(pr.pred);
      used_g.push_back(pr.gt);
      ++tp;
    }
    ApRow r{tau, tp, np - tp, ng - tp, 0.0};
    const std::int64_t denom = r.tp + r.fp + r.fn;
    r.ap = denom == 0 ? 1.0 : static_cast<double>(r.tp) / static_cast<double>(denom);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace spotlight
