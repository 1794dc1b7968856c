#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "spotlight/metrics.hpp"
#include "spotlight/segeval.hpp"

namespace spotlight {

std::vector<std::string> InstanceFeatures::names() {
  return {"volume",      "equivalent_diameter", "surface_area", "sphericity",
          "extent",      "axis_major",          "axis_middle",  "axis_minor",
          "elongation",  "mean_intensity",      "max_intensity"};
}

std::vector<double> InstanceFeatures::values() const {
  return {volume,          equivalent_diameter, surface_area,    sphericity,
          extent,          axis_lengths[0],     axis_lengths[1], axis_lengths[2],
          elongation,      mean_intensity,      max_intensity};
}

namespace {

struct Accum {
  std::int64_t count = 0;
  std::int64_t faces = 0;
  std::int64_t lo[3] = {std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
                        std::numeric_limits<std::int64_t>::max()};
  std::int64_t hi[3] = {-1, -1, -1};
  double sum[3] = {0, 0, 0};
  double intensity_sum = 0.0;
  double intensity_max = -std::numeric_limits<double>::infinity();
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
};

}  // namespace

std::vector<InstanceFeatures> extract_features(const LabelVolume& labels, const Volume& intensity) {
  require_same_shape(labels, intensity, "extract_features");
  const Shape3 s = labels.shape();
  std::uint32_t max_label = 0;
  for (auto v : labels) max_label = std::max(max_label, v);
  std::vector<Accum> acc(max_label + 1);

  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const std::uint32_t id = labels(z, y, x);
        if (!id) continue;
        Accum& a = acc[id];
        const std::int64_t c[3] = {z, y, x};
        ++a.count;
        for (int k = 0; k < 3; ++k) {
          a.lo[k] = std::min(a.lo[k], c[k]);
          a.hi[k] = std::max(a.hi[k], c[k]);
          a.sum[k] += static_cast<double>(c[k]);
        }
        const double val = intensity(z, y, x);
        a.intensity_sum += val;
        a.intensity_max = std::max(a.intensity_max, val);
        auto other = [&](std::int64_t zz, std::int64_t yy, std::int64_t xx) {
          if (zz < 0 || yy < 0 || xx < 0 || zz >= s.z || yy >= s.y || xx >= s.x) return true;
          return labels(zz, yy, xx) != id;
        };
        a.faces += other(z - 1, y, x) + other(z + 1, y, x) + other(z, y - 1, x) +
                   other(z, y + 1, x) + other(z, y, x - 1) + other(z, y, x + 1);
      }

  // Second pass for the centered scatter matrix.
  for (std::int64_t z = 0; z < s.z; ++z)
    for (std::int64_t y = 0; y < s.y; ++y)
      for (std::int64_t x = 0; x < s.x; ++x) {
        const std::uint32_t id = labels(z, y, x);
        if (!id) continue;
        Accum& a = acc[id];
        const double n = static_cast<double>(a.count);
        const Eigen::Vector3d d(z - a.sum[0] / n, y - a.sum[1] / n, x - a.sum[2] / n);
        a.scatter += d * d.transpose();
      }

  std::vector<InstanceFeatures> out;
  for (std::uint32_t id = 1; id <= max_label; ++id) {
    const Accum& a = acc[id];
    if (a.count == 0) continue;
    InstanceFeatures f;
    f.label = id;
    f.volume = static_cast<double>(a.count);
    f.equivalent_diameter = std::cbrt(6.0 * f.volume / std::numbers::pi);
    f.surface_area = static_cast<double>(a.faces);
    f.sphericity = std::cbrt(std::numbers::pi) * std::pow(6.0 * f.volume, 2.0 / 3.0) / f.surface_area;
    double box = 1.0;
    for (int k = 0; k < 3; ++k) box *= static_cast<double>(a.hi[k] - a.lo[k] + 1);
    f.extent = f.volume / box;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a.scatter / f.volume);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    for (int k = 0; k < 3; ++k) f.axis_lengths[k] = 2.0 * std::sqrt(std::max(0.0, ev[2 - k]));
    const double major = f.axis_lengths[0], minor = f.axis_lengths[2];
    if (minor > 0.0) {
      f.elongation = major / minor;
    } else {
      f.elongation = major > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    f.mean_intensity = a.intensity_sum / f.volume;
    f.max_intensity = a.intensity_max;
    out.push_back(f);
  }
  return out;
}

namespace {

std::vector<double> mean_profile(const std::vector<InstanceFeatures>& fs) {
  if (fs.empty()) throw Error(ErrorCode::EmptyProfile, "profile_distance: no instances");
  std::vector<double> m(InstanceFeatures::names().size(), 0.0);
  for (const auto& f : fs) {
    const auto v = f.values();
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += v[k];
  }
  for (auto& v : m) {
    v /= static_cast<double>(fs.size());
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericFailure, "profile_distance: non-finite feature mean");
  }
  return m;
}

}  // namespace

double profile_distance(const std::vector<InstanceFeatures>& a, const std::vector<InstanceFeatures>& b) {
  const auto pa = mean_profile(a), pb = mean_profile(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    dot += pa[k] * pb[k];
    na += pa[k] * pa[k];
    nb += pb[k] * pb[k];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::ZeroProfile, "profile_distance: zero-norm profile");
  return 1.0 - std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::vector<SweepRow> threshold_sweep(const Volume& pred, const std::vector<double>& thresholds,
                                      const LabelVolume& gt_labels, const Volume& gt_target,
                                      const SegConfig& cfg) {
  require_same_shape(pred, gt_labels, "threshold_sweep");
  require_same_shape(pred, gt_target, "threshold_sweep");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(ErrorCode::InvalidConfig, "threshold_sweep: thresholds must be ascending");
  }
  const float floor = pred.empty() ? 0.0f : *std::min_element(pred.begin(), pred.end());
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    Volume p = pred;
    for (auto& v : p)
      if (v < t) v = floor;
    const LabelVolume labels = segment_instances(p, cfg);
    const auto ap = average_precision(labels, gt_labels, {0.25, 0.5, 0.75});
    rows.push_back({t, "ap_0.25", "instances", ap[0].ap});
    rows.push_back({t, "ap_0.5", "instances", ap[1].ap});
    rows.push_back({t, "ap_0.75", "instances", ap[2].ap});
    rows.push_back({t, "count", "instances", static_cast<double>(ap[1].tp + ap[1].fp)});
    rows.push_back({t, "psnr", "whole", psnr(p, gt_target)});
    rows.push_back({t, "ssim", "whole", ssim3d(p, gt_target)});
  }
  return rows;
}

}  // namespace spotlight
