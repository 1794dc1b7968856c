#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

struct SegConfig {
  int clahe_tiles_y = 8;
  int clahe_tiles_x = 8;
  double clahe_clip = 0.01;
  double seed_min_distance = 6.0;  // half-scale voxels
  std::int64_t min_size = 268;     // full-scale voxel counts
  std::int64_t max_size = 17157;
  bool remove_edge_objects = true;

  void validate() const;
};

/// Contrast-limited adaptive equalization applied slice by slice. The volume
/// is first min-max normalized to [0, 1]; the output stays in [0, 1].
Volume clahe_slices(const Volume& v, int tiles_y, int tiles_x, double clip);

/// Half-scale Otsu + distance-transform watershed, labels returned at the
/// input shape. Extents must be even.
LabelVolume segment_watershed(const Volume& v, const SegConfig& cfg);

/// Edge removal, per-instance hole filling, size filter, compact relabeling.
LabelVolume postprocess(const LabelVolume& labels, const SegConfig& cfg);

/// segment_watershed followed by postprocess; an all-constant volume yields
/// no instances instead of an error.
LabelVolume segment_instances(const Volume& v, const SegConfig& cfg);

struct ApRow {
  double tau = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double ap = 0.0;
};

struct IouPair {
  std::uint32_t pred = 0, gt = 0;
  double iou = 0.0;
};

/// All (pred, gt) pairs with non-empty intersection.
std::vector<IouPair> iou_pairs(const LabelVolume& pred, const LabelVolume& gt);

std::vector<ApRow> average_precision(const LabelVolume& pred, const LabelVolume& gt,
                                     const std::vector<double>& taus);

struct InstanceFeatures {
  std::uint32_t label = 0;
  double volume = 0.0;
  double equivalent_diameter = 0.0;
  double surface_area = 0.0;
  double sphericity = 0.0;
  double extent = 0.0;
  std::array<double, 3> axis_lengths{};  // descending
  double elongation = 0.0;
  double mean_intensity = 0.0;
  double max_intensity = 0.0;

  static std::vector<std::string> names();
  std::vector<double> values() const;  // in names() order
};

std::vector<InstanceFeatures> extract_features(const LabelVolume& labels, const Volume& intensity);

/// 1 - cosine between the per-feature means of both lists.
double profile_distance(const std::vector<InstanceFeatures>& a,
                        const std::vector<InstanceFeatures>& b);

struct SweepRow {
  double threshold = 0.0;
  std::string metric;
  std::string scope;
  double value = 0.0;
};

/// Clamps pred below each threshold to its minimum, then segments and scores
/// against the ground truth: AP at 0.25/0.5/0.75, instance count, PSNR and SSIM.
std::vector<SweepRow> threshold_sweep(const Volume& pred, const std::vector<double>& thresholds,
                                      const LabelVolume& gt_labels, const Volume& gt_target,
                                      const SegConfig& cfg);

}  // namespace spotlight
