#pragma once

#include <limits>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

/// Raw and standardized intensity extremes of the combined training targets.
struct TargetRange {
  double raw_min = 0.0;
  double raw_max = 1.0;
  double std_min = 0.0;
  double std_max = 1.0;
};

/// Affine map sending std_min -> raw_min and std_max -> raw_max.
Volume rescale_to_target_range(const Volume& pred, const TargetRange& range);

/// 10 log10(R^2 / MSE), R = max(target) - min(target) over the whole volume.
/// With a mask the MSE runs over mask voxels only. MSE == 0 gives +inf.
double psnr(const Volume& pred, const Volume& target, const MaskVolume* mask = nullptr);

/// Mean local SSIM with a Gaussian window (sigma 1.5, truncated at 3 sigma).
/// Local moments are normalized-convolution averages over in-volume voxels,
/// or over mask voxels when a mask is given; the data range R is the joint
/// range of both volumes over the same voxels.
double ssim3d(const Volume& a, const Volume& b, const MaskVolume* mask = nullptr);

struct FrcResult {
  std::vector<double> frequency;  // cycles per pixel, ring centers
  std::vector<double> curve;      // slice-averaged correlation per ring
  bool correlated = true;         // false when the first ring is already below threshold
  double resolution_px = std::numeric_limits<double>::infinity();
};

inline constexpr double kFrcThreshold = 1.0 / 7.0;

/// Slice-wise Fourier ring correlation. Each z-slice is mean-subtracted,
/// Tukey-tapered and zero-padded to a common square before the transform;
/// rings are bin_delta frequency samples wide.
FrcResult frc(const Volume& a, const Volume& b, int bin_delta = 5);

/// Resolution in pixels: 2.0 when the curve never drops below the threshold,
/// +inf when it starts below (no correlation).
double frc_resolution(const Volume& a, const Volume& b, int bin_delta = 5);

}  // namespace spotlight
