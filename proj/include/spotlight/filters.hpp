#pragma once

#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

/// Normalized 1D Gaussian taps over [-r, r], r = ceil(truncate * sigma).
/// sigma == 0 gives the single tap {1}.
std::vector<double> gaussian_kernel(double sigma, double truncate = 4.0);

enum class Boundary {
  Reflect,  // d c b a | a b c d | d c b a
  Zero,
};

/// Correlates one axis (0 = z, 1 = y, 2 = x) with a symmetric odd-length kernel.
VolumeD filter_axis(const VolumeD& v, int axis, const std::vector<double>& kernel,
                    Boundary boundary = Boundary::Reflect);

/// Separable anisotropic Gaussian blur; sigmas in voxels, Z, Y, X order.
VolumeD gaussian_blur(const VolumeD& v, Spacing3 sigma, double truncate = 4.0,
                      Boundary boundary = Boundary::Reflect);

/// Central-difference gradient magnitude, one-sided at the faces.
VolumeD gradient_magnitude(const VolumeD& v);

}  // namespace spotlight
