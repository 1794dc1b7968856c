#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

struct PhantomConfig {
  Shape3 shape{48, 128, 128};
  int n_nuclei = 8;
  double radius_min = 6.0;  // semi-axis range, voxels
  double radius_max = 12.0;
  double axial_elongation_sigma_ratio = 3.0;  // PSF sigma_z / sigma_xy
  double psf_sigma_xy = 1.0;
  double bg_noise_sigma = 0.05;
  double bg_gradient_amplitude = 0.1;
  double fg_intensity = 1.0;
  double input_noise_sigma = 0.05;
  // Fraction of fg_intensity lost from center to rim; the profile is
  // fg * (1 - falloff * q) with q the squared normalized ellipsoid radius.
  double falloff = 0.5;
  int max_placement_attempts = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Ellipsoid {
  std::array<double, 3> center{};   // z, y, x
  std::array<double, 3> semi_axes{};
  std::array<double, 9> rotation{};  // row-major, columns are the body axes in zyx
  double volume() const;
  /// Squared normalized radius of point p; <= 1 inside.
  double q(double z, double y, double x) const;
};

struct SynthSample {
  Volume input;
  Volume target;
  LabelVolume labels;
  std::vector<Ellipsoid> nuclei;  // nuclei[i] carries label i + 1
};

SynthSample generate_phantom(const PhantomConfig& cfg);

}  // namespace spotlight
