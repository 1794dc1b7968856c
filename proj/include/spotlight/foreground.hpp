#pragma once

#include <utility>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

struct OtsuResult {
  double threshold = 0.0;
  std::vector<double> bin_edges;              // nbins + 1 monotone values over [min, max]
  std::vector<double> inter_class_variance;   // one score per candidate cut, cut c -> bin_edges[c]
};

/// Histogram Otsu threshold. The threshold is the lower edge of the first bin
/// of the upper class; ties resolve to the smallest edge.
OtsuResult otsu_threshold(const Volume& v, int nbins = 256);

/// Bit set where v >= t.
MaskVolume foreground_mask(const Volume& v, double t);

double fg_fraction(const MaskVolume& m);
std::int64_t count_set(const MaskVolume& m);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};
MeanStd mean_std(const Volume& v);

struct Standardized {
  Volume volume;
  double scale = 1.0;  // sigma used for the division
};

/// (v - center) / sigma with sigma the population standard deviation of v.
Standardized standardize(const Volume& v, double center);

}  // namespace spotlight
