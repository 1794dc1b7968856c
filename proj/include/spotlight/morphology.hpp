#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

enum class Connectivity { Faces = 6, Full = 26 };

/// Connected components of the set voxels, labeled 1..n in raster order of
/// their first voxel.
LabelVolume connected_components(const MaskVolume& m, Connectivity conn = Connectivity::Faces);

/// Sets every background voxel that is not face-connected to the volume border.
MaskVolume fill_holes(const MaskVolume& m);

/// Exact Euclidean distance (in voxels) from each set voxel to the nearest
/// unset voxel; 0 on unset voxels. Outside the volume is not background, so a
/// fully set volume gets distances of +inf.
VolumeD distance_transform(const MaskVolume& m);

/// Max over the cube of half-width r (clipped at the faces).
VolumeD max_filter(const VolumeD& v, int r);

/// Seeds at distance-transform peaks: local maxima over a cube of half-width
/// min_distance, accepted greedily by descending height while at least
/// min_distance (Euclidean) from every accepted seed. Every mask component
/// that ends up without a seed receives one at its highest voxel.
/// Returns flat voxel indices in acceptance order.
std::vector<std::int64_t> find_seeds(const VolumeD& dist, const MaskVolume& m, double min_distance);

/// Marker-based watershed on `elevation`, flooding 6-connected mask voxels
/// from seeds (seed k gets label k + 1). Ties pop in insertion order.
LabelVolume watershed(const VolumeD& elevation, const std::vector<std::int64_t>& seeds,
                      const MaskVolume& m);

}  // namespace spotlight
