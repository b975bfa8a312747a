#pragma once

#include <cstdint>
#include <utility>

#include "trgan/volume.hpp"

namespace trgan {

using Range = std::pair<double, double>;

/// Parametric head-and-lesion phantom. Intensities are given directly in the
/// normalised [-1, 1] space; tumours are hot spots above the tissue range.
struct PhantomConfig {
  GridDims dims{16, 16, 8};
  VoxelSize voxel_size_mm{3.7, 3.7, 3.7};
  /// Head semi-axes as a fraction of the grid half-extent on each axis.
  Range head_semi_axes_fraction{0.7, 0.9};
  Range background_intensity{-1.0, -0.95};
  Range tissue_intensity{-0.7, -0.3};
  Range tumour_intensity{0.0, 0.9};
  /// Tumour semi-axes in millimetres.
  Range tumour_semi_axes_mm{4.0, 10.0};
  /// Tumour centres are drawn inside the head ellipsoid scaled by this factor.
  double placement_fraction = 0.6;
  /// Half-width of the uniform per-voxel noise.
  double noise_amplitude = 0.05;
  std::uint64_t seed = 0;
};

/// Throws ConfigError on any violated invariant.
void validate(const PhantomConfig& config);

/// "phantom-00042" style identifiers; lexicographic order equals index order.
std::string phantom_id(int index);

/// Deterministic in (config.seed, index).
Sample generate_phantom(const PhantomConfig& config, int index);

}  // namespace trgan
