#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trgan {

/// Voxel counts per axis. `depth` is the transversal (sequence) axis.
struct GridDims {
  int width = 0;
  int height = 0;
  int depth = 0;

  std::size_t voxels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(depth);
  }
  std::size_t slice_voxels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  /// Slice-major: x fastest, then y, then slice t.
  std::size_t index(int x, int y, int t) const {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(width) * (static_cast<std::size_t>(y) +
           static_cast<std::size_t>(height) * static_cast<std::size_t>(t));
  }
  bool contains(int x, int y, int t) const {
    return x >= 0 && x < width && y >= 0 && y < height && t >= 0 && t < depth;
  }
  auto operator<=>(const GridDims&) const = default;
};

std::string to_string(const GridDims& g);

using VoxelSize = std::array<double, 3>;

/// Scalar volume in slice-major order.
struct Volume {
  GridDims dims;
  VoxelSize voxel_size_mm{1.0, 1.0, 1.0};
  std::vector<float> data;

  Volume() = default;
  Volume(GridDims d, VoxelSize vs, float fill = 0.0F) : dims(d), voxel_size_mm(vs), data(d.voxels(), fill) {}

  float& at(int x, int y, int t) { return data[dims.index(x, y, t)]; }
  float at(int x, int y, int t) const { return data[dims.index(x, y, t)]; }
  double voxel_volume_mm3() const { return voxel_size_mm[0] * voxel_size_mm[1] * voxel_size_mm[2]; }

  bool operator==(const Volume&) const = default;
};

/// Binary tumour labelling on the grid of a paired Volume.
struct Mask {
  GridDims dims;
  VoxelSize voxel_size_mm{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(GridDims d, VoxelSize vs) : dims(d), voxel_size_mm(vs), data(d.voxels(), 0) {}

  std::uint8_t& at(int x, int y, int t) { return data[dims.index(x, y, t)]; }
  std::uint8_t at(int x, int y, int t) const { return data[dims.index(x, y, t)]; }
  std::size_t count() const;
  bool empty_mask() const { return count() == 0; }

  bool operator==(const Mask&) const = default;
};

struct Sample {
  std::string id;
  Volume volume;
  Mask mask;
  std::optional<bool> member;

  bool operator==(const Sample&) const = default;
};

/// Throws ShapeError when the two grids differ.
void require_same_grid(const GridDims& a, const GridDims& b, const char* context);

/// Checks value/shape invariants: finite values, binary mask, matching grids.
/// Throws RangeError or ShapeError.
void validate(const Sample& s);

/// Affine map of [lo, hi] onto [-1, 1]. Values outside [lo, hi] are a RangeError.
Volume normalize(const Volume& volume, double lo, double hi);

struct DatasetSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> holdout_ids;
  std::uint64_t seed = 0;
};

/// Uniformly random, seed-deterministic train/holdout partition.
DatasetSplit split_dataset(std::span<const std::string> ids, int n_holdout, std::uint64_t seed);

}  // namespace trgan
