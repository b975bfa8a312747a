#pragma once

#include <span>
#include <vector>

#include "trgan/nn/tensor.hpp"
#include "trgan/volume.hpp"

namespace trgan {

/// Stacks volumes into [N, 1, D, H, W]; all grids must match.
nn::Tensor volumes_to_tensor(std::span<const Volume* const> volumes);
nn::Tensor masks_to_tensor(std::span<const Mask* const> masks);

nn::Tensor volume_to_tensor(const Volume& v);
nn::Tensor mask_to_tensor(const Mask& m);

/// Extracts item `n` of a [N, 1, D, H, W] tensor.
Volume tensor_to_volume(const nn::Tensor& t, int n, const GridDims& dims, const VoxelSize& vs);

}  // namespace trgan
