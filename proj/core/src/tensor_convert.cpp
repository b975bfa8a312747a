#include "trgan/tensor_convert.hpp"

#include "trgan/errors.hpp"

namespace trgan {

namespace {

nn::Shape batch_shape(int n, const GridDims& g) { return {n, 1, g.depth, g.height, g.width}; }

}  // namespace

nn::Tensor volumes_to_tensor(std::span<const Volume* const> volumes) {
  if (volumes.empty()) throw ShapeError("volumes_to_tensor: empty batch");
  const GridDims g = volumes.front()->dims;
  nn::Tensor t(batch_shape(static_cast<int>(volumes.size()), g));
  double* dst = t.ptr();
  for (const Volume* v : volumes) {
    require_same_grid(g, v->dims, "volumes_to_tensor");
    for (float f : v->data) *dst++ = f;
  }
  return t;
}

nn::Tensor masks_to_tensor(std::span<const Mask* const> masks) {
  if (masks.empty()) throw ShapeError("masks_to_tensor: empty batch");
  const GridDims g = masks.front()->dims;
  nn::Tensor t(batch_shape(static_cast<int>(masks.size()), g));
  double* dst = t.ptr();
  for (const Mask* m : masks) {
    require_same_grid(g, m->dims, "masks_to_tensor");
    for (std::uint8_t b : m->data) *dst++ = b ? 1.0 : 0.0;
  }
  return t;
}

nn::Tensor volume_to_tensor(const Volume& v) {
  const Volume* p = &v;
  return volumes_to_tensor(std::span<const Volume* const>(&p, 1));
}

nn::Tensor mask_to_tensor(const Mask& m) {
  const Mask* p = &m;
  return masks_to_tensor(std::span<const Mask* const>(&p, 1));
}

Volume tensor_to_volume(const nn::Tensor& t, int n, const GridDims& dims, const VoxelSize& vs) {
  if (t.rank() != 5 || t.dim(1) != 1 || t.dim(2) != dims.depth || t.dim(3) != dims.height ||
      t.dim(4) != dims.width || n < 0 || n >= t.dim(0)) {
    throw ShapeError("tensor_to_volume: tensor " + nn::shape_string(t.shape()) + " does not hold grid " +
                     to_string(dims));
  }
  Volume v(dims, vs);
  const double* src = t.ptr() + static_cast<std::ptrdiff_t>(n) * dims.voxels();
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<float>(src[i]);
  return v;
}

}  // namespace trgan
