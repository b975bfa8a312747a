#pragma once

#include "trgan/nn/params.hpp"

namespace trgan {

/// Caps every singular value of `weight`, viewed as a matrix of
/// dim(0) rows by (size / dim(0)) columns, at 1. Rank < 2 tensors are returned
/// unchanged, as are matrices whose largest singular value is already <= 1.
nn::Tensor singular_value_clip(const nn::Tensor& weight);

/// Applies the clip to every rank >= 2 parameter; biases are untouched.
/// Clipped values are rounded to binary32 like every stored parameter.
void singular_value_clip(nn::ParamStore& params);

}  // namespace trgan
