#pragma once

#include <array>

#include "trgan/nn/autograd.hpp"

namespace trgan::nn {

// Elementwise arithmetic on equal shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var sqrt(const Var& x);

Var reshape(const Var& x, Shape shape);

/// x [N, in] * W[out, in]^T + b[out]. `b` may be null.
Var linear(const Var& x, const Var& w, const Var& b);

struct ConvSpec {
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> pad{0, 0, 0};
};

/// 3-D convolution. x [N, Cin, D, H, W], w [Cout, Cin, kd, kh, kw], b [Cout] or null.
/// Lower-rank convolutions are expressed with singleton spatial dims.
Var conv3d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec);

/// Transposed 3-D convolution (gradient of conv3d w.r.t. its input).
/// x [N, Cin, D, H, W], w [Cin, Cout, kd, kh, kw], b [Cout] or null.
/// Output extent per axis: (in - 1) * stride - 2 * pad + k.
Var conv_transpose3d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec);

/// Concatenates [N, Ca, ...] and [N, Cb, ...] along axis 1.
Var concat_channels(const Var& a, const Var& b);

/// [N, C, L] -> [N * L, C]: sequence positions become batch rows.
Var sequence_to_rows(const Var& x);
/// [N, F] -> [N * times, F], each row repeated `times` times consecutively.
Var repeat_rows(const Var& x, int times);

Var sum(const Var& x);
Var mean(const Var& x);
/// [N, ...] -> [N]
Var sum_per_sample(const Var& x);
/// [N, ...] -> [N], Euclidean norm of each sample.
Var l2_per_sample(const Var& x);

/// [N, C, ...] -> [N, C] spatial mean.
Var global_avg_pool(const Var& x);
/// Per (n, c) normalisation to zero mean and unit variance over spatial dims.
Var instance_norm(const Var& x, double eps = 1e-5);
/// y[n,c,...] = x[n,c,...] * gamma[n,c] + beta[n,c]
Var channel_affine(const Var& x, const Var& gamma, const Var& beta);

}  // namespace trgan::nn
