#include "trgan/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "trgan/errors.hpp"

namespace trgan::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->value.shape() != b->value.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a->value.shape()) +
                     " vs " + shape_string(b->value.shape()));
  }
}

template <typename F, typename G>
Var unary(const Var& x, F forward, G derivative) {
  Tensor out(x->value.shape());
  const double* in = x->value.ptr();
  double* o = out.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] = forward(in[i]);
  return make_result(std::move(out), {x}, [derivative](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    const double* xin = p.value.ptr();
    const double* y = self.value.ptr();
    const double* gy = self.grad.ptr();
    double* gx = g.ptr();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += gy[i] * derivative(xin[i], y[i]);
  });
}

// Convolution geometry seen from the "image" side: the conv reads an image
// [c, d, h, w] and produces out positions [od, oh, ow].
struct Geometry {
  int c, d, h, w;
  int kd, kh, kw;
  int sd, sh, sw;
  int pd, ph, pw;
  int od, oh, ow;

  int rows() const { return c * kd * kh * kw; }
  int cols() const { return od * oh * ow; }
  int image_size() const { return c * d * h * w; }
};

void im2col(const Geometry& g, const double* image, double* cols) {
  const int ncols = g.cols();
  int row = 0;
  for (int ch = 0; ch < g.c; ++ch) {
    const double* img_c = image + static_cast<std::ptrdiff_t>(ch) * g.d * g.h * g.w;
    for (int kz = 0; kz < g.kd; ++kz) {
      for (int ky = 0; ky < g.kh; ++ky) {
        for (int kx = 0; kx < g.kw; ++kx, ++row) {
          double* dst = cols + static_cast<std::ptrdiff_t>(row) * ncols;
          for (int oz = 0; oz < g.od; ++oz) {
            const int iz = oz * g.sd - g.pd + kz;
            for (int oy = 0; oy < g.oh; ++oy) {
              const int iy = oy * g.sh - g.ph + ky;
              const bool row_ok = iz >= 0 && iz < g.d && iy >= 0 && iy < g.h;
              const double* src = img_c + (static_cast<std::ptrdiff_t>(iz) * g.h + iy) * g.w;
              for (int ox = 0; ox < g.ow; ++ox) {
                const int ix = ox * g.sw - g.pw + kx;
                *dst++ = (row_ok && ix >= 0 && ix < g.w) ? src[ix] : 0.0;
              }
            }
          }
        }
      }
    }
  }
}

void col2im_add(const Geometry& g, const double* cols, double* image) {
  const int ncols = g.cols();
  int row = 0;
  for (int ch = 0; ch < g.c; ++ch) {
    double* img_c = image + static_cast<std::ptrdiff_t>(ch) * g.d * g.h * g.w;
    for (int kz = 0; kz < g.kd; ++kz) {
      for (int ky = 0; ky < g.kh; ++ky) {
        for (int kx = 0; kx < g.kw; ++kx, ++row) {
          const double* src = cols + static_cast<std::ptrdiff_t>(row) * ncols;
          for (int oz = 0; oz < g.od; ++oz) {
            const int iz = oz * g.sd - g.pd + kz;
            for (int oy = 0; oy < g.oh; ++oy, src += g.ow) {
              const int iy = oy * g.sh - g.ph + ky;
              if (iz < 0 || iz >= g.d || iy < 0 || iy >= g.h) continue;
              double* dst = img_c + (static_cast<std::ptrdiff_t>(iz) * g.h + iy) * g.w;
              for (int ox = 0; ox < g.ow; ++ox) {
                const int ix = ox * g.sw - g.pw + kx;
                if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
              }
            }
          }
        }
      }
    }
  }
}

void require_rank(const Var& v, int rank, const char* op, const char* what) {
  if (v->value.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_string(v->value.shape()));
  }
}

void add_bias_per_channel(Tensor& out, const Tensor& b) {
  const int n = out.dim(0), c = out.dim(1);
  const std::size_t spatial = out.size() / (static_cast<std::size_t>(n) * c);
  double* o = out.ptr();
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double bv = b[static_cast<std::size_t>(ch)];
      for (std::size_t s = 0; s < spatial; ++s) *o++ += bv;
    }
}

void bias_grad_per_channel(const Tensor& gy, Tensor& gb) {
  const int n = gy.dim(0), c = gy.dim(1);
  const std::size_t spatial = gy.size() / (static_cast<std::size_t>(n) * c);
  const double* g = gy.ptr();
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t s = 0; s < spatial; ++s) acc += *g++;
      gb[static_cast<std::size_t>(ch)] += acc;
    }
}

int out_extent(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k)
      if (self.parents[k]->requires_grad) self.parents[k]->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] / b->value[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / pb.value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var tanh(const Var& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var sqrt(const Var& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require_rank(x, 2, "linear", "input");
  require_rank(w, 2, "linear", "weight");
  const int n = x->value.dim(0), in = x->value.dim(1), outf = w->value.dim(0);
  if (w->value.dim(1) != in) {
    throw ShapeError("linear: weight " + shape_string(w->value.shape()) + " incompatible with input " +
                     shape_string(x->value.shape()));
  }
  if (b && (b->value.rank() != 1 || b->value.dim(0) != outf)) {
    throw ShapeError("linear: bias shape " + shape_string(b->value.shape()));
  }
  Tensor out({n, outf});
  MatMap(out.ptr(), n, outf).noalias() =
      ConstMatMap(x->value.ptr(), n, in) * ConstMatMap(w->value.ptr(), outf, in).transpose();
  if (b) {
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < outf; ++o) out[static_cast<std::size_t>(i) * outf + o] += b->value[o];
  }
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make_result(std::move(out), std::move(parents), [n, in, outf](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMatMap gy(self.grad.ptr(), n, outf);
    if (px.requires_grad) {
      MatMap(px.grad_buffer().ptr(), n, in).noalias() += gy * ConstMatMap(pw.value.ptr(), outf, in);
    }
    if (pw.requires_grad) {
      MatMap(pw.grad_buffer().ptr(), outf, in).noalias() +=
          gy.transpose() * ConstMatMap(px.value.ptr(), n, in);
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      Tensor& gb = self.parents[2]->grad_buffer();
      for (int i = 0; i < n; ++i)
        for (int o = 0; o < outf; ++o) gb[static_cast<std::size_t>(o)] += gy(i, o);
    }
  });
}

Var conv3d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec) {
  require_rank(x, 5, "conv3d", "input");
  require_rank(w, 5, "conv3d", "weight");
  const Shape& xs = x->value.shape();
  const Shape& ws = w->value.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv3d: weight " + shape_string(ws) + " incompatible with input " + shape_string(xs));
  }
  const int n = xs[0], cout = ws[0];
  Geometry g{xs[1], xs[2], xs[3], xs[4], ws[2], ws[3], ws[4], spec.stride[0], spec.stride[1],
             spec.stride[2], spec.pad[0], spec.pad[1], spec.pad[2], 0, 0, 0};
  g.od = out_extent(g.d, g.kd, g.sd, g.pd);
  g.oh = out_extent(g.h, g.kh, g.sh, g.ph);
  g.ow = out_extent(g.w, g.kw, g.sw, g.pw);
  if (g.od <= 0 || g.oh <= 0 || g.ow <= 0) {
    throw ShapeError("conv3d: empty output for input " + shape_string(xs));
  }
  if (b && (b->value.rank() != 1 || b->value.dim(0) != cout)) {
    throw ShapeError("conv3d: bias shape " + shape_string(b->value.shape()));
  }

  Tensor out({n, cout, g.od, g.oh, g.ow});
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap wm(w->value.ptr(), cout, g.rows());
  for (int i = 0; i < n; ++i) {
    im2col(g, x->value.ptr() + static_cast<std::ptrdiff_t>(i) * g.image_size(), cols.data());
    MatMap(out.ptr() + static_cast<std::ptrdiff_t>(i) * cout * g.cols(), cout, g.cols()).noalias() =
        wm * ConstMatMap(cols.data(), g.rows(), g.cols());
  }
  if (b) add_bias_per_channel(out, b->value);

  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make_result(std::move(out), std::move(parents), [g, n, cout](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMatMap wm(pw.value.ptr(), cout, g.rows());
    std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
    for (int i = 0; i < n; ++i) {
      ConstMatMap gy(self.grad.ptr() + static_cast<std::ptrdiff_t>(i) * cout * g.cols(), cout, g.cols());
      if (pw.requires_grad) {
        im2col(g, px.value.ptr() + static_cast<std::ptrdiff_t>(i) * g.image_size(), cols.data());
        MatMap(pw.grad_buffer().ptr(), cout, g.rows()).noalias() +=
            gy * ConstMatMap(cols.data(), g.rows(), g.cols()).transpose();
      }
      if (px.requires_grad) {
        MatMap(cols.data(), g.rows(), g.cols()).noalias() = wm.transpose() * gy;
        col2im_add(g, cols.data(), px.grad_buffer().ptr() + static_cast<std::ptrdiff_t>(i) * g.image_size());
      }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      bias_grad_per_channel(self.grad, self.parents[2]->grad_buffer());
    }
  });
}

Var conv_transpose3d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec) {
  require_rank(x, 5, "conv_transpose3d", "input");
  require_rank(w, 5, "conv_transpose3d", "weight");
  const Shape& xs = x->value.shape();
  const Shape& ws = w->value.shape();
  if (ws[0] != xs[1]) {
    throw ShapeError("conv_transpose3d: weight " + shape_string(ws) + " incompatible with input " +
                     shape_string(xs));
  }
  const int n = xs[0], cin = xs[1], cout = ws[1];
  // Geometry of the equivalent forward conv mapping the output back onto the input grid.
  Geometry g{cout, (xs[2] - 1) * spec.stride[0] - 2 * spec.pad[0] + ws[2],
             (xs[3] - 1) * spec.stride[1] - 2 * spec.pad[1] + ws[3],
             (xs[4] - 1) * spec.stride[2] - 2 * spec.pad[2] + ws[4],
             ws[2], ws[3], ws[4], spec.stride[0], spec.stride[1], spec.stride[2],
             spec.pad[0], spec.pad[1], spec.pad[2], xs[2], xs[3], xs[4]};
  if (g.d <= 0 || g.h <= 0 || g.w <= 0) {
    throw ShapeError("conv_transpose3d: empty output for input " + shape_string(xs));
  }
  if (b && (b->value.rank() != 1 || b->value.dim(0) != cout)) {
    throw ShapeError("conv_transpose3d: bias shape " + shape_string(b->value.shape()));
  }
  const std::ptrdiff_t in_size = static_cast<std::ptrdiff_t>(cin) * g.cols();

  Tensor out({n, cout, g.d, g.h, g.w});
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap wm(w->value.ptr(), cin, g.rows());
  for (int i = 0; i < n; ++i) {
    MatMap(cols.data(), g.rows(), g.cols()).noalias() =
        wm.transpose() * ConstMatMap(x->value.ptr() + i * in_size, cin, g.cols());
    col2im_add(g, cols.data(), out.ptr() + static_cast<std::ptrdiff_t>(i) * g.image_size());
  }
  if (b) add_bias_per_channel(out, b->value);

  std::vector<Var> parents{x, w};
  if (b) parents.push_back(b);
  return make_result(std::move(out), std::move(parents), [g, n, cin, in_size](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMatMap wm(pw.value.ptr(), cin, g.rows());
    std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
    for (int i = 0; i < n; ++i) {
      im2col(g, self.grad.ptr() + static_cast<std::ptrdiff_t>(i) * g.image_size(), cols.data());
      ConstMatMap cm(cols.data(), g.rows(), g.cols());
      if (px.requires_grad) {
        MatMap(px.grad_buffer().ptr() + i * in_size, cin, g.cols()).noalias() += wm * cm;
      }
      if (pw.requires_grad) {
        MatMap(pw.grad_buffer().ptr(), cin, g.rows()).noalias() +=
            ConstMatMap(px.value.ptr() + i * in_size, cin, g.cols()) * cm.transpose();
      }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      bias_grad_per_channel(self.grad, self.parents[2]->grad_buffer());
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape& as = a->value.shape();
  const Shape& bs = b->value.shape();
  if (as.size() < 2 || as.size() != bs.size() || as[0] != bs[0] ||
      !std::equal(as.begin() + 2, as.end(), bs.begin() + 2)) {
    throw ShapeError("concat_channels: incompatible " + shape_string(as) + " and " + shape_string(bs));
  }
  const int n = as[0];
  const std::size_t sa = a->value.size() / n, sb = b->value.size() / n;
  Shape os = as;
  os[1] = as[1] + bs[1];
  Tensor out(os);
  for (int i = 0; i < n; ++i) {
    std::copy_n(a->value.ptr() + i * sa, sa, out.ptr() + i * (sa + sb));
    std::copy_n(b->value.ptr() + i * sb, sb, out.ptr() + i * (sa + sb) + sa);
  }
  return make_result(std::move(out), {a, b}, [n, sa, sb](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      Tensor& g = p.grad_buffer();
      const std::size_t len = k == 0 ? sa : sb, off = k == 0 ? 0 : sa;
      for (int i = 0; i < n; ++i) {
        const double* src = self.grad.ptr() + i * (sa + sb) + off;
        double* dst = g.ptr() + i * len;
        for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
      }
    }
  });
}

Var sequence_to_rows(const Var& x) {
  require_rank(x, 3, "sequence_to_rows", "input");
  const int n = x->value.dim(0), c = x->value.dim(1), l = x->value.dim(2);
  Tensor out({n * l, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int t = 0; t < l; ++t)
        out[(static_cast<std::size_t>(i) * l + t) * c + ch] = x->value[(static_cast<std::size_t>(i) * c + ch) * l + t];
  return make_result(std::move(out), {x}, [n, c, l](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int t = 0; t < l; ++t)
          g[(static_cast<std::size_t>(i) * c + ch) * l + t] += self.grad[(static_cast<std::size_t>(i) * l + t) * c + ch];
  });
}

Var repeat_rows(const Var& x, int times) {
  require_rank(x, 2, "repeat_rows", "input");
  const int n = x->value.dim(0), f = x->value.dim(1);
  Tensor out({n * times, f});
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < times; ++r)
      std::copy_n(x->value.ptr() + static_cast<std::ptrdiff_t>(i) * f, f,
                  out.ptr() + (static_cast<std::ptrdiff_t>(i) * times + r) * f);
  return make_result(std::move(out), {x}, [n, f, times](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < times; ++r) {
        const double* src = self.grad.ptr() + (static_cast<std::ptrdiff_t>(i) * times + r) * f;
        double* dst = g.ptr() + static_cast<std::ptrdiff_t>(i) * f;
        for (int j = 0; j < f; ++j) dst[j] += src[j];
      }
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x->value.values()) acc += v;
  return make_result(Tensor({1}, acc), {x}, [](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double gy = self.grad[0];
    for (double& v : g.storage()) v += gy;
  });
}

Var mean(const Var& x) {
  if (x->value.empty()) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x->value.size()));
}

Var sum_per_sample(const Var& x) {
  const int n = x->value.dim(0);
  const std::size_t per = x->value.size() / n;
  Tensor out({n});
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) acc += x->value[i * per + j];
    out[i] = acc;
  }
  return make_result(std::move(out), {x}, [n, per](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    for (int i = 0; i < n; ++i)
      for (std::size_t j = 0; j < per; ++j) g[i * per + j] += self.grad[i];
  });
}

Var l2_per_sample(const Var& x) {
  const int n = x->value.dim(0);
  const std::size_t per = x->value.size() / n;
  Tensor out({n});
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < per; ++j) acc += x->value[i * per + j] * x->value[i * per + j];
    out[i] = std::sqrt(acc);
  }
  return make_result(std::move(out), {x}, [n, per](Node& self) {
    Node& p = *self.parents[0];
    Tensor& g = p.grad_buffer();
    for (int i = 0; i < n; ++i) {
      const double norm = self.value[i];
      if (norm == 0.0) continue;  // subgradient 0 at the origin
      const double k = self.grad[i] / norm;
      for (std::size_t j = 0; j < per; ++j) g[i * per + j] += k * p.value[i * per + j];
    }
  });
}

Var global_avg_pool(const Var& x) {
  const int n = x->value.dim(0), c = x->value.dim(1);
  const std::size_t spatial = x->value.size() / (static_cast<std::size_t>(n) * c);
  Tensor out({n, c});
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0;
    for (std::size_t s = 0; s < spatial; ++s) acc += x->value[k * spatial + s];
    out[k] = acc / static_cast<double>(spatial);
  }
  return make_result(std::move(out), {x}, [spatial](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(spatial);
    for (std::size_t k = 0; k < self.grad.size(); ++k)
      for (std::size_t s = 0; s < spatial; ++s) g[k * spatial + s] += self.grad[k] * inv;
  });
}

Var instance_norm(const Var& x, double eps) {
  const int n = x->value.dim(0), c = x->value.dim(1);
  const std::size_t groups = static_cast<std::size_t>(n) * c;
  const std::size_t spatial = x->value.size() / groups;
  Tensor out(x->value.shape());
  std::vector<double> inv_std(groups);
  for (std::size_t k = 0; k < groups; ++k) {
    const double* in = x->value.ptr() + k * spatial;
    double mu = 0.0;
    for (std::size_t s = 0; s < spatial; ++s) mu += in[s];
    mu /= static_cast<double>(spatial);
    double var = 0.0;
    for (std::size_t s = 0; s < spatial; ++s) var += (in[s] - mu) * (in[s] - mu);
    var /= static_cast<double>(spatial);
    inv_std[k] = 1.0 / std::sqrt(var + eps);
    double* o = out.ptr() + k * spatial;
    for (std::size_t s = 0; s < spatial; ++s) o[s] = (in[s] - mu) * inv_std[k];
  }
  return make_result(std::move(out), {x}, [groups, spatial, inv_std = std::move(inv_std)](Node& self) {
    Tensor& g = self.parents[0]->grad_buffer();
    const double m = static_cast<double>(spatial);
    for (std::size_t k = 0; k < groups; ++k) {
      const double* y = self.value.ptr() + k * spatial;
      const double* gy = self.grad.ptr() + k * spatial;
      double sum_g = 0.0, sum_gy = 0.0;
      for (std::size_t s = 0; s < spatial; ++s) {
        sum_g += gy[s];
        sum_gy += gy[s] * y[s];
      }
      double* gx = g.ptr() + k * spatial;
      for (std::size_t s = 0; s < spatial; ++s)
        gx[s] += inv_std[k] * (gy[s] - sum_g / m - y[s] * sum_gy / m);
    }
  });
}

Var channel_affine(const Var& x, const Var& gamma, const Var& beta) {
  const int n = x->value.dim(0), c = x->value.dim(1);
  const Shape nc{n, c};
  if (gamma->value.shape() != nc || beta->value.shape() != nc) {
    throw ShapeError("channel_affine: gamma/beta must be " + shape_string(nc));
  }
  const std::size_t groups = static_cast<std::size_t>(n) * c;
  const std::size_t spatial = x->value.size() / groups;
  Tensor out(x->value.shape());
  for (std::size_t k = 0; k < groups; ++k)
    for (std::size_t s = 0; s < spatial; ++s)
      out[k * spatial + s] = x->value[k * spatial + s] * gamma->value[k] + beta->value[k];
  return make_result(std::move(out), {x, gamma, beta}, [groups, spatial](Node& self) {
    Node& px = *self.parents[0];
    Node& pg = *self.parents[1];
    Node& pb = *self.parents[2];
    for (std::size_t k = 0; k < groups; ++k) {
      const double* gy = self.grad.ptr() + k * spatial;
      if (px.requires_grad) {
        double* gx = px.grad_buffer().ptr() + k * spatial;
        for (std::size_t s = 0; s < spatial; ++s) gx[s] += gy[s] * pg.value[k];
      }
      if (pg.requires_grad) {
        double acc = 0.0;
        for (std::size_t s = 0; s < spatial; ++s) acc += gy[s] * px.value[k * spatial + s];
        pg.grad_buffer()[k] += acc;
      }
      if (pb.requires_grad) {
        double acc = 0.0;
        for (std::size_t s = 0; s < spatial; ++s) acc += gy[s];
        pb.grad_buffer()[k] += acc;
      }
    }
  });
}

}  // namespace trgan::nn
