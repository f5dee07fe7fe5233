#pragma once

// Forward/backward kernels for the fixed operation set used by the two
// architectures: 3x3 convolution (stride 1 or 2, zero padding 1), its
// stride-2 transpose, dense layers, pointwise activations and the mean
// squared error. Convolutions lower to im2col + GEMM.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "digcsi/numeric/tensor.hpp"

namespace digcsi::numeric {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

inline constexpr std::size_t kKernel = 3;
inline constexpr std::size_t kTaps = kKernel * kKernel;

inline std::size_t conv_output_extent(std::size_t extent, std::size_t stride) {
  return (extent - 1) / stride + 1;
}

namespace detail {

// Output columns j whose source column j*stride + v - 1 lies inside [0, width).
inline std::pair<std::size_t, std::size_t> valid_columns(std::size_t wo, std::size_t width,
                                                         std::size_t stride, std::size_t v) {
  const std::size_t j0 = v == 0 ? 1 : 0;
  // largest j with j*stride + v - 1 <= width - 1
  const std::size_t j1 = width < v ? 0 : std::min(wo, (width - v) / stride + 1);
  return {std::min(j0, j1), j1};
}

// col(c*9 + u*3 + v, (b*Ho + i)*Wo + j) = x[b, c, i*stride + u - 1, j*stride + v - 1]
template <class T>
void im2col(const T* x, std::size_t batch, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t stride, RowMatrix<T>& col) {
  const std::size_t ho = conv_output_extent(height, stride);
  const std::size_t wo = conv_output_extent(width, stride);
  const std::size_t cols = batch * ho * wo;
  col.resize(static_cast<Eigen::Index>(channels * kTaps), static_cast<Eigen::Index>(cols));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < kKernel; ++u) {
      for (std::size_t v = 0; v < kKernel; ++v) {
        T* row = col.data() + (c * kTaps + u * kKernel + v) * cols;
        for (std::size_t b = 0; b < batch; ++b) {
          const T* plane = x + (b * channels + c) * height * width;
          for (std::size_t i = 0; i < ho; ++i) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * stride + u) - 1;
            T* out = row + (b * ho + i) * wo;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) {
              std::fill(out, out + wo, T(0));
              continue;
            }
            const T* src = plane + static_cast<std::size_t>(y) * width;
            const auto [j0, j1] = valid_columns(wo, width, stride, v);
            std::fill(out, out + j0, T(0));
            if (stride == 1) {
              std::copy(src + j0 + v - 1, src + j1 + v - 1, out + j0);
            } else {
              for (std::size_t j = j0; j < j1; ++j) out[j] = src[j * stride + v - 1];
            }
            std::fill(out + j1, out + wo, T(0));
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add the columns back onto the image.
template <class T>
void col2im(const RowMatrix<T>& col, std::size_t batch, std::size_t channels, std::size_t height,
            std::size_t width, std::size_t stride, T* x) {
  const std::size_t ho = conv_output_extent(height, stride);
  const std::size_t wo = conv_output_extent(width, stride);
  const std::size_t cols = batch * ho * wo;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t u = 0; u < kKernel; ++u) {
      for (std::size_t v = 0; v < kKernel; ++v) {
        const T* row = col.data() + (c * kTaps + u * kKernel + v) * cols;
        for (std::size_t b = 0; b < batch; ++b) {
          T* plane = x + (b * channels + c) * height * width;
          for (std::size_t i = 0; i < ho; ++i) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * stride + u) - 1;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
            const T* in = row + (b * ho + i) * wo;
            T* dst = plane + static_cast<std::size_t>(y) * width;
            const auto [j0, j1] = valid_columns(wo, width, stride, v);
            if (stride == 1) {
              T* d = dst + j0 + v - 1;
              for (std::size_t j = j0; j < j1; ++j) d[j - j0] += in[j];
            } else {
              for (std::size_t j = j0; j < j1; ++j) dst[j * stride + v - 1] += in[j];
            }
          }
        }
      }
    }
  }
}

// [B, C, S] <-> [C, B*S]
template <class T>
void batch_to_channel_major(const T* src, std::size_t batch, std::size_t channels,
                            std::size_t spatial, T* dst) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(src + (b * channels + c) * spatial, spatial, dst + (c * batch + b) * spatial);
    }
  }
}

template <class T>
void channel_to_batch_major(const T* src, std::size_t batch, std::size_t channels,
                            std::size_t spatial, T* dst) {
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(src + (c * batch + b) * spatial, spatial, dst + (b * channels + c) * spatial);
    }
  }
}

inline std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: x[B,Cin,H,W], w[Cout,Cin,3,3], b[Cout] -> y[B,Cout,H',W']

template <class T>
void check_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                  std::size_t stride) {
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d weights");
  if (w.dim(2) != kKernel || w.dim(3) != kKernel) throw ShapeError("conv2d: kernel must be 3x3");
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError("conv2d: input channels do not match weights (" +
                     detail::dims(x.dim(1), w.dim(1)) + "), input " + shape_string(x.shape()) +
                     ", weights " + shape_string(w.shape()));
  }
  require_shape(bias, {w.dim(0)}, "conv2d bias");
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
  if (x.dim(2) == 0 || x.dim(3) == 0) throw ShapeError("conv2d: empty spatial extent");
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride) {
  check_conv2d(x, w, bias, stride);
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0);
  const std::size_t ho = conv_output_extent(h, stride), wo = conv_output_extent(wd, stride);
  const std::size_t spatial = ho * wo;

  RowMatrix<T> col;
  detail::im2col(x.raw(), batch, cin, h, wd, stride, col);
  ConstMatrixMap<T> wm(w.raw(), static_cast<Eigen::Index>(cout),
                       static_cast<Eigen::Index>(cin * kTaps));
  RowMatrix<T> ym = wm * col;
  for (std::size_t o = 0; o < cout; ++o) ym.row(static_cast<Eigen::Index>(o)).array() += bias[o];

  Tensor<T> y({batch, cout, ho, wo});
  detail::channel_to_batch_major(ym.data(), batch, cout, spatial, y.raw());
  return y;
}

/// Accumulates weight/bias gradients and returns the input gradient.
template <class T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride,
                          const Tensor<T>& grad_y, Tensor<T>& grad_w, Tensor<T>& grad_b) {
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0);
  const std::size_t ho = conv_output_extent(h, stride), wo = conv_output_extent(wd, stride);
  const std::size_t spatial = ho * wo;
  require_shape(grad_y, {batch, cout, ho, wo}, "conv2d output gradient");

  RowMatrix<T> gy(static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(batch * spatial));
  detail::batch_to_channel_major(grad_y.raw(), batch, cout, spatial, gy.data());

  RowMatrix<T> col;
  detail::im2col(x.raw(), batch, cin, h, wd, stride, col);

  MatrixMap<T> gw(grad_w.raw(), static_cast<Eigen::Index>(cout),
                  static_cast<Eigen::Index>(cin * kTaps));
  gw.noalias() += gy * col.transpose();
  for (std::size_t o = 0; o < cout; ++o) grad_b[o] += gy.row(static_cast<Eigen::Index>(o)).sum();

  ConstMatrixMap<T> wm(w.raw(), static_cast<Eigen::Index>(cout),
                       static_cast<Eigen::Index>(cin * kTaps));
  RowMatrix<T> gcol = wm.transpose() * gy;
  Tensor<T> grad_x(x.shape());
  detail::col2im(gcol, batch, cin, h, wd, stride, grad_x.raw());
  return grad_x;
}

// ---------------------------------------------------------------------------
// tconv2d: x[B,Cin,H,W], w[Cin,Cout,3,3], b[Cout] -> y[B,Cout,2H,2W]
// The adjoint of a stride-2 conv2d taking Cout channels at 2Hx2W to Cin
// channels at HxW with the same weight tensor.

template <class T>
void check_tconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_rank(x, 4, "tconv2d input");
  require_rank(w, 4, "tconv2d weights");
  if (w.dim(2) != kKernel || w.dim(3) != kKernel) throw ShapeError("tconv2d: kernel must be 3x3");
  if (x.dim(1) != w.dim(0)) {
    throw ShapeError("tconv2d: input channels do not match weights (" +
                     detail::dims(x.dim(1), w.dim(0)) + "), input " + shape_string(x.shape()) +
                     ", weights " + shape_string(w.shape()));
  }
  require_shape(bias, {w.dim(1)}, "tconv2d bias");
}

template <class T>
Tensor<T> tconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  check_tconv2d(x, w, bias);
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(1);
  const std::size_t spatial = h * wd;

  RowMatrix<T> xm(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(batch * spatial));
  detail::batch_to_channel_major(x.raw(), batch, cin, spatial, xm.data());
  ConstMatrixMap<T> wm(w.raw(), static_cast<Eigen::Index>(cin),
                       static_cast<Eigen::Index>(cout * kTaps));
  RowMatrix<T> col = wm.transpose() * xm;

  Tensor<T> y({batch, cout, 2 * h, 2 * wd});
  detail::col2im(col, batch, cout, 2 * h, 2 * wd, 2, y.raw());
  const std::size_t out_spatial = 4 * spatial;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      T* plane = y.raw() + (b * cout + o) * out_spatial;
      for (std::size_t s = 0; s < out_spatial; ++s) plane[s] += bias[o];
    }
  }
  return y;
}

template <class T>
Tensor<T> tconv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_y,
                           Tensor<T>& grad_w, Tensor<T>& grad_b) {
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(1);
  const std::size_t spatial = h * wd;
  require_shape(grad_y, {batch, cout, 2 * h, 2 * wd}, "tconv2d output gradient");

  RowMatrix<T> gcol;
  detail::im2col(grad_y.raw(), batch, cout, 2 * h, 2 * wd, 2, gcol);

  RowMatrix<T> xm(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(batch * spatial));
  detail::batch_to_channel_major(x.raw(), batch, cin, spatial, xm.data());

  MatrixMap<T> gw(grad_w.raw(), static_cast<Eigen::Index>(cin),
                  static_cast<Eigen::Index>(cout * kTaps));
  gw.noalias() += xm * gcol.transpose();

  const std::size_t out_spatial = 4 * spatial;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      const T* plane = grad_y.raw() + (b * cout + o) * out_spatial;
      T acc = 0;
      for (std::size_t s = 0; s < out_spatial; ++s) acc += plane[s];
      grad_b[o] += acc;
    }
  }

  ConstMatrixMap<T> wm(w.raw(), static_cast<Eigen::Index>(cin),
                       static_cast<Eigen::Index>(cout * kTaps));
  RowMatrix<T> gx = wm * gcol;
  Tensor<T> grad_x(x.shape());
  detail::channel_to_batch_major(gx.data(), batch, cin, spatial, grad_x.raw());
  return grad_x;
}

// ---------------------------------------------------------------------------
// dense: x[B,F], w[F,G], b[G] -> y[B,G]

template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require_rank(x, 2, "dense input");
  require_rank(w, 2, "dense weights");
  if (x.dim(1) != w.dim(0)) {
    throw ShapeError("dense: input features do not match weights (" +
                     detail::dims(x.dim(1), w.dim(0)) + ")");
  }
  require_shape(bias, {w.dim(1)}, "dense bias");
  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(w.dim(0));
  const auto out = static_cast<Eigen::Index>(w.dim(1));
  Tensor<T> y({x.dim(0), w.dim(1)});
  MatrixMap<T> ym(y.raw(), batch, out);
  ym.noalias() = ConstMatrixMap<T>(x.raw(), batch, in) * ConstMatrixMap<T>(w.raw(), in, out);
  ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.raw(), out);
  return y;
}

template <class T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_y,
                         Tensor<T>& grad_w, Tensor<T>& grad_b) {
  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  const auto in = static_cast<Eigen::Index>(w.dim(0));
  const auto out = static_cast<Eigen::Index>(w.dim(1));
  require_shape(grad_y, {x.dim(0), w.dim(1)}, "dense output gradient");
  ConstMatrixMap<T> gy(grad_y.raw(), batch, out);
  MatrixMap<T>(grad_w.raw(), in, out).noalias() +=
      ConstMatrixMap<T>(x.raw(), batch, in).transpose() * gy;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grad_b.raw(), out) += gy.colwise().sum();
  Tensor<T> grad_x(x.shape());
  MatrixMap<T>(grad_x.raw(), batch, in).noalias() =
      gy * ConstMatrixMap<T>(w.raw(), in, out).transpose();
  return grad_x;
}

// ---------------------------------------------------------------------------
// Pointwise activations.

enum class Activation { leaky_relu, tanh };

inline constexpr double kLeakySlope = 0.2;

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
  Tensor<T> y = x;
  if (kind == Activation::leaky_relu) {
    for (T& v : y.data()) v = v > T(0) ? v : static_cast<T>(kLeakySlope) * v;
  } else {
    for (T& v : y.data()) v = std::tanh(v);
  }
  return y;
}

/// `x` and `y` are the forward input and output; tanh uses the output.
template <class T>
Tensor<T> activate_backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& grad_y,
                            Activation kind) {
  Tensor<T> g = grad_y;
  if (kind == Activation::leaky_relu) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(x[i] > T(0))) g[i] *= static_cast<T>(kLeakySlope);
    }
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= T(1) - y[i] * y[i];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Mean squared error over all scalars.

template <class T>
T mse(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: shapes differ " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  if (a.empty()) throw ShapeError("mse: empty tensors");
  // accumulate in double so single-precision losses stay reproducible for large batches
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(a.size()));
}

/// Gradient of mse(a, b) with respect to `a`.
template <class T>
Tensor<T> mse_grad(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse_grad: shapes differ");
  Tensor<T> g(a.shape());
  const T scale = T(2) / static_cast<T>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = scale * (a[i] - b[i]);
  return g;
}

}  // namespace digcsi::numeric
