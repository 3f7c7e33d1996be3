#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "savers/errors.hpp"
#include "savers/rng.hpp"
#include "savers/tensor.hpp"

namespace savers {

// Convolution geometry. Padding is per-side so asymmetric schemes
// (e.g. the 4x4 mid convolution) can keep exact output extents.
struct ConvSpec {
  std::int64_t kernel_h = 1;
  std::int64_t kernel_w = 1;
  std::int64_t stride = 1;
  std::int64_t pad_top = 0;
  std::int64_t pad_bottom = 0;
  std::int64_t pad_left = 0;
  std::int64_t pad_right = 0;
};

inline ConvSpec make_conv_spec(std::int64_t kh, std::int64_t kw,
                               std::int64_t stride, std::int64_t pad) {
  return ConvSpec{kh, kw, stride, pad, pad, pad, pad};
}

inline void validate_conv_spec(const ConvSpec& s) {
  if (s.kernel_h < 1 || s.kernel_w < 1) {
    throw ConfigError("conv kernel dims must be >= 1");
  }
  if (s.stride < 1) throw ConfigError("conv stride must be >= 1");
  if (s.pad_top < 0 || s.pad_bottom < 0 || s.pad_left < 0 || s.pad_right < 0) {
    throw ConfigError("conv pads must be >= 0");
  }
}

// Forward output extents; throws if the spec yields an empty output.
inline std::pair<std::int64_t, std::int64_t> conv_output_extent(
    const ConvSpec& s, std::int64_t in_h, std::int64_t in_w) {
  validate_conv_spec(s);
  const std::int64_t oh =
      (in_h + s.pad_top + s.pad_bottom - s.kernel_h) / s.stride + 1;
  const std::int64_t ow =
      (in_w + s.pad_left + s.pad_right - s.kernel_w) / s.stride + 1;
  if (in_h + s.pad_top + s.pad_bottom < s.kernel_h ||
      in_w + s.pad_left + s.pad_right < s.kernel_w || oh < 1 || ow < 1) {
    throw DimensionError("conv spec yields empty output for input " +
                         std::to_string(in_h) + "x" + std::to_string(in_w));
  }
  return {oh, ow};
}

namespace detail {

// col is [C*kh*kw, oh*ow]; zero padding outside bounds.
inline void im2col(const Tensor& input, const ConvSpec& s, std::int64_t oh,
                   std::int64_t ow, std::vector<double>& col) {
  const std::int64_t C = input.dim(0);
  const std::int64_t H = input.dim(1);
  const std::int64_t W = input.dim(2);
  const std::int64_t positions = oh * ow;
  col.assign(static_cast<std::size_t>(C * s.kernel_h * s.kernel_w * positions),
             0.0);
  const double* in = input.data();
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t ky = 0; ky < s.kernel_h; ++ky) {
      for (std::int64_t kx = 0; kx < s.kernel_w; ++kx) {
        const std::int64_t row = (c * s.kernel_h + ky) * s.kernel_w + kx;
        double* dst = col.data() + row * positions;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy = oy * s.stride + ky - s.pad_top;
          if (iy < 0 || iy >= H) continue;
          const double* src = in + (c * H + iy) * W;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix = ox * s.stride + kx - s.pad_left;
            if (ix < 0 || ix >= W) continue;
            dst[oy * ow + ox] = src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col rows back into an image.
inline void col2im_accumulate(const std::vector<double>& col,
                              const ConvSpec& s, std::int64_t C,
                              std::int64_t H, std::int64_t W, std::int64_t oh,
                              std::int64_t ow, Tensor& out) {
  const std::int64_t positions = oh * ow;
  double* dst_img = out.data();
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t ky = 0; ky < s.kernel_h; ++ky) {
      for (std::int64_t kx = 0; kx < s.kernel_w; ++kx) {
        const std::int64_t row = (c * s.kernel_h + ky) * s.kernel_w + kx;
        const double* src = col.data() + row * positions;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy = oy * s.stride + ky - s.pad_top;
          if (iy < 0 || iy >= H) continue;
          double* dst = dst_img + (c * H + iy) * W;
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const std::int64_t ix = ox * s.stride + kx - s.pad_left;
            if (ix < 0 || ix >= W) continue;
            dst[ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

// C[m,n] += A[m,k] * B[k,n]
inline void matmul_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                       const double* A, const double* B, double* C) {
  for (std::int64_t i = 0; i < m; ++i) {
    double* crow = C + i * n;
    const double* arow = A + i * k;
    for (std::int64_t p = 0; p < k; ++p) {
      const double a = arow[p];
      const double* brow = B + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
inline void matmul_bt_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                          const double* A, const double* B, double* C) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    double* crow = C + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* brow = B + j * k;
      double acc = 0.0;
      for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
inline void matmul_at_acc(std::int64_t m, std::int64_t n, std::int64_t k,
                          const double* A, const double* B, double* C) {
  for (std::int64_t p = 0; p < k; ++p) {
    const double* arow = A + p * m;
    const double* brow = B + p * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const double a = arow[i];
      double* crow = C + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

inline void require_rank(const Tensor& t, std::int64_t rank,
                         const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " must have rank " +
                         std::to_string(rank) + ", got shape " +
                         t.shape_str());
  }
}

}  // namespace detail

// Cross-correlation (no kernel flip) with zero padding.
// input [C,H,W], kernels [F,C,kh,kw], bias [F] -> [F,oh,ow]
inline Tensor conv2d(const Tensor& input, const Tensor& kernels,
                     const Tensor& bias, const ConvSpec& spec) {
  detail::require_rank(input, 3, "conv2d input");
  detail::require_rank(kernels, 4, "conv2d kernels");
  detail::require_rank(bias, 1, "conv2d bias");
  const std::int64_t C = input.dim(0);
  const std::int64_t F = kernels.dim(0);
  if (kernels.dim(1) != C) {
    throw DimensionError("conv2d channel mismatch: input " + input.shape_str() +
                         " vs kernels " + kernels.shape_str());
  }
  if (kernels.dim(2) != spec.kernel_h || kernels.dim(3) != spec.kernel_w) {
    throw DimensionError("conv2d kernels " + kernels.shape_str() +
                         " do not match spec kernel " +
                         std::to_string(spec.kernel_h) + "x" +
                         std::to_string(spec.kernel_w));
  }
  if (bias.dim(0) != F) {
    throw DimensionError("conv2d bias " + bias.shape_str() +
                         " does not match kernels " + kernels.shape_str());
  }
  const auto [oh, ow] = conv_output_extent(spec, input.dim(1), input.dim(2));
  const std::int64_t positions = oh * ow;
  const std::int64_t patch = C * spec.kernel_h * spec.kernel_w;

  std::vector<double> col;
  detail::im2col(input, spec, oh, ow, col);

  Tensor out({F, oh, ow});
  for (std::int64_t f = 0; f < F; ++f) {
    double* row = out.data() + f * positions;
    const double b = bias[f];
    for (std::int64_t j = 0; j < positions; ++j) row[j] = b;
  }
  detail::matmul_acc(F, positions, patch, kernels.data(), col.data(),
                     out.data());
  return out;
}

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_kernels;
  Tensor grad_bias;
};

// Exact gradients of conv2d with respect to input, kernels, and bias.
inline ConvGrads conv2d_backward(const Tensor& grad_out,
                                 const Tensor& cached_input,
                                 const Tensor& kernels, const ConvSpec& spec,
                                 bool need_grad_input = true) {
  detail::require_rank(grad_out, 3, "conv2d_backward grad_out");
  detail::require_rank(cached_input, 3, "conv2d_backward input");
  detail::require_rank(kernels, 4, "conv2d_backward kernels");
  const std::int64_t C = cached_input.dim(0);
  const std::int64_t F = kernels.dim(0);
  if (kernels.dim(1) != C) {
    throw DimensionError("conv2d_backward channel mismatch: input " +
                         cached_input.shape_str() + " vs kernels " +
                         kernels.shape_str());
  }
  const auto [oh, ow] =
      conv_output_extent(spec, cached_input.dim(1), cached_input.dim(2));
  if (grad_out.dim(0) != F || grad_out.dim(1) != oh || grad_out.dim(2) != ow) {
    throw DimensionError("conv2d_backward grad_out " + grad_out.shape_str() +
                         " does not match forward output [" +
                         std::to_string(F) + "," + std::to_string(oh) + "," +
                         std::to_string(ow) + "]");
  }
  const std::int64_t positions = oh * ow;
  const std::int64_t patch = C * spec.kernel_h * spec.kernel_w;

  ConvGrads g;
  g.grad_bias = Tensor({F});
  for (std::int64_t f = 0; f < F; ++f) {
    const double* row = grad_out.data() + f * positions;
    double acc = 0.0;
    for (std::int64_t j = 0; j < positions; ++j) acc += row[j];
    g.grad_bias[f] = acc;
  }

  std::vector<double> col;
  detail::im2col(cached_input, spec, oh, ow, col);
  g.grad_kernels = Tensor(kernels.shape());
  detail::matmul_bt_acc(F, patch, positions, grad_out.data(), col.data(),
                        g.grad_kernels.data());

  g.grad_input = Tensor(cached_input.shape());
  if (need_grad_input) {
    std::vector<double> col_grad(
        static_cast<std::size_t>(patch * positions), 0.0);
    detail::matmul_at_acc(patch, positions, F, kernels.data(), grad_out.data(),
                          col_grad.data());
    detail::col2im_accumulate(col_grad, spec, C, cached_input.dim(1),
                              cached_input.dim(2), oh, ow, g.grad_input);
  }
  return g;
}

struct MaxPoolResult {
  Tensor output;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};

// 2x2 non-overlapping max pooling; ties go to the first element in
// row-major scan order of the window.
inline MaxPoolResult maxpool2(const Tensor& input) {
  detail::require_rank(input, 3, "maxpool2 input");
  const std::int64_t C = input.dim(0);
  const std::int64_t H = input.dim(1);
  const std::int64_t W = input.dim(2);
  if (H % 2 != 0 || W % 2 != 0) {
    throw DimensionError("maxpool2 requires even H and W, got " +
                         input.shape_str());
  }
  MaxPoolResult r;
  r.output = Tensor({C, H / 2, W / 2});
  r.argmax.resize(static_cast<std::size_t>(r.output.size()));
  std::int64_t o = 0;
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t oy = 0; oy < H / 2; ++oy) {
      for (std::int64_t ox = 0; ox < W / 2; ++ox) {
        double best = 0.0;
        std::int64_t best_idx = -1;
        for (std::int64_t dy = 0; dy < 2; ++dy) {
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const std::int64_t idx =
                (c * H + oy * 2 + dy) * W + ox * 2 + dx;
            const double v = input[idx];
            if (best_idx < 0 || v > best) {
              best = v;
              best_idx = idx;
            }
          }
        }
        r.output[o] = best;
        r.argmax[static_cast<std::size_t>(o)] = best_idx;
        ++o;
      }
    }
  }
  return r;
}

// Routes gradient only to the recorded argmax positions.
inline Tensor maxpool2_backward(const Tensor& grad_out,
                                const std::vector<std::int64_t>& argmax,
                                const std::vector<std::int64_t>& input_shape) {
  Tensor grad_in(input_shape);
  if (static_cast<std::int64_t>(argmax.size()) != grad_out.size()) {
    throw CorruptionError("maxpool2_backward: argmax count " +
                          std::to_string(argmax.size()) +
                          " does not match grad_out " + grad_out.shape_str());
  }
  const std::int64_t n = grad_in.size();
  for (std::int64_t i = 0; i < grad_out.size(); ++i) {
    const std::int64_t idx = argmax[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= n) {
      throw CorruptionError("maxpool2_backward: argmax index " +
                            std::to_string(idx) + " outside input of size " +
                            std::to_string(n));
    }
    grad_in[idx] += grad_out[i];
  }
  return grad_in;
}

// Fractionally strided convolution: the adjoint of conv2d under the
// same spec. input [C,H,W], kernels [C,F,kh,kw] -> [F,H'',W''] with
// H'' = (H-1)*stride + kh - pad_top - pad_bottom.
inline Tensor transposed_conv2d(const Tensor& input, const Tensor& kernels,
                                const ConvSpec& spec) {
  detail::require_rank(input, 3, "transposed_conv2d input");
  detail::require_rank(kernels, 4, "transposed_conv2d kernels");
  validate_conv_spec(spec);
  const std::int64_t C = input.dim(0);
  const std::int64_t H = input.dim(1);
  const std::int64_t W = input.dim(2);
  if (kernels.dim(0) != C) {
    throw DimensionError("transposed_conv2d channel mismatch: input " +
                         input.shape_str() + " vs kernels " +
                         kernels.shape_str());
  }
  if (kernels.dim(2) != spec.kernel_h || kernels.dim(3) != spec.kernel_w) {
    throw DimensionError("transposed_conv2d kernels " + kernels.shape_str() +
                         " do not match spec kernel " +
                         std::to_string(spec.kernel_h) + "x" +
                         std::to_string(spec.kernel_w));
  }
  const std::int64_t F = kernels.dim(1);
  const std::int64_t out_h =
      (H - 1) * spec.stride + spec.kernel_h - spec.pad_top - spec.pad_bottom;
  const std::int64_t out_w =
      (W - 1) * spec.stride + spec.kernel_w - spec.pad_left - spec.pad_right;
  if (out_h < 1 || out_w < 1) {
    throw DimensionError("transposed_conv2d yields empty output for input " +
                         input.shape_str());
  }
  // col_grad[(f,ky,kx), (y,x)] = sum_c K[c,f,ky,kx] * input[c,y,x],
  // then scatter with col2im against the defining forward conv
  // [F,out_h,out_w] -> [C,H,W].
  const std::int64_t patch = F * spec.kernel_h * spec.kernel_w;
  const std::int64_t positions = H * W;
  std::vector<double> col_grad(static_cast<std::size_t>(patch * positions),
                               0.0);
  detail::matmul_at_acc(patch, positions, C, kernels.data(), input.data(),
                        col_grad.data());
  Tensor out({F, out_h, out_w});
  detail::col2im_accumulate(col_grad, spec, F, out_h, out_w, H, W, out);
  return out;
}

struct TransposedConvGrads {
  Tensor grad_input;
  Tensor grad_kernels;
};

inline TransposedConvGrads transposed_conv2d_backward(const Tensor& grad_out,
                                                      const Tensor& cached_input,
                                                      const Tensor& kernels,
                                                      const ConvSpec& spec) {
  detail::require_rank(grad_out, 3, "transposed_conv2d_backward grad_out");
  const std::int64_t C = cached_input.dim(0);
  const std::int64_t H = cached_input.dim(1);
  const std::int64_t W = cached_input.dim(2);
  const std::int64_t F = kernels.dim(1);
  const std::int64_t out_h =
      (H - 1) * spec.stride + spec.kernel_h - spec.pad_top - spec.pad_bottom;
  const std::int64_t out_w =
      (W - 1) * spec.stride + spec.kernel_w - spec.pad_left - spec.pad_right;
  if (grad_out.dim(0) != F || grad_out.dim(1) != out_h ||
      grad_out.dim(2) != out_w) {
    throw DimensionError("transposed_conv2d_backward grad_out " +
                         grad_out.shape_str() + " does not match output [" +
                         std::to_string(F) + "," + std::to_string(out_h) +
                         "," + std::to_string(out_w) + "]");
  }
  TransposedConvGrads g;
  // Gradient w.r.t. the input is the defining forward conv applied to
  // grad_out with the same kernels.
  Tensor zero_bias({C});
  g.grad_input = conv2d(grad_out, kernels, zero_bias, spec);

  // Gradient w.r.t. kernels: dK[c,f,ky,kx] = sum_(y,x) in[c,y,x] *
  // grad_out[f, y*s+ky-pt, x*s+kx-pl].
  const std::int64_t patch = F * spec.kernel_h * spec.kernel_w;
  const std::int64_t positions = H * W;
  const auto [oh_check, ow_check] = conv_output_extent(spec, out_h, out_w);
  (void)oh_check;
  (void)ow_check;
  std::vector<double> col;
  detail::im2col(grad_out, spec, H, W, col);
  g.grad_kernels = Tensor(kernels.shape());
  detail::matmul_bt_acc(C, patch, positions, cached_input.data(), col.data(),
                        g.grad_kernels.data());
  return g;
}

inline Tensor relu(const Tensor& input) {
  Tensor out(input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > 0.0 ? input[i] : 0.0;
  }
  return out;
}

// Subgradient 0 at exactly 0.
inline Tensor relu_backward(const Tensor& grad_out,
                            const Tensor& cached_input) {
  if (!grad_out.same_shape(cached_input)) {
    throw DimensionError("relu_backward shape mismatch: " +
                         grad_out.shape_str() + " vs " +
                         cached_input.shape_str());
  }
  Tensor out(grad_out.shape());
  for (std::int64_t i = 0; i < grad_out.size(); ++i) {
    out[i] = cached_input[i] > 0.0 ? grad_out[i] : 0.0;
  }
  return out;
}

enum class RunMode { kTrain, kEval };

struct DropoutResult {
  Tensor output;
  Tensor mask;  // per-element multiplier: 0 or 1/(1-rate)
};

// Inverted dropout: survivors are scaled at train time so that eval is
// the identity.
inline DropoutResult dropout(const Tensor& input, double rate, RunMode mode,
                             Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0,1), got " +
                      std::to_string(rate));
  }
  DropoutResult r;
  if (mode == RunMode::kEval || rate == 0.0) {
    r.output = input;
    r.mask = Tensor::full(input.shape(), 1.0);
    return r;
  }
  const double scale = 1.0 / (1.0 - rate);
  r.output = Tensor(input.shape());
  r.mask = Tensor(input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const bool keep = rng.uniform() >= rate;
    const double m = keep ? scale : 0.0;
    r.mask[i] = m;
    r.output[i] = input[i] * m;
  }
  return r;
}

inline Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
  if (!grad_out.same_shape(mask)) {
    throw DimensionError("dropout_backward shape mismatch: " +
                         grad_out.shape_str() + " vs " + mask.shape_str());
  }
  Tensor out(grad_out.shape());
  for (std::int64_t i = 0; i < grad_out.size(); ++i) {
    out[i] = grad_out[i] * mask[i];
  }
  return out;
}

// Mean over all spatial positions per channel: [C,H,W] -> [C,1,1].
inline Tensor avgpool_global(const Tensor& input) {
  detail::require_rank(input, 3, "avgpool input");
  const std::int64_t C = input.dim(0);
  const std::int64_t positions = input.dim(1) * input.dim(2);
  Tensor out({C, 1, 1});
  for (std::int64_t c = 0; c < C; ++c) {
    const double* row = input.data() + c * positions;
    double acc = 0.0;
    for (std::int64_t j = 0; j < positions; ++j) acc += row[j];
    out[c] = acc / static_cast<double>(positions);
  }
  return out;
}

// Softmax over axis 0 at each trailing position, with max subtraction
// for stability. Works for [N_c], [N_c,H,W], etc.
inline Tensor softmax_classes(const Tensor& input) {
  const std::int64_t classes = input.dim(0);
  const std::int64_t positions = input.size() / classes;
  Tensor out(input.shape());
  for (std::int64_t j = 0; j < positions; ++j) {
    double m = input[j];
    for (std::int64_t c = 1; c < classes; ++c) {
      m = std::max(m, input[c * positions + j]);
    }
    double sum = 0.0;
    for (std::int64_t c = 0; c < classes; ++c) {
      const double e = std::exp(input[c * positions + j] - m);
      out[c * positions + j] = e;
      sum += e;
    }
    for (std::int64_t c = 0; c < classes; ++c) {
      out[c * positions + j] /= sum;
    }
  }
  return out;
}

}  // namespace savers
