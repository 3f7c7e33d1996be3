#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "savers/errors.hpp"
#include "savers/ops.hpp"
#include "savers/rng.hpp"
#include "savers/tensor.hpp"

namespace savers {

// Spatial reduction of the encoder: four 2x2 poolings.
inline constexpr std::int64_t kGridStride = 16;
inline constexpr std::int64_t kDecoderKernel = 32;

struct SaversConfig {
  std::int64_t num_classes = 11;
  std::array<std::int64_t, 4> block_channels{32, 64, 128, 256};
  std::int64_t mid_channels = 256;
  double dropout_rate = 0.5;
  std::int64_t input_channels = 1;
  // Cell extent of the centered average-pooling window that produces
  // the chip-level score (chips carry their target near the center).
  // 0 pools the whole grid.
  std::int64_t coarse_pool_window = 2;

  void validate() const {
    if (num_classes < 2) {
      throw ConfigError("num_classes must be >= 2, got " +
                        std::to_string(num_classes));
    }
    for (std::int64_t c : block_channels) {
      if (c < 1) throw ConfigError("block channel counts must be >= 1");
    }
    if (mid_channels < 1) throw ConfigError("mid_channels must be >= 1");
    if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must be in [0,1), got " +
                        std::to_string(dropout_rate));
    }
    if (coarse_pool_window < 0) {
      throw ConfigError("coarse_pool_window must be >= 0");
    }
  }
};

// All learned parameters plus the architecture hyperparameters they
// were built for. Parameters are a named map so checkpoints and the
// optimizer can address them uniformly.
struct SaversModel {
  SaversConfig config;
  std::map<std::string, Tensor> params;

  const Tensor& param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) {
      throw CorruptionError("missing model parameter '" + name + "'");
    }
    return it->second;
  }
};

enum class LayerKind { kConv, kRelu, kMaxPool, kDropout };

struct LayerDef {
  LayerKind kind;
  std::string name;  // parameter prefix for kConv
  ConvSpec spec;
  std::int64_t in_ch = 0;
  std::int64_t out_ch = 0;
};

// Encoder stack: four [conv3x3, relu, conv3x3, relu, maxpool2] blocks,
// then conv4x4 -> relu -> dropout -> conv1x1 classifier (no activation
// after the final convolution). The 4x4 convolution pads 1 on top/left
// and 2 on bottom/right so every stage preserves its spatial extent.
inline std::vector<LayerDef> encoder_layers(const SaversConfig& config) {
  std::vector<LayerDef> layers;
  const ConvSpec conv3 = make_conv_spec(3, 3, 1, 1);
  const ConvSpec conv4{4, 4, 1, 1, 2, 1, 2};
  const ConvSpec conv1 = make_conv_spec(1, 1, 1, 0);

  std::int64_t in_ch = config.input_channels;
  for (int b = 0; b < 4; ++b) {
    const std::int64_t out_ch = config.block_channels[static_cast<std::size_t>(b)];
    const std::string prefix = "enc" + std::to_string(b + 1);
    layers.push_back({LayerKind::kConv, prefix + ".conv1", conv3, in_ch, out_ch});
    layers.push_back({LayerKind::kRelu, "", {}, 0, 0});
    layers.push_back({LayerKind::kConv, prefix + ".conv2", conv3, out_ch, out_ch});
    layers.push_back({LayerKind::kRelu, "", {}, 0, 0});
    layers.push_back({LayerKind::kMaxPool, "", {}, 0, 0});
    in_ch = out_ch;
  }
  layers.push_back({LayerKind::kConv, "mid.conv", conv4, in_ch, config.mid_channels});
  layers.push_back({LayerKind::kRelu, "", {}, 0, 0});
  layers.push_back({LayerKind::kDropout, "", {}, 0, 0});
  layers.push_back({LayerKind::kConv, "head.conv", conv1, config.mid_channels,
                    config.num_classes});
  return layers;
}

// The decoder upsamples the class-logit grid by kGridStride. decode()
// edge-replicates the grid by one cell before the transposed conv, so
// the effective crop is kDecoderKernel/4 + kGridStride = 24 per side
// and bilinear weights form a partition of unity on every output pixel.
inline ConvSpec decoder_spec() {
  const std::int64_t pad = kDecoderKernel / 4 + kGridStride;
  return ConvSpec{kDecoderKernel, kDecoderKernel, kGridStride,
                  pad, pad, pad, pad};
}

inline std::map<std::string, std::vector<std::int64_t>> expected_param_shapes(
    const SaversConfig& config) {
  std::map<std::string, std::vector<std::int64_t>> shapes;
  for (const LayerDef& layer : encoder_layers(config)) {
    if (layer.kind != LayerKind::kConv) continue;
    shapes[layer.name + ".w"] = {layer.out_ch, layer.in_ch,
                                 layer.spec.kernel_h, layer.spec.kernel_w};
    shapes[layer.name + ".b"] = {layer.out_ch};
  }
  shapes["dec.tconv.w"] = {config.num_classes, config.num_classes,
                           kDecoderKernel, kDecoderKernel};
  return shapes;
}

namespace detail {

// 1-D bilinear interpolation weight for an even kernel.
inline double bilinear_weight(std::int64_t i, std::int64_t kernel,
                              std::int64_t factor) {
  const double center = (static_cast<double>(kernel) - 1.0) / 2.0;
  return 1.0 - std::abs(static_cast<double>(i) - center) /
                   static_cast<double>(factor);
}

}  // namespace detail

// Builds the model with He-normal conv weights, zero biases, and the
// decoder initialized to bilinear interpolation.
inline SaversModel build_model(const SaversConfig& config,
                               std::uint64_t seed) {
  config.validate();
  SaversModel model;
  model.config = config;
  Rng init = Rng(seed).substream("init");
  for (const LayerDef& layer : encoder_layers(config)) {
    if (layer.kind != LayerKind::kConv) continue;
    Tensor w({layer.out_ch, layer.in_ch, layer.spec.kernel_h,
              layer.spec.kernel_w});
    const double stddev = std::sqrt(
        2.0 / static_cast<double>(layer.in_ch * layer.spec.kernel_h *
                                  layer.spec.kernel_w));
    for (std::int64_t i = 0; i < w.size(); ++i) w[i] = init.normal() * stddev;
    model.params[layer.name + ".w"] = std::move(w);
    model.params[layer.name + ".b"] = Tensor({layer.out_ch});
  }
  Tensor dec({config.num_classes, config.num_classes, kDecoderKernel,
              kDecoderKernel});
  for (std::int64_t c = 0; c < config.num_classes; ++c) {
    for (std::int64_t i = 0; i < kDecoderKernel; ++i) {
      for (std::int64_t j = 0; j < kDecoderKernel; ++j) {
        dec.at(c, c, i, j) =
            detail::bilinear_weight(i, kDecoderKernel, kGridStride) *
            detail::bilinear_weight(j, kDecoderKernel, kGridStride);
      }
    }
  }
  model.params["dec.tconv.w"] = std::move(dec);
  return model;
}

// Cached per-layer state for the backward pass.
struct LayerState {
  Tensor input;                          // conv / relu input
  std::vector<std::int64_t> argmax;      // maxpool routing
  std::vector<std::int64_t> input_shape; // maxpool input extents
  Tensor mask;                           // dropout multipliers
};

struct ForwardTrace {
  std::vector<LayerState> layers;
  Tensor grid;         // encoder output (class logits per cell)
  Tensor padded_grid;  // decode input after edge replication
  Tensor scores;       // decoder output
};

namespace detail {

inline Tensor replicate_grid(const Tensor& grid) {
  const std::int64_t C = grid.dim(0);
  const std::int64_t H = grid.dim(1);
  const std::int64_t W = grid.dim(2);
  Tensor out({C, H + 2, W + 2});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < H + 2; ++y) {
      const std::int64_t sy = std::min(std::max<std::int64_t>(y - 1, 0), H - 1);
      for (std::int64_t x = 0; x < W + 2; ++x) {
        const std::int64_t sx =
            std::min(std::max<std::int64_t>(x - 1, 0), W - 1);
        out.at(c, y, x) = grid.at(c, sy, sx);
      }
    }
  }
  return out;
}

// Adjoint of replicate_grid: folds phantom-cell gradients back into
// their source edge cells.
inline Tensor fold_replicated_grad(const Tensor& grad_padded) {
  const std::int64_t C = grad_padded.dim(0);
  const std::int64_t H = grad_padded.dim(1) - 2;
  const std::int64_t W = grad_padded.dim(2) - 2;
  Tensor out({C, H, W});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < H + 2; ++y) {
      const std::int64_t sy = std::min(std::max<std::int64_t>(y - 1, 0), H - 1);
      for (std::int64_t x = 0; x < W + 2; ++x) {
        const std::int64_t sx =
            std::min(std::max<std::int64_t>(x - 1, 0), W - 1);
        out.at(c, sy, sx) += grad_padded.at(c, y, x);
      }
    }
  }
  return out;
}

}  // namespace detail

// Runs the encoder stack. The input spatial extents must be multiples
// of kGridStride (pad_to_grid takes care of arbitrary sizes).
// When `trace` is non-null, per-layer state is recorded for backward.
inline Tensor run_encoder(const SaversModel& model, const Tensor& image,
                          RunMode mode, Rng* dropout_rng = nullptr,
                          ForwardTrace* trace = nullptr,
                          double dropout_rate = -1.0) {
  if (image.rank() != 3 || image.dim(0) != model.config.input_channels) {
    throw DimensionError("encoder expects [" +
                         std::to_string(model.config.input_channels) +
                         ",H,W] input, got " + image.shape_str());
  }
  if (image.dim(1) % kGridStride != 0 || image.dim(2) % kGridStride != 0) {
    throw DimensionError(
        "encoder input extents must be multiples of " +
        std::to_string(kGridStride) + ", got " + image.shape_str() +
        "; apply pad_to_grid first");
  }
  const double rate =
      dropout_rate >= 0.0 ? dropout_rate : model.config.dropout_rate;
  Tensor x = image;
  const std::vector<LayerDef> layers = encoder_layers(model.config);
  if (trace) trace->layers.resize(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerDef& layer = layers[li];
    LayerState* state = trace ? &trace->layers[li] : nullptr;
    switch (layer.kind) {
      case LayerKind::kConv: {
        if (state) state->input = x;
        x = conv2d(x, model.param(layer.name + ".w"),
                   model.param(layer.name + ".b"), layer.spec);
        break;
      }
      case LayerKind::kRelu: {
        if (state) state->input = x;
        x = relu(x);
        break;
      }
      case LayerKind::kMaxPool: {
        if (state) state->input_shape = x.shape();
        MaxPoolResult r = maxpool2(x);
        if (state) state->argmax = std::move(r.argmax);
        x = std::move(r.output);
        break;
      }
      case LayerKind::kDropout: {
        if (mode == RunMode::kTrain && dropout_rng == nullptr) {
          throw ConfigError("train-mode forward requires a dropout rng");
        }
        Rng eval_rng(0);
        DropoutResult r =
            dropout(x, rate, mode, dropout_rng ? *dropout_rng : eval_rng);
        if (state) state->mask = std::move(r.mask);
        x = std::move(r.output);
        break;
      }
    }
  }
  if (trace) trace->grid = x;
  return x;
}

// Per-cell class logit grid [N_c, H/16, W/16].
inline Tensor encode(const SaversModel& model, const Tensor& image) {
  return run_encoder(model, image, RunMode::kEval);
}

// Upsamples the logit grid back to pixel resolution [N_c, 16*G_h, 16*G_w].
inline Tensor decode(const SaversModel& model, const Tensor& logit_grid,
                     ForwardTrace* trace = nullptr) {
  if (logit_grid.rank() != 3 ||
      logit_grid.dim(0) != model.config.num_classes) {
    throw DimensionError("decode expects [" +
                         std::to_string(model.config.num_classes) +
                         ",Gh,Gw] grid, got " + logit_grid.shape_str());
  }
  Tensor padded = detail::replicate_grid(logit_grid);
  Tensor scores =
      transposed_conv2d(padded, model.param("dec.tconv.w"), decoder_spec());
  if (trace) {
    trace->padded_grid = std::move(padded);
    trace->scores = scores;
  }
  return scores;
}

// Full forward at pixel resolution with state capture for training.
inline Tensor forward_fine(const SaversModel& model, const Tensor& image,
                           RunMode mode, Rng* dropout_rng = nullptr,
                           ForwardTrace* trace = nullptr,
                           double dropout_rate = -1.0) {
  Tensor grid =
      run_encoder(model, image, mode, dropout_rng, trace, dropout_rate);
  return decode(model, grid, trace);
}

// Gradients of a scalar loss with respect to every model parameter,
// given the gradient of the loss with respect to the decoder output.
inline std::map<std::string, Tensor> backward_fine(const SaversModel& model,
                                                   const ForwardTrace& trace,
                                                   const Tensor& grad_scores) {
  std::map<std::string, Tensor> grads;
  TransposedConvGrads dec = transposed_conv2d_backward(
      grad_scores, trace.padded_grid, model.param("dec.tconv.w"),
      decoder_spec());
  grads["dec.tconv.w"] = std::move(dec.grad_kernels);
  Tensor d = detail::fold_replicated_grad(dec.grad_input);

  const std::vector<LayerDef> layers = encoder_layers(model.config);
  if (trace.layers.size() != layers.size()) {
    throw CorruptionError("forward trace does not match the layer stack");
  }
  for (std::size_t i = layers.size(); i-- > 0;) {
    const LayerDef& layer = layers[i];
    const LayerState& state = trace.layers[i];
    switch (layer.kind) {
      case LayerKind::kConv: {
        ConvGrads g = conv2d_backward(d, state.input,
                                      model.param(layer.name + ".w"),
                                      layer.spec, /*need_grad_input=*/i > 0);
        grads[layer.name + ".w"] = std::move(g.grad_kernels);
        grads[layer.name + ".b"] = std::move(g.grad_bias);
        d = std::move(g.grad_input);
        break;
      }
      case LayerKind::kRelu:
        d = relu_backward(d, state.input);
        break;
      case LayerKind::kMaxPool:
        d = maxpool2_backward(d, state.argmax, state.input_shape);
        break;
      case LayerKind::kDropout:
        d = dropout_backward(d, state.mask);
        break;
    }
  }
  return grads;
}

}  // namespace savers
