// Independent reference implementations used to check the library.
// These deliberately avoid the library's im2col/BFS code paths.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "savers/data_types.hpp"
#include "savers/ops.hpp"
#include "savers/rng.hpp"
#include "savers/tensor.hpp"

namespace oracles {

inline savers::Tensor random_tensor(std::vector<std::int64_t> shape,
                                    savers::Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  savers::Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t[i] = lo + (hi - lo) * rng.uniform();
  }
  return t;
}

// Naive sliding-window cross-correlation, a direct transcription of
// the definition.
inline savers::Tensor naive_conv2d(const savers::Tensor& input,
                                   const savers::Tensor& kernels,
                                   const savers::Tensor& bias,
                                   const savers::ConvSpec& s) {
  const std::int64_t C = input.dim(0);
  const std::int64_t H = input.dim(1);
  const std::int64_t W = input.dim(2);
  const std::int64_t F = kernels.dim(0);
  const std::int64_t oh = (H + s.pad_top + s.pad_bottom - s.kernel_h) / s.stride + 1;
  const std::int64_t ow = (W + s.pad_left + s.pad_right - s.kernel_w) / s.stride + 1;
  savers::Tensor out({F, oh, ow});
  for (std::int64_t f = 0; f < F; ++f) {
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        double acc = bias[f];
        for (std::int64_t c = 0; c < C; ++c) {
          for (std::int64_t ky = 0; ky < s.kernel_h; ++ky) {
            for (std::int64_t kx = 0; kx < s.kernel_w; ++kx) {
              const std::int64_t iy = oy * s.stride + ky - s.pad_top;
              const std::int64_t ix = ox * s.stride + kx - s.pad_left;
              if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
              acc += input.at(c, iy, ix) * kernels.at(f, c, ky, kx);
            }
          }
        }
        out.at(f, oy, ox) = acc;
      }
    }
  }
  return out;
}

struct FloodComponent {
  std::int32_t class_id = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> pixels;  // sorted
};

// Connected components by iterated label propagation (no BFS/DFS):
// every pixel starts as its own component id and repeatedly adopts the
// smallest id among 8-neighbours of the same class until stable.
inline std::vector<FloodComponent> naive_components(
    const savers::LabelImage& map) {
  const std::int64_t H = map.height;
  const std::int64_t W = map.width;
  std::vector<std::int64_t> id(static_cast<std::size_t>(H * W));
  for (std::int64_t i = 0; i < H * W; ++i) {
    id[static_cast<std::size_t>(i)] = i;
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::int64_t y = 0; y < H; ++y) {
      for (std::int64_t x = 0; x < W; ++x) {
        const std::int64_t i = y * W + x;
        if (map.labels[static_cast<std::size_t>(i)] == 0) continue;
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            const std::int64_t ny = y + dy;
            const std::int64_t nx = x + dx;
            if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
            const std::int64_t j = ny * W + nx;
            if (map.labels[static_cast<std::size_t>(j)] !=
                map.labels[static_cast<std::size_t>(i)]) {
              continue;
            }
            if (id[static_cast<std::size_t>(j)] < id[static_cast<std::size_t>(i)]) {
              id[static_cast<std::size_t>(i)] = id[static_cast<std::size_t>(j)];
              changed = true;
            }
          }
        }
      }
    }
  }
  std::map<std::int64_t, FloodComponent> by_id;
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const std::int64_t i = y * W + x;
      if (map.labels[static_cast<std::size_t>(i)] == 0) continue;
      FloodComponent& comp = by_id[id[static_cast<std::size_t>(i)]];
      comp.class_id = map.labels[static_cast<std::size_t>(i)];
      comp.pixels.emplace_back(y, x);
    }
  }
  std::vector<FloodComponent> out;
  for (auto& [root, comp] : by_id) {
    (void)root;
    std::sort(comp.pixels.begin(), comp.pixels.end());
    out.push_back(std::move(comp));
  }
  return out;
}

inline double dot(const savers::Tensor& a, const savers::Tensor& b) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace oracles
