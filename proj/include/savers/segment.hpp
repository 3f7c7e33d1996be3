#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "savers/data_types.hpp"
#include "savers/net.hpp"

namespace savers {

// Inverts pad_to_grid after decoding.
struct CropRecord {
  std::int64_t orig_h = 0;
  std::int64_t orig_w = 0;
  bool padded = false;
};

namespace detail {

inline std::int64_t round_up(std::int64_t v, std::int64_t m) {
  return (v + m - 1) / m * m;
}

// Mirrored index (edge included), iterated so it is total for any
// extent >= 1.
inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace detail

// Reflect-pads right/bottom to the next multiple of the grid stride.
inline std::pair<Tensor, CropRecord> pad_to_grid(const Tensor& image) {
  const std::int64_t C = image.dim(0);
  const std::int64_t H = image.dim(1);
  const std::int64_t W = image.dim(2);
  CropRecord crop{H, W, false};
  const std::int64_t ph = detail::round_up(H, kGridStride);
  const std::int64_t pw = detail::round_up(W, kGridStride);
  if (ph == H && pw == W) return {image, crop};
  crop.padded = true;
  Tensor out({C, ph, pw});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < ph; ++y) {
      const std::int64_t sy = detail::reflect_index(y, H);
      for (std::int64_t x = 0; x < pw; ++x) {
        out.at(c, y, x) = image.at(c, sy, detail::reflect_index(x, W));
      }
    }
  }
  return {out, crop};
}

inline Tensor crop_to(const Tensor& image, const CropRecord& crop) {
  if (!crop.padded && image.dim(1) == crop.orig_h &&
      image.dim(2) == crop.orig_w) {
    return image;
  }
  const std::int64_t C = image.dim(0);
  Tensor out({C, crop.orig_h, crop.orig_w});
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t y = 0; y < crop.orig_h; ++y) {
      for (std::int64_t x = 0; x < crop.orig_w; ++x) {
        out.at(c, y, x) = image.at(c, y, x);
      }
    }
  }
  return out;
}

// Bounds of the centered pooling window on a G_h x G_w grid. A window
// of 0 covers the whole grid; otherwise it is clamped to the extents.
struct PoolWindow {
  std::int64_t y0 = 0, x0 = 0, h = 0, w = 0;
};

inline PoolWindow coarse_pool_bounds(std::int64_t grid_h, std::int64_t grid_w,
                                     std::int64_t window) {
  if (window <= 0) return {0, 0, grid_h, grid_w};
  PoolWindow b;
  b.h = std::min(window, grid_h);
  b.w = std::min(window, grid_w);
  b.y0 = (grid_h - b.h) / 2;
  b.x0 = (grid_w - b.w) / 2;
  return b;
}

// Region-wise classification result. pooled_probs[0] is the background
// probability p0; 1 - p0 is the chip's targetness score.
struct CoarseResult {
  Tensor logit_grid;     // [N_c, G_h, G_w], pre-pooling
  Tensor pooled_logits;  // [N_c], mean over the pooling window
  Tensor pooled_probs;   // [N_c], softmax of pooled logits
  std::int64_t predicted_class = 0;
};

// The chip-level score averages the cell logits over the configured
// centered window (clutter scores disperse over the periphery while
// target scores concentrate near the center, so the aggregation reads
// the central region).
inline CoarseResult coarse_segment(const SaversModel& model,
                                   const Tensor& image) {
  auto [padded, crop] = pad_to_grid(image);
  (void)crop;
  CoarseResult r;
  r.logit_grid = encode(model, padded);
  const PoolWindow b =
      coarse_pool_bounds(r.logit_grid.dim(1), r.logit_grid.dim(2),
                         model.config.coarse_pool_window);
  r.pooled_logits = Tensor({model.config.num_classes});
  for (std::int64_t c = 0; c < model.config.num_classes; ++c) {
    double acc = 0.0;
    for (std::int64_t y = b.y0; y < b.y0 + b.h; ++y) {
      for (std::int64_t x = b.x0; x < b.x0 + b.w; ++x) {
        acc += r.logit_grid.at(c, y, x);
      }
    }
    r.pooled_logits[c] = acc / static_cast<double>(b.h * b.w);
  }
  r.pooled_probs = softmax_classes(r.pooled_logits);
  r.predicted_class = 0;
  for (std::int64_t c = 1; c < model.config.num_classes; ++c) {
    if (r.pooled_probs[c] > r.pooled_probs[r.predicted_class]) {
      r.predicted_class = c;
    }
  }
  return r;
}

// Pixel-wise classification result at the input resolution.
struct FineResult {
  Tensor score_map;  // [N_c, H, W]
  LabelImage label_map;
};

inline FineResult fine_segment(const SaversModel& model, const Tensor& image) {
  auto [padded, crop] = pad_to_grid(image);
  const Tensor grid = encode(model, padded);
  const Tensor scores = decode(model, grid);
  FineResult r;
  r.score_map = crop_to(scores, crop);
  const std::int64_t nc = model.config.num_classes;
  const std::int64_t H = r.score_map.dim(1);
  const std::int64_t W = r.score_map.dim(2);
  r.label_map = LabelImage(H, W, nc);
  const std::int64_t positions = H * W;
  for (std::int64_t j = 0; j < positions; ++j) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < nc; ++c) {
      if (r.score_map[c * positions + j] > r.score_map[best * positions + j]) {
        best = c;
      }
    }
    r.label_map.labels[static_cast<std::size_t>(j)] =
        static_cast<std::int32_t>(best);
  }
  return r;
}

// Predicted class per grid cell (the pre-pooling analysis view).
inline LabelImage cell_argmax(const Tensor& logit_grid) {
  const std::int64_t nc = logit_grid.dim(0);
  const std::int64_t gh = logit_grid.dim(1);
  const std::int64_t gw = logit_grid.dim(2);
  LabelImage cells(gh, gw, nc);
  const std::int64_t positions = gh * gw;
  for (std::int64_t j = 0; j < positions; ++j) {
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < nc; ++c) {
      if (logit_grid[c * positions + j] > logit_grid[best * positions + j]) {
        best = c;
      }
    }
    cells.labels[static_cast<std::size_t>(j)] =
        static_cast<std::int32_t>(best);
  }
  return cells;
}

// One detected target: an 8-connected region of one non-background
// class, its subpixel centroid, and its footprint.
struct DetectedTarget {
  std::int64_t class_id = 0;
  std::vector<std::pair<std::int64_t, std::int64_t>> pixel_mask;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  std::int64_t pixel_count = 0;
};

// Extracts 8-connected same-class components of non-background pixels.
// Components below min_pixels are discarded. Sorted by pixel count
// descending, ties by centroid (row, col).
inline std::vector<DetectedTarget> detect_targets(const LabelImage& label_map,
                                                  std::int64_t min_pixels) {
  const std::int64_t H = label_map.height;
  const std::int64_t W = label_map.width;
  std::vector<char> visited(static_cast<std::size_t>(H * W), 0);
  std::vector<DetectedTarget> targets;
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const std::int64_t start = y * W + x;
      if (visited[static_cast<std::size_t>(start)]) continue;
      const std::int32_t cls = label_map.labels[static_cast<std::size_t>(start)];
      if (cls == 0) continue;
      DetectedTarget t;
      t.class_id = cls;
      std::deque<std::int64_t> queue{start};
      visited[static_cast<std::size_t>(start)] = 1;
      double sum_r = 0.0, sum_c = 0.0;
      while (!queue.empty()) {
        const std::int64_t idx = queue.front();
        queue.pop_front();
        const std::int64_t py = idx / W;
        const std::int64_t px = idx % W;
        t.pixel_mask.emplace_back(py, px);
        sum_r += static_cast<double>(py);
        sum_c += static_cast<double>(px);
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          for (std::int64_t dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const std::int64_t ny = py + dy;
            const std::int64_t nx = px + dx;
            if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
            const std::int64_t nidx = ny * W + nx;
            if (visited[static_cast<std::size_t>(nidx)]) continue;
            if (label_map.labels[static_cast<std::size_t>(nidx)] != cls) {
              continue;
            }
            visited[static_cast<std::size_t>(nidx)] = 1;
            queue.push_back(nidx);
          }
        }
      }
      t.pixel_count = static_cast<std::int64_t>(t.pixel_mask.size());
      t.centroid_row = sum_r / static_cast<double>(t.pixel_count);
      t.centroid_col = sum_c / static_cast<double>(t.pixel_count);
      if (t.pixel_count >= min_pixels) {
        std::sort(t.pixel_mask.begin(), t.pixel_mask.end());
        targets.push_back(std::move(t));
      }
    }
  }
  std::sort(targets.begin(), targets.end(),
            [](const DetectedTarget& a, const DetectedTarget& b) {
              if (a.pixel_count != b.pixel_count) {
                return a.pixel_count > b.pixel_count;
              }
              if (a.centroid_row != b.centroid_row) {
                return a.centroid_row < b.centroid_row;
              }
              return a.centroid_col < b.centroid_col;
            });
  return targets;
}

inline std::vector<DetectedTarget> detect_targets(const FineResult& fine,
                                                  std::int64_t min_pixels) {
  return detect_targets(fine.label_map, min_pixels);
}

// Fixed overlay palette; class c >= 1 maps to entry (c-1) mod size.
inline const std::array<std::array<std::uint8_t, 3>, 12>& class_palette() {
  static const std::array<std::array<std::uint8_t, 3>, 12> palette = {{
      {230, 25, 75},    // red
      {60, 180, 75},    // green
      {0, 130, 200},    // blue
      {255, 225, 25},   // yellow
      {245, 130, 48},   // orange
      {145, 30, 180},   // purple
      {70, 240, 240},   // cyan
      {240, 50, 230},   // magenta
      {210, 245, 60},   // lime
      {0, 128, 128},    // teal
      {170, 110, 40},   // brown
      {250, 190, 212},  // pink
  }};
  return palette;
}

inline std::array<std::uint8_t, 3> class_color(std::int64_t class_id) {
  const auto& palette = class_palette();
  return palette[static_cast<std::size_t>((class_id - 1) %
                                          static_cast<std::int64_t>(
                                              palette.size()))];
}

inline RgbImage grayscale_to_rgb(const Tensor& image) {
  const std::int64_t H = image.dim(1);
  const std::int64_t W = image.dim(2);
  RgbImage out(H, W);
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      const double v = std::min(std::max(image.at(0, y, x), 0.0), 1.0);
      const auto g = static_cast<std::uint8_t>(v * 255.0 + 0.5);
      std::uint8_t* p = out.px(y, x);
      p[0] = p[1] = p[2] = g;
    }
  }
  return out;
}

// Overwrites pixels with a non-background label by their class color.
// Overwrite semantics make repeated application a no-op.
inline void overlay_labels(RgbImage& canvas, const LabelImage& label_map) {
  for (std::int64_t y = 0; y < canvas.height; ++y) {
    for (std::int64_t x = 0; x < canvas.width; ++x) {
      const std::int32_t cls = label_map.at(y, x);
      if (cls == 0) continue;
      const auto color = class_color(cls);
      std::uint8_t* p = canvas.px(y, x);
      p[0] = color[0];
      p[1] = color[1];
      p[2] = color[2];
    }
  }
}

// Rendered views of one inference: the input, the colored label map,
// and the overlay of the two.
struct CompositeResult {
  RgbImage input_gray;
  RgbImage label_colors;
  RgbImage composite;
};

inline CompositeResult composite_output(const Tensor& image,
                                        const FineResult& fine) {
  if (image.dim(1) != fine.label_map.height ||
      image.dim(2) != fine.label_map.width) {
    throw DimensionError("composite_output: image " + image.shape_str() +
                         " does not match label map " +
                         std::to_string(fine.label_map.height) + "x" +
                         std::to_string(fine.label_map.width));
  }
  CompositeResult r;
  r.input_gray = grayscale_to_rgb(image);
  r.label_colors = RgbImage(fine.label_map.height, fine.label_map.width);
  overlay_labels(r.label_colors, fine.label_map);
  r.composite = r.input_gray;
  overlay_labels(r.composite, fine.label_map);
  return r;
}

}  // namespace savers
