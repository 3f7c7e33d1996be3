#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "savers/errors.hpp"
#include "savers/tensor.hpp"

namespace savers {

// Per-pixel class indices, 0 = background.
struct LabelImage {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t num_classes = 0;
  std::vector<std::int32_t> labels;  // row-major, height*width

  LabelImage() = default;
  LabelImage(std::int64_t h, std::int64_t w, std::int64_t nc)
      : height(h), width(w), num_classes(nc),
        labels(static_cast<std::size_t>(h * w), 0) {}

  std::int32_t& at(std::int64_t y, std::int64_t x) {
    return labels[static_cast<std::size_t>(y * width + x)];
  }
  std::int32_t at(std::int64_t y, std::int64_t x) const {
    return labels[static_cast<std::size_t>(y * width + x)];
  }

  void validate() const {
    if (static_cast<std::int64_t>(labels.size()) != height * width) {
      throw DimensionError("label image data does not match extents");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) {
        throw DataError("label value " + std::to_string(labels[i]) +
                        " at pixel " + std::to_string(i) +
                        " outside [0," + std::to_string(num_classes) + ")");
      }
    }
  }
};

// One SAR image chip with its class and capture metadata. The image is
// amplitude data normalized to [0,1], shape [1,H,W].
struct ChipRecord {
  Tensor image;
  std::int64_t class_id = 0;  // 0 = background/clutter
  double depression_deg = 0.0;
  double aspect_deg = 0.0;
  std::string source_name;
};

// In-memory dataset element: chip plus its ground-truth label image.
struct Sample {
  Tensor image;
  LabelImage label;
  std::int64_t class_id = 0;
  std::string source_name;
};

// 8-bit RGB raster for rendered outputs.
struct RgbImage {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> data;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(std::int64_t h, std::int64_t w)
      : height(h), width(w), data(static_cast<std::size_t>(h * w * 3), 0) {}

  std::uint8_t* px(std::int64_t y, std::int64_t x) {
    return data.data() + (y * width + x) * 3;
  }
  const std::uint8_t* px(std::int64_t y, std::int64_t x) const {
    return data.data() + (y * width + x) * 3;
  }
};

}  // namespace savers
