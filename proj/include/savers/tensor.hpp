#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "savers/errors.hpp"

namespace savers {

inline std::int64_t shape_product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t e : shape) n *= e;
  return n;
}

inline std::string shape_to_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream oss;
  oss << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) oss << ",";
    oss << shape[i];
  }
  oss << "]";
  return oss.str();
}

// Dense N-dimensional array of doubles, row-major.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape)
      : shape_(std::move(shape)) {
    check_extents();
    data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
  }

  Tensor(std::vector<std::int64_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    check_extents();
    if (static_cast<std::int64_t>(data_.size()) != shape_product(shape_)) {
      throw DimensionError("tensor data length " +
                           std::to_string(data_.size()) +
                           " does not match shape " + shape_to_string(shape_));
    }
  }

  static Tensor full(std::vector<std::int64_t> shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t i) const {
    return shape_[static_cast<std::size_t>(i)];
  }
  std::int64_t size() const {
    return static_cast<std::int64_t>(data_.size());
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::int64_t i) {
    return data_[static_cast<std::size_t>(i)];
  }
  double operator[](std::int64_t i) const {
    return data_[static_cast<std::size_t>(i)];
  }

  // [H,W] accessor.
  double& at(std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(y * dim(1) + x)];
  }
  double at(std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>(y * dim(1) + x)];
  }

  // [C,H,W] accessor.
  double& at(std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>((c * dim(1) + y) * dim(2) + x)];
  }
  double at(std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>((c * dim(1) + y) * dim(2) + x)];
  }

  // [F,C,kh,kw] accessor.
  double& at(std::int64_t f, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(
        ((f * dim(1) + c) * dim(2) + y) * dim(3) + x)];
  }
  double at(std::int64_t f, std::int64_t c, std::int64_t y,
            std::int64_t x) const {
    return data_[static_cast<std::size_t>(
        ((f * dim(1) + c) * dim(2) + y) * dim(3) + x)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const { return shape_to_string(shape_); }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  void check_extents() const {
    if (shape_.empty()) {
      throw DimensionError("tensor shape must have at least one extent");
    }
    for (std::int64_t e : shape_) {
      if (e < 1) {
        throw DimensionError("tensor extents must be >= 1, got " +
                             shape_to_string(shape_));
      }
    }
  }

  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

}  // namespace savers
