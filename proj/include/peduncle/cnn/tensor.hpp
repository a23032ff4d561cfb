#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "peduncle/error.hpp"

namespace peduncle::cnn {

struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const noexcept { return n * c * h * w; }
  std::size_t per_sample() const noexcept { return c * h * w; }
  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

/// Dense NCHW tensor of doubles.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0) : shape_(shape), data_(shape.count(), fill) {}

  const Shape4& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double* sample(std::size_t n) noexcept { return data_.data() + n * shape_.per_sample(); }
  const double* sample(std::size_t n) const noexcept { return data_.data() + n * shape_.per_sample(); }

  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Shape4 shape_;
  std::vector<double> data_;
};

inline void assert_finite([[maybe_unused]] const Tensor4& t) {
#ifndef NDEBUG
  if (!t.all_finite()) throw Error(ErrorCode::InvalidInput, "non-finite tensor value");
#endif
}

}  // namespace peduncle::cnn
