#pragma once

#include <cstddef>
#include <vector>

#include "physdoa/common.hpp"

namespace physdoa {

/// Dense row-major 3-D array indexed (a, b, c).
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, T fill = T{})
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t a, std::size_t b, std::size_t c) { return data_[(a * d1_ + b) * d2_ + c]; }
  const T& operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * d1_ + b) * d2_ + c];
  }
  T* row(std::size_t a, std::size_t b) { return data_.data() + (a * d1_ + b) * d2_; }
  const T* row(std::size_t a, std::size_t b) const { return data_.data() + (a * d1_ + b) * d2_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Tensor3& o) const { return d0_ == o.d0_ && d1_ == o.d1_ && d2_ == o.d2_; }
  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<T> data_;
};

}  // namespace physdoa
