#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "asos/common.hpp"

namespace asos {

/// Dense row-major n-d array. Image rasters and activation maps use
/// channel-major (c, h, w) order in memory; batches prepend the sample axis.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, T fill = T{})
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(std::initializer_list<std::size_t> shape, T fill = T{})
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h,
                      std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Reinterpret the same buffer under a new shape of equal element count.
  void reshape(std::vector<std::size_t> shape) {
    if (count(shape) != data_.size())
      throw ConfigError("tensor reshape changes element count");
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

using Tensorf = Tensor<float>;

}  // namespace asos
