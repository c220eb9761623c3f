#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vcr/error.hpp"

namespace vcr {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

// Dense row-major array of doubles with rank 1..4.
//
// Tensors are plain values: copying copies the payload, and every free
// function below returns a fresh tensor instead of modifying its argument.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  template <class... I>
  double& operator()(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <class... I>
  double operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Flat offset of a multi-index; throws ShapeError on rank mismatch.
  std::size_t offset(std::initializer_list<std::size_t> idx) const;
  std::size_t offset(std::span<const std::size_t> idx) const;

  // Row-major strides of the current shape.
  std::vector<std::size_t> strides() const;

  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

// Elementwise helpers used across the library.
Tensor scale(const Tensor& t, double factor);
Tensor add(const Tensor& a, const Tensor& b);
Tensor axpby(double a, const Tensor& x, double b, const Tensor& y);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Sum with a fixed binary reduction tree, so the result does not depend on
// how callers partition the work.
double pairwise_sum(std::span<const double> values);

// out[axes-permuted index] = t[index]; out.shape()[i] == t.shape()[axes[i]].
Tensor permute(const Tensor& t, std::span<const std::size_t> axes);
Tensor permute(const Tensor& t, std::initializer_list<std::size_t> axes);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> axes);

// Reduces axis 0 of a rank-3 tensor to extent 2: [max over axis 0, mean over
// axis 0].
Tensor gb_pool(const Tensor& t);

// Same-padded (zeros) cross-correlation. t is (Cin,H,W), kernel is
// (Cout,Cin,k,k) with odd k; the result is (Cout,H,W).
Tensor conv2d(const Tensor& t, const Tensor& kernel);

// Per-channel normalization of a (C,H,W) tensor with population variance:
// (x - mean) / sqrt(var + eps). Constant channels map to zero.
Tensor instance_norm(const Tensor& t, double eps = 1e-5);

Tensor sigmoid(const Tensor& t);
double sigmoid(double x);

// exp(v/tau) / sum(exp(v/tau)), evaluated with max subtraction.
std::vector<double> softmax_temp(std::span<const double> v, double tau);

}  // namespace vcr
