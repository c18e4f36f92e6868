#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qicvt {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised whenever an operation would produce NaN or Inf from its inputs.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor with value semantics. Extents may be zero so that
// empty proposal sets and the like need no special casing; the invariant
// numel() == product(shape) always holds.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, std::vector<T>{value}); }
  static BasicTensor vector(std::initializer_list<T> values);
  static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }
  const T* data() const noexcept { return data_.data(); }
  T* data() noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 2-D element access; rank must be 2.
  T& at(std::size_t row, std::size_t col);
  const T& at(std::size_t row, std::size_t col) const;

  BasicTensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  // Bitwise comparison of shape and payload.
  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

template <typename T>
double max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace qicvt
