#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace urm::core {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Raised for any extent mismatch; the message carries both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a forward op produces NaN/Inf and numeric checking is enabled.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void throw_shape_mismatch(const char* op, const Shape& a, const Shape& b);

// Contiguous row-major storage. Copies on every reshaping operation; there are
// no strided views.
template <typename Real>
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(Shape shape, Real fill = Real(0));
  NdArray(Shape shape, std::vector<Real> data);

  static NdArray scalar(Real v) { return NdArray(Shape{}, std::vector<Real>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  bool empty() const { return data_.empty(); }

  // 2-D helpers; 1-D arrays are treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::vector<Real>& storage() { return data_; }
  const std::vector<Real>& storage() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  Real item() const;
  void fill(Real v);
  NdArray reshaped(Shape shape) const;
  bool all_finite() const;

  template <typename Other>
  NdArray<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return NdArray<Other>(shape_, std::move(out));
  }

  friend bool operator==(const NdArray& a, const NdArray& b) = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

extern template class NdArray<float>;
extern template class NdArray<double>;

}  // namespace urm::core
