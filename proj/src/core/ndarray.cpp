#include "urm/core/ndarray.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace urm::core {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void throw_shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                       shape_string(b));
}

template <typename Real>
NdArray<Real>::NdArray(Shape shape, Real fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

template <typename Real>
NdArray<Real>::NdArray(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("NdArray: shape " + shape_string(shape_) + " does not hold " +
                         std::to_string(data_.size()) + " elements");
  }
}

template <typename Real>
std::size_t NdArray<Real>::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() <= 1) return 1;
  throw DimensionError("rows(): expected a 1-D or 2-D array, got " + shape_string(shape_));
}

template <typename Real>
std::size_t NdArray<Real>::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  if (shape_.empty()) return 1;
  throw DimensionError("cols(): expected a 1-D or 2-D array, got " + shape_string(shape_));
}

template <typename Real>
Real NdArray<Real>::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item(): array of shape " + shape_string(shape_) + " is not a scalar");
  }
  return data_[0];
}

template <typename Real>
void NdArray<Real>::fill(Real v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename Real>
NdArray<Real> NdArray<Real>::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) throw_shape_mismatch("reshape", shape_, shape);
  return NdArray(std::move(shape), data_);
}

template <typename Real>
bool NdArray<Real>::all_finite() const {
  for (Real v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template class NdArray<float>;
template class NdArray<double>;

}  // namespace urm::core
