#include "flowgrpo/diffcore/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("DenseArray: shape must have at least one extent");
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("DenseArray: extents must be positive");
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("DenseArray: shape " + shape_string() + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

std::size_t DenseArray::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("DenseArray: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string());
  }
  return shape_[axis];
}

void DenseArray::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool DenseArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseArray::shape_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape_[i]);
  }
  return out + "]";
}

void require_same_shape(const DenseArray& a, const DenseArray& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void require_rank(const DenseArray& a, std::size_t rank, const char* what) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + a.shape_string());
  }
}

}  // namespace flowgrpo
