#pragma once

#include <memory>
#include <vector>

#include "koda/common.hpp"
#include "koda/rng.hpp"

namespace koda {

// Dense row-major array of doubles. Cheap to copy (shared storage); treated
// as immutable once it has been handed to a Tape or another thread. mut() is
// only for filling freshly created arrays.
class Array {
 public:
  Array() : shape_{}, data_(std::make_shared<std::vector<double>>()) {}

  static Array zeros(Shape shape);
  static Array full(Shape shape, double value);
  static Array from(Shape shape, std::vector<double> data);
  static Array scalar(double value);
  static Array random_uniform(Shape shape, double lo, double hi, Rng& rng);
  static Array random_normal(Shape shape, double std, Rng& rng);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  const double* data() const { return data_->data(); }
  double* mut() { return data_->data(); }

  double operator[](std::size_t i) const { return (*data_)[i]; }
  double scalar_value() const;

  bool same_shape(const Array& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  Array clone() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
};

std::size_t shape_size(const Shape& s);

}  // namespace koda
