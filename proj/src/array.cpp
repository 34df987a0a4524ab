#include "koda/array.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace koda {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Array Array::zeros(Shape shape) {
  Array a;
  a.shape_ = std::move(shape);
  a.data_ = std::make_shared<std::vector<double>>(shape_size(a.shape_), 0.0);
  return a;
}

Array Array::full(Shape shape, double value) {
  Array a;
  a.shape_ = std::move(shape);
  a.data_ = std::make_shared<std::vector<double>>(shape_size(a.shape_), value);
  return a;
}

Array Array::from(Shape shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("Array::from: shape " + shape_str(shape) + " does not match data length " +
                     std::to_string(data.size()));
  }
  Array a;
  a.shape_ = std::move(shape);
  a.data_ = std::make_shared<std::vector<double>>(std::move(data));
  return a;
}

Array Array::scalar(double value) { return full({1}, value); }

Array Array::random_uniform(Shape shape, double lo, double hi, Rng& rng) {
  Array a = zeros(std::move(shape));
  double* p = a.mut();
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = rng.uniform(lo, hi);
  return a;
}

Array Array::random_normal(Shape shape, double std, Rng& rng) {
  Array a = zeros(std::move(shape));
  double* p = a.mut();
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = std * rng.normal();
  return a;
}

double Array::scalar_value() const {
  if (size() != 1) throw ShapeError("scalar_value on non-scalar array " + shape_str(shape_));
  return (*data_)[0];
}

bool Array::all_finite() const {
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Array Array::clone() const {
  Array a;
  a.shape_ = shape_;
  a.data_ = std::make_shared<std::vector<double>>(*data_);
  return a;
}

}  // namespace koda
