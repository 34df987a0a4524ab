#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace koda {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Conformability violations: message carries both shapes.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An op produced inf/nan: message carries the op identity.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValueError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A simulated trajectory left the finite range.
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace koda
