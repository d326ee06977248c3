#pragma once

#include <stdexcept>
#include <string>

namespace stembed {

// Bad parameter values or indices.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unparseable or invalid input files.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Greedy cover needs more colors than allowed.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Instance or enumeration too large.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input does not have the structure a routine assumes (e.g. not additive).
struct InconsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A guarantee of the construction failed; indicates a bug or corrupt input.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace stembed
