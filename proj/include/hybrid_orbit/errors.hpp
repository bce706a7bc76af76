#pragma once

#include <stdexcept>
#include <string>

namespace hybrid_orbit {

// Shapes or sizes that do not fit together.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Iterative routines that failed to converge, singular systems, non-finite values.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed user-provided data (JSON files, catalog names, flags).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hybrid_orbit
