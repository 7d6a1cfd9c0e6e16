#pragma once

#include <stdexcept>
#include <string>

namespace hetcop {

// Bad input: malformed files, out-of-range parameters, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a valid result (non-PD matrix, failed inversion).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace hetcop
