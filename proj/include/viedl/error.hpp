#pragma once

#include <stdexcept>
#include <string>

namespace viedl {

// Bad configuration or malformed input (files, flags, config keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss or parameter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace viedl
