#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fastgan {

#ifdef FASTGAN_DOUBLE
using Real = double;
#else
using Real = float;
#endif

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor or layer shapes. Always a programming/configuration bug.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fastgan
