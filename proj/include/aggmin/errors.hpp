#pragma once

#include <stdexcept>
#include <string>

namespace aggmin {

// Error taxonomy. The CLI maps these onto exit codes 1 (config), 2 (numerical)
// and 3 (non-convergence); DomainError is a caller bug and maps to 1.

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class NumericalFailure : public Error {
public:
  using Error::Error;
};

class NonConvergence : public Error {
public:
  using Error::Error;
};

class UnsupportedKernel : public Error {
public:
  using Error::Error;
};

}  // namespace aggmin
